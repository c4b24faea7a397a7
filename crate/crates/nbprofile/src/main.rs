use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use nbprofile::config::{Overrides, PipelineConfig};
use nbprofile::instances::{bound_path, format_bound, format_instance};
use nbprofile::pipeline::{compute_lower_bound, Pipeline, PipelineError};
use nbprofile::report::write_text;
use nbprofile_core::search::{generate_instance, Roster};

#[derive(Parser)]
#[command(
    name = "nbprofile",
    version,
    about = "Profile, cluster and tune local-search neighborhoods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured searches and write merged logs.
    Collect(StageArgs),
    /// Detect frames, build features and cluster the neighborhoods.
    Analyze(StageArgs),
    /// Draw per-neighborhood and per-instance figures.
    Plot(StageArgs),
    /// Compare tuning over raw and clustered weight spaces.
    Tune(StageArgs),
    /// Write random instances with lower-bound files.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frames per instance.
    #[arg(long)]
    frames: Option<usize>,
    /// Intervals of the quality grid.
    #[arg(long)]
    intervals: Option<usize>,
    /// Width ratio of consecutive intervals.
    #[arg(long)]
    decay: Option<f64>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    dir: PathBuf,
    /// Customer counts, one instance each.
    #[arg(long, value_delimiter = ',', required = true)]
    customers: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    capacity: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "demo")]
    prefix: String,
    /// Iterations of the lower-bound reference run.
    #[arg(long, default_value_t = 500_000)]
    reference_iterations: u64,
}

fn stage(cmd: &Command, args: &StageArgs) -> Result<(), PipelineError> {
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        n_frames: args.frames,
        n_intervals: args.intervals,
        decay: args.decay,
    };
    let config = PipelineConfig::load(&args.config)
        .map_err(PipelineError::Config)?
        .with_overrides(&overrides);
    let p = Pipeline::new(config)?;
    match cmd {
        Command::Collect(_) => {
            let s = p.collect()?;
            println!("wrote {} logs from {} runs", s.log_paths.len(), s.runs.len());
        }
        Command::Analyze(_) => {
            let s = p.analyze()?;
            println!("{} neighborhoods in {} clusters", s.clusters.len(), s.model().k());
            for (id, c) in &s.clusters {
                println!("  {id}: {c}");
            }
        }
        Command::Plot(_) => {
            let s = p.plot()?;
            println!("wrote {} figures", s.figures.len());
        }
        Command::Tune(_) => {
            let s = p.tune()?;
            for c in &s.comparisons {
                let (t, pv) = c.test.map_or((f64::NAN, f64::NAN), |x| (x.t, x.p_value));
                println!("{}: {}/{} trials, t={t:.4}, p={pv:.4}", c.name, c.wins, c.trials);
            }
        }
        Command::Generate(_) => unreachable!(),
    }
    println!("outputs in {}", p.config().out_dir().display());
    Ok(())
}

fn generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let roster = Roster::standard();
    for (i, &n) in args.customers.iter().enumerate() {
        let id = format!("{}-{n}", args.prefix);
        let inst = generate_instance(id.clone(), n, args.capacity, args.seed + i as u64)?;
        let path = args.dir.join(format!("{id}.txt"));
        write_text(&path, &format_instance(&inst))?;
        let lb = compute_lower_bound(&inst, &roster, args.reference_iterations, args.seed)
            .with_context(|| format!("reference run for {id}"))?;
        write_text(
            &bound_path(&path),
            &format_bound(lb, args.reference_iterations, args.seed),
        )?;
        println!("{}: lower bound {lb}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a).map_err(|e| PipelineError::Data {
            stage: "generate",
            source: e,
        }),
        Command::Collect(a) | Command::Analyze(a) | Command::Plot(a) | Command::Tune(a) => stage(&cli.command, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
