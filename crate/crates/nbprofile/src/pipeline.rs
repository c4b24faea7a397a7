//! The four pipeline stages over one output directory.
//!
//! ```text
//! out/logs/<instance>.log          merged run log per instance
//! out/collect/runs.csv             one row per search run
//! out/analysis/frames.csv          frame spec per instance
//! out/analysis/features.csv        raw feature matrix, imputed.csv marks imputed cells
//! out/analysis/clusters.csv        cluster per neighborhood (1-based)
//! out/analysis/bic.csv             BIC per (K, seed)
//! out/analysis/model.csv           selected mixture components
//! out/plots/<instance>/...         SVG figures with CSV sidecars
//! out/tune/...                     tuning report, per-run gaps, summary, boxplot
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use nbprofile_core::aggregate::{frame_ratios, frame_scores, trimmed_len, MagnitudeKind};
use nbprofile_core::cluster::{choose_best, fit, ClusterModel, Selection};
use nbprofile_core::features::{assemble, standardize, FeatureMatrix, InstanceObservables};
use nbprofile_core::frames::{group_frames, trim_empty_tail, FrameSpec};
use nbprofile_core::rng::derive_seed;
use nbprofile_core::runlog::{merge_logs, IntervalGrid, QualityBounds, RunLog};
use nbprofile_core::search::{
    initial_solution, lahc_run, reference_run, Budget, ModeledClock, Roster, RoutingInstance, RunOutcome, SearchConfig,
    Stopwatch,
};
use nbprofile_core::tune::{
    build_space, default_config, evaluate_config, identical_weights, optimality_gap, random_search, Evaluation, RunJob,
    SpaceMode, TuneResult, TuneSettings, DEFAULT_IT_WI, DEFAULT_LA_LIST,
};

use crate::config::{ClockKind, PipelineConfig};
use crate::instances::{bound_path, format_bound, instance_id, read_bound, read_instance};
use crate::logfile::{format_log, read_log};
use crate::plot;
use crate::report::{num, read_table, write_text, Table};
use crate::stats::{paired_compare, PairedTest};
use crate::Provenance;

const COLLECT_STREAM: u64 = 0xC011_EC70;
const TUNE_STREAM: u64 = 0x7E5E_0000;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0:#}")]
    Config(anyhow::Error),
    #[error("{stage}: {source:#}")]
    Data { stage: &'static str, source: anyhow::Error },
    #[error("{stage}: internal error: {message}")]
    Internal { stage: &'static str, message: String },
}

impl PipelineError {
    /// Process exit code: 2 for bad inputs, 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Data { .. } => 2,
            PipelineError::Internal { .. } => 3,
        }
    }
}

pub type StageResult<T> = Result<T, PipelineError>;

trait Stage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
    fn internal(self, stage: &'static str) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|e| PipelineError::Data {
            stage,
            source: e.into(),
        })
    }

    fn internal(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|e| PipelineError::Internal {
            stage,
            message: format!("{:#}", e.into()),
        })
    }
}

/// An instance with its quality bounds.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub path: PathBuf,
    pub instance: RoutingInstance,
    pub initial_cost: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub configuration: String,
    pub instance_id: String,
    pub run: usize,
    pub seed: u64,
    pub best_cost: f64,
    pub gap: f64,
    pub iterations: u64,
    pub restarts: u64,
}

#[derive(Debug, Clone)]
pub struct CollectSummary {
    pub log_paths: Vec<PathBuf>,
    pub logs: Vec<RunLog>,
    pub runs: Vec<RunRecord>,
    /// Longest wall time of a single run, in seconds.
    pub max_run_secs: f64,
}

#[derive(Debug, Clone)]
pub struct AnalysisSummary {
    pub frames: Vec<(String, FrameSpec)>,
    pub features: FeatureMatrix,
    pub selection: Selection,
    /// `(neighborhood id, 1-based cluster)` in roster order.
    pub clusters: Vec<(String, usize)>,
}

impl AnalysisSummary {
    pub fn model(&self) -> &ClusterModel {
        &self.selection.best
    }

    pub fn cluster_of(&self, nbh_id: &str) -> Option<usize> {
        self.clusters.iter().find(|(id, _)| id == nbh_id).map(|c| c.1)
    }
}

#[derive(Debug, Clone)]
pub struct PlotSummary {
    pub figures: Vec<PathBuf>,
}

/// Held-out evaluation means of one paired trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub basic: f64,
    pub clustered: f64,
    pub basic_identical: f64,
    pub clustered_identical: f64,
    pub default: f64,
    pub basic_training: f64,
    pub clustered_training: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub name: String,
    /// Trials where the first series is at most the second.
    pub wins: usize,
    pub trials: usize,
    pub test: Option<PairedTest>,
}

#[derive(Debug, Clone)]
pub struct TuneSummary {
    pub rows: Vec<TrialRow>,
    pub comparisons: Vec<Comparison>,
    pub basic_params: usize,
    pub clustered_params: usize,
}

impl TuneSummary {
    pub fn comparison(&self, name: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.name == name)
    }
}

struct WallClock(Option<Instant>);

impl Stopwatch for WallClock {
    fn start(&mut self) {
        self.0 = Some(Instant::now());
    }

    fn stop(&mut self, _work_units: u64) -> u64 {
        self.0.take().map_or(0, |t| t.elapsed().as_nanos() as u64)
    }
}

/// Stable stream index for an instance id, so seeds do not depend on the
/// order or presence of other instances.
fn id_stream(id: &str) -> u64 {
    let d = Sha256::digest(id.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Lower bound from a long uniform-weight run with the default integers.
pub fn compute_lower_bound(inst: &RoutingInstance, roster: &Roster, iterations: u64, seed: u64) -> anyhow::Result<f64> {
    Ok(reference_run(inst, roster, DEFAULT_LA_LIST, DEFAULT_IT_WI, iterations, seed)?.cost())
}

pub struct Pipeline {
    config: PipelineConfig,
    provenance: Provenance,
    roster: Roster,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> StageResult<Self> {
        config.validate().map_err(PipelineError::Config)?;
        let provenance = Provenance::new(&config.hash(), config.seed);
        let roster = config.search.roster.roster();
        Ok(Self {
            config,
            provenance,
            roster,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.config.out_dir().join(rel)
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.out("logs").join(format!("{id}.log"))
    }

    fn instance_ids(&self) -> Vec<String> {
        self.config.instance_paths().iter().map(|p| instance_id(p)).collect()
    }

    /// Reads every instance; a missing `.lb` file is filled by a reference
    /// run and written next to the instance.
    pub fn load_instances(&self) -> anyhow::Result<Vec<LoadedInstance>> {
        let paths = self.config.instance_paths();
        let mut ids = HashMap::new();
        for p in &paths {
            if let Some(prev) = ids.insert(instance_id(p), p) {
                bail!("instances {} and {} share an id", prev.display(), p.display());
            }
        }
        paths
            .par_iter()
            .map(|path| {
                let instance = read_instance(path)?;
                let initial_cost = initial_solution(&instance).cost();
                let lower_bound = match read_bound(path)? {
                    Some(lb) => lb,
                    None => {
                        let c = &self.config.instances;
                        let lb =
                            compute_lower_bound(&instance, &self.roster, c.reference_iterations, c.reference_seed)?;
                        let text = format_bound(lb, c.reference_iterations, c.reference_seed);
                        write_text(&bound_path(path), &text)?;
                        lb
                    }
                };
                if lower_bound >= initial_cost {
                    bail!(
                        "{}: lower bound {lower_bound} is not below the initial cost {initial_cost}",
                        path.display()
                    );
                }
                Ok(LoadedInstance {
                    path: path.clone(),
                    instance,
                    initial_cost,
                    lower_bound,
                })
            })
            .collect()
    }

    fn grid_for(&self, li: &LoadedInstance) -> anyhow::Result<IntervalGrid> {
        let bounds = QualityBounds::new(li.initial_cost, li.lower_bound)?;
        Ok(IntervalGrid::new(
            bounds,
            self.config.grid.n_intervals,
            self.config.grid.decay,
        )?)
    }

    fn run(&self, inst: &RoutingInstance, config: &SearchConfig, grid: &IntervalGrid) -> anyhow::Result<RunOutcome> {
        let out = match self.config.search.clock {
            ClockKind::Modeled => lahc_run(inst, &self.roster, config, grid, &mut ModeledClock::default())?,
            ClockKind::Wall => lahc_run(inst, &self.roster, config, grid, &mut WallClock(None))?,
        };
        Ok(out)
    }

    /// Runs every configuration on every instance and writes merged logs.
    pub fn collect(&self) -> StageResult<CollectSummary> {
        const S: &str = "collect";
        let c = &self.config.collect;
        if c.runs == 0 || c.configurations.is_empty() {
            return Err(anyhow!("zero runs configured")).stage(S);
        }
        let loaded = self.load_instances().stage(S)?;
        let grids: Vec<IntervalGrid> = loaded
            .iter()
            .map(|l| self.grid_for(l))
            .collect::<anyhow::Result<_>>()
            .stage(S)?;
        let n_nbh = self.roster.len();
        let mut jobs = Vec::new();
        for (ii, li) in loaded.iter().enumerate() {
            let base = derive_seed(
                derive_seed(self.config.seed, COLLECT_STREAM),
                id_stream(li.instance.id()),
            );
            for (ci, rc) in c.configurations.iter().enumerate() {
                let weights = rc.weights.clone().unwrap_or_else(|| vec![1.0; n_nbh]);
                for r in 0..c.runs {
                    let seed = derive_seed(derive_seed(base, ci as u64), r as u64);
                    let cfg = SearchConfig::new(
                        weights.clone(),
                        rc.la_list,
                        rc.it_wi,
                        Budget::Iterations(c.iterations),
                        seed,
                    )
                    .with_context(|| format!("configuration `{}`", rc.name))
                    .stage(S)?;
                    jobs.push((ii, ci, r, cfg));
                }
            }
        }
        let results: Vec<(RunOutcome, f64)> = jobs
            .par_iter()
            .map(|(ii, _, _, cfg)| {
                let t = Instant::now();
                let out = self.run(&loaded[*ii].instance, cfg, &grids[*ii])?;
                Ok((out, t.elapsed().as_secs_f64()))
            })
            .collect::<anyhow::Result<_>>()
            .stage(S)?;

        let mut runs = Vec::with_capacity(jobs.len());
        let mut per_instance: Vec<Vec<RunLog>> = vec![Vec::new(); loaded.len()];
        let mut max_run_secs = 0.0f64;
        for ((ii, ci, r, cfg), (out, secs)) in jobs.iter().zip(results) {
            let li = &loaded[*ii];
            max_run_secs = max_run_secs.max(secs);
            runs.push(RunRecord {
                configuration: c.configurations[*ci].name.clone(),
                instance_id: li.instance.id().to_string(),
                run: *r,
                seed: cfg.seed,
                best_cost: out.best.cost(),
                gap: optimality_gap(out.best.cost(), li.lower_bound).stage(S)?,
                iterations: out.iterations,
                restarts: out.restarts,
            });
            per_instance[*ii].push(out.log);
        }

        let mut log_paths = Vec::new();
        let mut logs = Vec::new();
        for (li, instance_logs) in loaded.iter().zip(per_instance) {
            let merged = merge_logs(&instance_logs).internal(S)?;
            let path = self.log_path(li.instance.id());
            write_text(&path, &format_log(&merged, Some(&self.provenance))).stage(S)?;
            log_paths.push(path);
            logs.push(merged);
        }

        let mut t = Table::new(&[
            "configuration",
            "instance",
            "run",
            "seed",
            "best_cost",
            "lower_bound",
            "gap",
            "iterations",
            "restarts",
        ]);
        for r in &runs {
            let lb = loaded
                .iter()
                .find(|l| l.instance.id() == r.instance_id)
                .map_or(f64::NAN, |l| l.lower_bound);
            t.push(vec![
                r.configuration.clone(),
                r.instance_id.clone(),
                r.run.to_string(),
                r.seed.to_string(),
                num(r.best_cost),
                num(lb),
                num(r.gap),
                r.iterations.to_string(),
                r.restarts.to_string(),
            ]);
        }
        t.write(&self.out("collect/runs.csv"), &self.provenance).stage(S)?;
        Ok(CollectSummary {
            log_paths,
            logs,
            runs,
            max_run_secs,
        })
    }

    fn read_logs(&self, stage: &'static str) -> StageResult<Vec<RunLog>> {
        self.instance_ids()
            .iter()
            .map(|id| {
                let path = self.log_path(id);
                if !path.is_file() {
                    bail!("no log for instance `{id}` at {} (run collect first)", path.display());
                }
                read_log(&path).with_context(|| format!("reading {}", path.display()))
            })
            .collect::<anyhow::Result<_>>()
            .stage(stage)
    }

    /// Frames, features and clusters from the collected logs.
    pub fn analyze(&self) -> StageResult<AnalysisSummary> {
        const S: &str = "analyze";
        let logs = self.read_logs(S)?;
        let n_frames = self.config.frames.n_frames;
        let mut frames = Vec::new();
        let mut observables = Vec::new();
        for log in &logs {
            let id = log.instance_id().to_string();
            let activity = log.activity();
            let trimmed = trim_empty_tail(&activity)
                .with_context(|| format!("instance `{id}`"))
                .stage("analyze/frames")?;
            let spec = group_frames(trimmed, n_frames)
                .with_context(|| format!("instance `{id}`"))
                .stage("analyze/frames")?;
            let ratios = frame_ratios(log, &spec)
                .with_context(|| format!("instance `{id}`"))
                .stage("analyze/aggregate")?;
            let rho_improve = frame_scores(log, &spec, MagnitudeKind::Improve)
                .with_context(|| format!("instance `{id}`"))
                .stage("analyze/aggregate")?;
            let rho_worsen = frame_scores(log, &spec, MagnitudeKind::Worsen)
                .with_context(|| format!("instance `{id}`"))
                .stage("analyze/aggregate")?;
            observables.push(InstanceObservables {
                instance_id: id.clone(),
                neighborhood_ids: log.neighborhood_ids().to_vec(),
                ratios,
                rho_improve,
                rho_worsen,
            });
            frames.push((id, spec));
        }
        let features = assemble(&observables).stage("analyze/features")?;
        let data = if self.config.cluster.standardize {
            standardize(&features).stage("analyze/features")?.0
        } else {
            features.clone()
        };
        let matrix = data.to_dmatrix();
        let cs = &self.config.cluster;
        let k_hi = cs.k_max.min(matrix.nrows().saturating_sub(1));
        if cs.k_min > k_hi {
            return Err(anyhow!(
                "k_min {} exceeds the largest usable K {k_hi} for {} neighborhoods",
                cs.k_min,
                matrix.nrows()
            ))
            .stage("analyze/cluster");
        }
        let opts = cs.options();
        let pairs: Vec<(usize, u64)> = (cs.k_min..=k_hi)
            .flat_map(|k| cs.seeds.iter().map(move |&s| (k, s)))
            .collect();
        let attempts: Vec<_> = pairs
            .par_iter()
            .map(|&(k, seed)| (k, seed, fit(&matrix, k, derive_seed(self.config.seed, seed), &opts)))
            .collect();
        let selection = choose_best(attempts).stage("analyze/cluster")?;
        let clusters: Vec<(String, usize)> = features
            .row_ids
            .iter()
            .zip(&selection.best.assignments)
            .map(|(id, &a)| (id.clone(), a + 1))
            .collect();
        let summary = AnalysisSummary {
            frames,
            features,
            selection,
            clusters,
        };
        self.write_analysis(&summary, &logs).stage(S)?;
        Ok(summary)
    }

    fn write_analysis(&self, a: &AnalysisSummary, logs: &[RunLog]) -> anyhow::Result<()> {
        let p = &self.provenance;
        let mut t = Table::new(&["instance", "frame", "first_interval", "last_interval", "sum_n_iters"]);
        for ((id, spec), log) in a.frames.iter().zip(logs) {
            let activity = log.activity();
            for f in 1..=spec.n_frames() {
                let r = spec.intervals(f);
                let sum: u64 = activity[r.start() - 1..*r.end()].iter().sum();
                t.push(vec![
                    id.clone(),
                    f.to_string(),
                    r.start().to_string(),
                    r.end().to_string(),
                    sum.to_string(),
                ]);
            }
        }
        t.write(&self.out("analysis/frames.csv"), p)?;

        let fm = &a.features;
        let mut header = vec!["nbh_id".to_string()];
        header.extend(fm.column_labels.iter().cloned());
        let mut values = Table::new(&header);
        let mut imputed = Table::new(&["nbh_id", "column"]);
        for (r, id) in fm.row_ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(fm.row(r).iter().map(|&v| num(v)));
            values.push(row);
            for (c, label) in fm.column_labels.iter().enumerate() {
                if fm.missing[r * fm.n_cols() + c] {
                    imputed.push(vec![id.clone(), label.clone()]);
                }
            }
        }
        values.write(&self.out("analysis/features.csv"), p)?;
        imputed.write(&self.out("analysis/imputed.csv"), p)?;

        let model = a.model();
        let mut t = Table::new(&["nbh_id", "cluster", "max_posterior"]);
        for (row, (id, c)) in a.clusters.iter().enumerate() {
            t.push(vec![id.clone(), c.to_string(), num(model.max_posterior(row))]);
        }
        t.write(&self.out("analysis/clusters.csv"), p)?;

        // choose_best keeps the first of equal BICs in (K, seed) order
        let chosen = a
            .selection
            .trace
            .iter()
            .position(|e| e.k == model.k() && e.bic == Some(model.bic));
        let mut t = Table::new(&["k", "seed", "bic", "selected"]);
        for (i, e) in a.selection.trace.iter().enumerate() {
            let selected = chosen == Some(i);
            t.push(vec![
                e.k.to_string(),
                e.seed.to_string(),
                e.bic.map_or(String::new(), num),
                u8::from(selected).to_string(),
            ]);
        }
        t.write(&self.out("analysis/bic.csv"), p)?;

        let mut t = Table::new(&[
            "cluster",
            "size",
            "weight",
            "dim",
            "signal_var",
            "noise_var",
            "log_likelihood",
            "bic",
        ]);
        for (k, comp) in model.components.iter().enumerate() {
            let size = model.assignments.iter().filter(|&&x| x == k).count();
            t.push(vec![
                (k + 1).to_string(),
                size.to_string(),
                num(comp.weight),
                comp.dim().to_string(),
                num(comp.signal_var),
                num(comp.noise_var),
                num(model.log_likelihood),
                num(model.bic),
            ]);
        }
        t.write(&self.out("analysis/model.csv"), p)?;
        Ok(())
    }

    fn read_frame_ends(&self) -> anyhow::Result<HashMap<String, Vec<usize>>> {
        let path = self.out("analysis/frames.csv");
        let mut out: HashMap<String, Vec<usize>> = HashMap::new();
        if !path.is_file() {
            return Ok(out);
        }
        let (_, rows) = read_table(&path)?;
        for r in rows {
            if r.len() < 4 {
                bail!("{}: short row", path.display());
            }
            let end: usize = r[3]
                .parse()
                .with_context(|| format!("{}: bad interval `{}`", path.display(), r[3]))?;
            out.entry(r[0].clone()).or_default().push(end);
        }
        Ok(out)
    }

    /// Figures per neighborhood and per instance. Frame lines are drawn when
    /// the analysis has run.
    pub fn plot(&self) -> StageResult<PlotSummary> {
        const S: &str = "plot";
        let logs = self.read_logs(S)?;
        let ends = self.read_frame_ends().stage(S)?;
        let p = &self.provenance;
        let mut figures = Vec::new();
        for log in &logs {
            let id = log.instance_id();
            let dir = self.out("plots").join(id);
            let n = trimmed_len(log).with_context(|| format!("instance `{id}`")).stage(S)?;
            let activity = &log.activity()[..n];
            let frame_ends = ends.get(id).cloned().unwrap_or_default();
            let svg = plot::render_activity(&format!("{id}: applications per interval"), activity, &frame_ends, p)
                .internal(S)?;
            write_text(&dir.join("activity.svg"), &svg).stage(S)?;
            plot::activity_table(activity, &frame_ends)
                .write(&dir.join("activity.csv"), p)
                .stage(S)?;
            figures.push(dir.join("activity.svg"));
            for (k, nbh) in log.neighborhood_ids().iter().enumerate() {
                let rows = plot::neighborhood_buckets(log, k, n);
                let svg = plot::render_neighborhood(&format!("{id}: {nbh}"), &rows, p).internal(S)?;
                write_text(&dir.join(format!("{nbh}.svg")), &svg).stage(S)?;
                plot::bucket_table(&rows)
                    .write(&dir.join(format!("{nbh}.csv")), p)
                    .stage(S)?;
                figures.push(dir.join(format!("{nbh}.svg")));
            }
        }
        Ok(PlotSummary { figures })
    }

    /// Cluster labels (0-based, roster order) from the analysis report.
    fn read_cluster_labels(&self) -> anyhow::Result<Vec<usize>> {
        let path = self.out("analysis/clusters.csv");
        if !path.is_file() {
            bail!("no cluster report at {} (run analyze first)", path.display());
        }
        let (_, rows) = read_table(&path)?;
        let map: HashMap<String, usize> = rows
            .iter()
            .map(|r| {
                let c: usize = r
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .filter(|&c| c >= 1)
                    .ok_or_else(|| anyhow!("{}: bad cluster in row {:?}", path.display(), r))?;
                Ok((r[0].clone(), c - 1))
            })
            .collect::<anyhow::Result<_>>()?;
        self.roster
            .ids()
            .iter()
            .map(|id| {
                map.get(id)
                    .copied()
                    .ok_or_else(|| anyhow!("{}: neighborhood `{id}` missing", path.display()))
            })
            .collect()
    }

    /// Paired basic-vs-clustered tuning trials with identical-weight and
    /// default baselines.
    pub fn tune(&self) -> StageResult<TuneSummary> {
        const S: &str = "tune";
        let tc = &self.config.tune;
        let labels = self.read_cluster_labels().stage(S)?;
        let loaded = self.load_instances().stage(S)?;
        let grids: Vec<IntervalGrid> = loaded
            .iter()
            .map(|l| self.grid_for(l))
            .collect::<anyhow::Result<_>>()
            .stage(S)?;
        let (la, it) = tc.ranges().stage(S)?;
        let n = self.roster.len();
        let basic_space = build_space(SpaceMode::Basic, n, None, la, it).stage(S)?;
        let clustered_space = build_space(SpaceMode::Clustered, n, Some(&labels), la, it).stage(S)?;
        if tc.trials < 2 {
            return Err(anyhow!("at least 2 tuning trials are needed for the paired test")).stage(S);
        }
        let budget = Budget::Iterations(tc.iterations);
        let evaluate = |jobs: &[RunJob]| -> anyhow::Result<Vec<f64>> {
            jobs.par_iter()
                .map(|j| {
                    let li = &loaded[j.instance];
                    let out = self.run(&li.instance, &j.config, &grids[j.instance])?;
                    Ok(optimality_gap(out.best.cost(), li.lower_bound)?)
                })
                .collect()
        };

        let mut rows = Vec::new();
        let mut runs = Table::new(&["trial", "series", "instance", "seed", "gap"]);
        let mut configs = Table::new(&["trial", "series", "la_list", "it_wi", "weights"]);
        for trial in 0..tc.trials {
            let settings = TuneSettings {
                budget_runs: tc.budget_runs,
                n_instances: loaded.len(),
                run_budget: budget,
                eval_runs: tc.eval_runs,
                seed: derive_seed(self.config.seed, TUNE_STREAM + trial as u64),
            };
            let basic: TuneResult = random_search(&basic_space, &settings, evaluate).stage(S)?;
            let clustered: TuneResult = random_search(&clustered_space, &settings, evaluate).stage(S)?;
            let basic_sr = evaluate_config(&identical_weights(&basic.best).stage(S)?, &settings, evaluate).stage(S)?;
            let clustered_sr =
                evaluate_config(&identical_weights(&clustered.best).stage(S)?, &settings, evaluate).stage(S)?;
            let default = evaluate_config(&default_config(n, budget).stage(S)?, &settings, evaluate).stage(S)?;

            let series: [(&str, &Evaluation); 5] = [
                ("basic", &basic.evaluation),
                ("clustered", &clustered.evaluation),
                ("basic_identical", &basic_sr),
                ("clustered_identical", &clustered_sr),
                ("default", &default),
            ];
            let seeds = |e: &Evaluation| e.runs.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>();
            if series.iter().any(|(_, e)| seeds(e) != seeds(&basic.evaluation)) {
                return Err(anyhow!("trial {trial}: evaluation seeds differ between series")).internal(S);
            }
            for (name, e) in series {
                for &(inst, seed, gap) in &e.runs {
                    runs.push(vec![
                        trial.to_string(),
                        name.to_string(),
                        loaded[inst].instance.id().to_string(),
                        seed.to_string(),
                        num(gap),
                    ]);
                }
                let w: Vec<String> = e.config.weights().iter().map(|&x| num(x)).collect();
                configs.push(vec![
                    trial.to_string(),
                    name.to_string(),
                    e.config.la_list.to_string(),
                    e.config.it_wi.to_string(),
                    w.join(";"),
                ]);
            }
            rows.push(TrialRow {
                trial,
                seed: settings.seed,
                basic: basic.evaluation.mean_gap,
                clustered: clustered.evaluation.mean_gap,
                basic_identical: basic_sr.mean_gap,
                clustered_identical: clustered_sr.mean_gap,
                default: default.mean_gap,
                basic_training: basic.training_mean,
                clustered_training: clustered.training_mean,
            });
        }

        let col = |f: fn(&TrialRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let pairs: [(&str, Vec<f64>, Vec<f64>); 3] = [
            ("clustered_vs_basic", col(|r| r.clustered), col(|r| r.basic)),
            ("basic_vs_basic_identical", col(|r| r.basic), col(|r| r.basic_identical)),
            (
                "clustered_vs_clustered_identical",
                col(|r| r.clustered),
                col(|r| r.clustered_identical),
            ),
        ];
        let comparisons: Vec<Comparison> = pairs
            .iter()
            .map(|(name, a, b)| Comparison {
                name: name.to_string(),
                wins: a.iter().zip(b).filter(|(x, y)| x <= y).count(),
                trials: a.len(),
                test: paired_compare(a, b).ok(),
            })
            .collect();
        let summary = TuneSummary {
            rows,
            comparisons,
            basic_params: basic_space.n_params(),
            clustered_params: clustered_space.n_params(),
        };
        self.write_tune(&summary, &runs, &configs).stage(S)?;
        Ok(summary)
    }

    fn write_tune(&self, s: &TuneSummary, runs: &Table, configs: &Table) -> anyhow::Result<()> {
        let p = &self.provenance;
        let mut t = Table::new(&[
            "trial",
            "seed",
            "basic",
            "clustered",
            "basic_identical",
            "clustered_identical",
            "default",
            "basic_training",
            "clustered_training",
            "paired_seeds",
        ]);
        for r in &s.rows {
            t.push(vec![
                r.trial.to_string(),
                r.seed.to_string(),
                num(r.basic),
                num(r.clustered),
                num(r.basic_identical),
                num(r.clustered_identical),
                num(r.default),
                num(r.basic_training),
                num(r.clustered_training),
                "identical".into(),
            ]);
        }
        t.write(&self.out("tune/report.csv"), p)?;
        runs.write(&self.out("tune/runs.csv"), p)?;
        configs.write(&self.out("tune/configs.csv"), p)?;

        let mut t = Table::new(&[
            "comparison",
            "wins",
            "trials",
            "mean_diff",
            "t",
            "p_value",
            "degenerate",
        ]);
        for c in &s.comparisons {
            let (d, tv, pv, deg) = c.test.map_or((f64::NAN, f64::NAN, f64::NAN, String::new()), |x| {
                (x.mean_diff, x.t, x.p_value, u8::from(x.degenerate).to_string())
            });
            t.push(vec![
                c.name.clone(),
                c.wins.to_string(),
                c.trials.to_string(),
                num(d),
                num(tv),
                num(pv),
                deg,
            ]);
        }
        t.write(&self.out("tune/summary.csv"), p)?;

        let mut t = Table::new(&["space", "weight_params", "params"]);
        t.push(vec![
            "basic".into(),
            (s.basic_params - 2).to_string(),
            s.basic_params.to_string(),
        ]);
        t.push(vec![
            "clustered".into(),
            (s.clustered_params - 2).to_string(),
            s.clustered_params.to_string(),
        ]);
        t.write(&self.out("tune/spaces.csv"), p)?;

        let col = |f: fn(&TrialRow) -> f64| s.rows.iter().map(f).collect::<Vec<f64>>();
        let series = vec![
            ("basic".to_string(), col(|r| r.basic)),
            ("clustered".to_string(), col(|r| r.clustered)),
            ("basic, identical weights".to_string(), col(|r| r.basic_identical)),
            (
                "clustered, identical weights".to_string(),
                col(|r| r.clustered_identical),
            ),
        ];
        let defaults = col(|r| r.default);
        let default_mean = defaults.iter().sum::<f64>() / defaults.len().max(1) as f64;
        let svg = plot::render_boxplot(
            "held-out mean optimality gap per tuning trial",
            &series,
            Some(("default configuration", default_mean)),
            p,
        )?;
        write_text(&self.out("tune/boxplot.svg"), &svg)?;
        Ok(())
    }

    /// Every file below the output directory, relative path and contents,
    /// sorted by path.
    pub fn output_files(&self) -> anyhow::Result<Vec<(PathBuf, Vec<u8>)>> {
        let root = self.config.out_dir();
        let mut out = Vec::new();
        walk(&root, &root, &mut out)?;
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) -> anyhow::Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("below root").to_path_buf();
            out.push((rel, std::fs::read(&path)?));
        }
    }
    Ok(())
}
