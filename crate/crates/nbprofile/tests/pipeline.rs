use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nbprofile::config::PipelineConfig;
use nbprofile::instances::{bound_path, format_instance};
use nbprofile::logfile::read_log;
use nbprofile::pipeline::{Pipeline, PipelineError};
use nbprofile::report::read_table;
use nbprofile_core::search::generate_instance;

fn write_instances(dir: &Path, sizes: &[usize]) {
    for (i, &n) in sizes.iter().enumerate() {
        let inst = generate_instance(format!("t{n}"), n, 20, 40 + i as u64).unwrap();
        std::fs::write(dir.join(format!("t{n}.txt")), format_instance(&inst)).unwrap();
    }
}

fn config(dir: &Path, sizes: &[usize], extra: &str) -> PipelineConfig {
    let paths: Vec<String> = sizes.iter().map(|n| format!("\"t{n}.txt\"")).collect();
    let text = format!(
        "seed = 3\nout = \"out\"\n[instances]\npaths = [{}]\nreference_iterations = 20000\n\
         [grid]\nn_intervals = 200\n[collect]\nruns = 5\niterations = 3000\n{extra}",
        paths.join(", ")
    );
    PipelineConfig::parse(&text, dir).unwrap()
}

fn setup(sizes: &[usize], extra: &str) -> (tempfile::TempDir, Pipeline) {
    let dir = tempfile::tempdir().unwrap();
    write_instances(dir.path(), sizes);
    let p = Pipeline::new(config(dir.path(), sizes, extra)).unwrap();
    (dir, p)
}

#[test]
fn collect_merges_runs_per_instance() {
    let (dir, p) = setup(&[8, 10], "");
    let s = p.collect().unwrap();
    assert_eq!(s.log_paths.len(), 2);
    assert_eq!(s.runs.len(), 20);
    for path in &s.log_paths {
        let log = read_log(path).unwrap();
        assert_eq!(log.run_count(), 10);
        assert_eq!(log.total_iters(), 10 * 3000);
        assert!(log.cells().all(|(_, _, c)| c.is_consistent()));
    }
    // the reference-run bound is cached next to the instance
    assert!(bound_path(&dir.path().join("t8.txt")).is_file());
}

#[test]
fn zero_runs_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    write_instances(dir.path(), &[6]);
    let mut cfg = config(dir.path(), &[6], "");
    cfg.collect.runs = 0;
    let err = Pipeline::new(cfg).unwrap().collect().unwrap_err();
    assert!(matches!(err, PipelineError::Data { stage: "collect", .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn stages_report_missing_inputs() {
    let (_dir, p) = setup(&[6], "");
    let err = p.analyze().unwrap_err();
    assert!(err.to_string().starts_with("analyze:"), "{err}");
    assert!(p.plot().unwrap_err().to_string().starts_with("plot:"));
    let err = p.tune().unwrap_err();
    assert!(err.to_string().contains("run analyze first"), "{err}");
}

#[test]
fn reruns_are_byte_identical() {
    let (_dir, p) = setup(&[8, 10], "");
    p.collect().unwrap();
    p.analyze().unwrap();
    p.plot().unwrap();
    let first = p.output_files().unwrap();
    p.collect().unwrap();
    p.analyze().unwrap();
    p.plot().unwrap();
    assert_eq!(first, p.output_files().unwrap());
}

fn features(p: &Pipeline) -> BTreeMap<String, Vec<String>> {
    let (header, rows) = read_table(&p.config().out_dir().join("analysis/features.csv")).unwrap();
    header
        .iter()
        .enumerate()
        .skip(1)
        .map(|(c, h)| (h.clone(), rows.iter().map(|r| r[c].clone()).collect()))
        .collect()
}

#[test]
fn analysis_outputs_and_column_locality() {
    let (dir, p) = setup(&[8, 10, 12], "");
    p.collect().unwrap();
    let a = p.analyze().unwrap();
    assert!((2..=12).contains(&a.model().k()));
    assert_eq!(a.clusters.len(), p.roster().len());
    let all = features(&p);
    assert_eq!(all.len(), 3 * 5 * 4);

    // dropping an instance leaves the other instances' columns untouched
    let mut cfg = config(dir.path(), &[8, 12], "");
    cfg.out = "out-two".into();
    let p2 = Pipeline::new(cfg).unwrap();
    p2.collect().unwrap();
    p2.analyze().unwrap();
    let two = features(&p2);
    assert_eq!(two.len(), 2 * 5 * 4);
    for (label, col) in &two {
        assert_eq!(all.get(label), Some(col), "{label}");
    }
    assert!(all.keys().filter(|k| k.contains("t10")).count() == 20);
}

#[test]
fn one_frame_collapses_features() {
    let (_dir, p) = setup(&[8, 10], "[frames]\nn_frames = 1\n");
    p.collect().unwrap();
    let a = p.analyze().unwrap();
    assert!(a.frames.iter().all(|(_, s)| s.n_frames() == 1));
    assert_eq!(a.features.n_cols(), 2 * 4);
}

#[test]
fn plot_writes_figures_with_tables() {
    let (_dir, p) = setup(&[8], "");
    p.collect().unwrap();
    // frames are optional
    let s = p.plot().unwrap();
    assert_eq!(s.figures.len(), 1 + p.roster().len());
    p.analyze().unwrap();
    p.plot().unwrap();
    let out = p.config().out_dir().join("plots/t8");
    let (_, rows) = read_table(&out.join("activity.csv")).unwrap();
    let marked = rows.iter().filter(|r| r[2] == "1").count();
    assert_eq!(marked, 5);
    let (_, rows) = read_table(&out.join("swap.csv")).unwrap();
    assert_eq!(rows[0][0], "1");
}

#[test]
fn tune_pairs_seeds_across_series() {
    let extra = "[tune]\nbudget_runs = 6\ntrials = 2\neval_runs = 2\niterations = 1000\n";
    let (_dir, p) = setup(&[8, 10], extra);
    p.collect().unwrap();
    p.analyze().unwrap();
    let s = p.tune().unwrap();
    assert_eq!(s.rows.len(), 2);
    assert_eq!(s.basic_params, p.roster().len() + 2);
    let out = p.config().out_dir();
    let (header, _) = read_table(&out.join("tune/report.csv")).unwrap();
    for series in [
        "basic",
        "clustered",
        "basic_identical",
        "clustered_identical",
        "default",
    ] {
        assert!(header.iter().any(|h| h == series), "{series}");
    }
    let (_, runs) = read_table(&out.join("tune/runs.csv")).unwrap();
    let mut seeds: BTreeMap<(String, String), BTreeSet<(String, String)>> = BTreeMap::new();
    for r in &runs {
        seeds
            .entry((r[0].clone(), r[1].clone()))
            .or_default()
            .insert((r[2].clone(), r[3].clone()));
    }
    for trial in ["0", "1"] {
        let sets: Vec<_> = seeds.iter().filter(|((t, _), _)| t == trial).map(|(_, v)| v).collect();
        assert_eq!(sets.len(), 5);
        assert!(sets.iter().all(|s| *s == sets[0] && s.len() == 4));
    }
    let (_, summary) = read_table(&out.join("tune/summary.csv")).unwrap();
    assert_eq!(summary.len(), 3);
}

#[test]
fn every_output_carries_provenance() {
    let extra = "[tune]\nbudget_runs = 4\ntrials = 2\neval_runs = 1\niterations = 500\n";
    let (_dir, p) = setup(&[8], extra);
    p.collect().unwrap();
    p.analyze().unwrap();
    p.plot().unwrap();
    p.tune().unwrap();
    let stamp = format!("config={} seed=3", p.provenance().config_hash);
    let files = p.output_files().unwrap();
    assert!(files.len() > 20);
    for (path, bytes) in files {
        let first = String::from_utf8_lossy(&bytes)
            .lines()
            .next()
            .unwrap_or_default()
            .to_string();
        assert!(first.contains(&stamp), "{}: {first}", path.display());
    }
}
