//! Acceptance suite: one PASS/FAIL line per criterion on stderr.
//!
//! Run with `cargo test -p nbprofile --test acceptance`. Criterion 8 is
//! informational and never fails the test.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng as _;
use sha2::{Digest, Sha256};

use nbprofile::config::{Overrides, PipelineConfig};
use nbprofile::logfile::read_log;
use nbprofile::pipeline::Pipeline;
use nbprofile_core::aggregate::rra_score;
use nbprofile_core::cluster::{self, adjusted_rand_index, choose_best, ClusterOptions};
use nbprofile_core::features::{ilr, Composition3};
use nbprofile_core::frames::{group_frames, FrameError};
use nbprofile_core::rng;
use nbprofile_core::runlog::{IntervalGrid, QualityBounds};

// tolerances and limits
const GRID_RATIO_REL_TOL: f64 = 1e-9;
const GRID_END_TOL: f64 = 1e-7;
const RRA_EXACT_TOL: f64 = 1e-12;
const RRA_MC_TOL: f64 = 2e-3;
const RRA_MC_SAMPLES: usize = 1_000_000;
const ILR_ISOMETRY_TOL: f64 = 1e-9;
const ILR_ORIGIN_TOL: f64 = 1e-12;
const EM_MONOTONE_REL_TOL: f64 = 1e-9;
const MAX_RUN_SECS: f64 = 2.0;
const PIPELINE_SEEDS: u64 = 10;
const TUNE_SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
    /// Deterministic digest of everything the criterion produced.
    report: String,
}

fn say(line: &str) {
    // direct stderr writes are not captured by the test harness
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> (Outcome, Duration, bool) {
    let t = Instant::now();
    let o = f();
    let d = t.elapsed();
    (o, d, d <= limit)
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo.toml")
}

fn pipeline(seed: u64, out: &Path) -> Pipeline {
    let o = Overrides {
        seed: Some(seed),
        out: Some(out.to_path_buf()),
        ..Default::default()
    };
    let cfg = PipelineConfig::load(&demo_config()).unwrap().with_overrides(&o);
    Pipeline::new(cfg).unwrap()
}

fn digest_outputs(p: &Pipeline) -> String {
    let mut h = Sha256::new();
    for (path, bytes) in p.output_files().unwrap() {
        h.update(path.to_string_lossy().as_bytes());
        h.update(&bytes);
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn normal(rng: &mut rng::Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn criterion_1() -> Outcome {
    let g = IntervalGrid::new(QualityBounds::new(100.0, 0.0).unwrap(), 1000, 0.99).unwrap();
    let worst = (1..1000)
        .map(|i| ((g.width(i + 1) / g.width(i)) / 0.99 - 1.0).abs())
        .fold(0.0, f64::max);
    let end = (g.boundary(1000) - 0.0).abs();
    Outcome {
        pass: worst <= GRID_RATIO_REL_TOL && end <= GRID_END_TOL,
        detail: format!("max ratio deviation {worst:.2e}, |b_n - LB| = {end:.2e}"),
        report: format!("{:?}", g.boundaries()),
    }
}

/// One left-to-right grouping pass at slack `r`, in floating point.
fn single_pass(profile: &[u64], n_frames: usize, r: f64) -> usize {
    let total: f64 = profile.iter().map(|&a| a as f64).sum();
    let l = total / n_frames as f64 * (1.0 + r);
    let (mut frames, mut i) = (0, 0);
    while i < profile.len() {
        if profile[i] as f64 >= l {
            i += 1;
        } else {
            let mut sum = profile[i] as f64;
            i += 1;
            while i < profile.len() && sum + profile[i] as f64 <= l {
                sum += profile[i] as f64;
                i += 1;
            }
        }
        frames += 1;
    }
    frames
}

fn criterion_2() -> Outcome {
    let a = group_frames(&[5, 1, 1, 1, 100, 1, 1], 3).map(|s| s.ends().to_vec());
    let b = group_frames(&[30, 30, 30], 2).map(|s| s.ends().to_vec());
    let oracles = a == Ok(vec![4, 5, 7]) && b == Ok(vec![2, 3]);
    let mut rng = rng::seeded(2024);
    let mut bad = 0;
    let mut floor_cases = 0;
    let mut report = format!("{a:?} {b:?}\n");
    for _ in 0..1000 {
        let len = rng.random_range(1..=200usize);
        let mut profile: Vec<u64> = (0..len)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0
                } else {
                    rng.random_range(1..=1000)
                }
            })
            .collect();
        *profile.last_mut().unwrap() = rng.random_range(1..=1000);
        let n_frames = rng.random_range(1..=len.min(10));
        match group_frames(&profile, n_frames) {
            Ok(spec) => {
                let e = spec.ends();
                let ok =
                    e.len() == n_frames && e.last() == Some(&len) && e.windows(2).all(|w| w[0] < w[1]) && e[0] >= 1;
                bad += usize::from(!ok);
                report.push_str(&format!("{e:?}\n"));
            }
            // documented outcome when even the last pass at r = -0.95 is short
            Err(err @ FrameError::RFloorReached { .. }) if single_pass(&profile, n_frames, -0.95) < n_frames => {
                floor_cases += 1;
                report.push_str(&format!("{err}\n"));
            }
            Err(err) => {
                bad += 1;
                report.push_str(&format!("{err}\n"));
            }
        }
    }
    Outcome {
        pass: oracles && bad == 0,
        detail: format!(
            "hand-traced oracles {}, {bad}/1000 random profiles violate, {floor_cases} confirmed r-floor cases",
            if oracles { "match" } else { "differ" }
        ),
        report,
    }
}

/// `P(U_(k) <= p/q)` for `l` uniforms, as an exact fraction over `q^l`.
fn beta_exact(k: u32, l: u32, p: i128, q: i128) -> (i128, i128) {
    let binom = |n: u32, k: u32| (0..k).fold(1i128, |acc, i| acc * i128::from(n - i) / i128::from(i + 1));
    let num = (k..=l).map(|j| binom(l, j) * p.pow(j) * (q - p).pow(l - j)).sum();
    (num, q.pow(l))
}

fn rra_monte_carlo(ranks: &[f64], n_lists: usize, seed: u64) -> f64 {
    let mut padded = ranks.to_vec();
    padded.resize(n_lists, 1.0);
    padded.sort_by(f64::total_cmp);
    let mut rng = rng::seeded(seed);
    let mut hits = vec![0u64; n_lists];
    let mut u = vec![0.0; n_lists];
    for _ in 0..RRA_MC_SAMPLES {
        for x in &mut u {
            *x = rng.random::<f64>();
        }
        u.sort_by(f64::total_cmp);
        for k in 0..n_lists {
            hits[k] += u64::from(u[k] <= padded[k]);
        }
    }
    hits.iter()
        .map(|&h| h as f64 / RRA_MC_SAMPLES as f64)
        .fold(1.0, f64::min)
}

fn criterion_3() -> Outcome {
    let exact = (1..=3)
        .map(|k| {
            let (n, d) = beta_exact(k, 3, 1, 5);
            n as f64 / d as f64
        })
        .fold(1.0, f64::min);
    let rho = rra_score(&[0.2, 0.2, 0.2], 3).unwrap();
    let exact_ok = (exact - 0.008).abs() < RRA_EXACT_TOL && (rho - exact).abs() < RRA_EXACT_TOL;
    let mut rng = rng::seeded(77);
    let mut worst = 0.0f64;
    let mut report = format!("{rho}\n");
    for case in 0..20 {
        let n_lists = rng.random_range(1..=8usize);
        let n_ranks = rng.random_range(1..=n_lists);
        let ranks: Vec<f64> = (0..n_ranks).map(|_| rng.random_range(0.01..=1.0)).collect();
        let score = rra_score(&ranks, n_lists).unwrap();
        let mc = rra_monte_carlo(&ranks, n_lists, case);
        worst = worst.max((score - mc).abs());
        report.push_str(&format!("{ranks:?} {n_lists} {score} {mc}\n"));
    }
    Outcome {
        pass: exact_ok && worst < RRA_MC_TOL,
        detail: format!("rho = {rho}, max Monte-Carlo deviation {worst:.2e}"),
        report,
    }
}

fn criterion_4() -> Outcome {
    let closure = |v: [f64; 3]| {
        let s: f64 = v.iter().sum();
        v.map(|x| x / s)
    };
    let clr = |v: [f64; 3]| {
        let g = v.iter().map(|x| x.ln()).sum::<f64>() / 3.0;
        v.map(|x| x.ln() - g)
    };
    let mut rng = rng::seeded(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut draw = || closure([(); 3].map(|_| rng.random_range(1e-3..1.0)));
        let (a, b) = (draw(), draw());
        let za = ilr(&Composition3::new(a).unwrap(), 0.0).unwrap();
        let zb = ilr(&Composition3::new(b).unwrap(), 0.0).unwrap();
        let euclid = ((za.0 - zb.0).powi(2) + (za.1 - zb.1).powi(2)).sqrt();
        let (ca, cb) = (clr(a), clr(b));
        let aitchison = ca.iter().zip(&cb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        worst = worst.max((euclid - aitchison).abs());
    }
    let third = 1.0 / 3.0;
    let (z1, z2) = ilr(&Composition3::new([third; 3]).unwrap(), 0.0).unwrap();
    let origin = z1.abs().max(z2.abs());
    Outcome {
        pass: worst < ILR_ISOMETRY_TOL && origin < ILR_ORIGIN_TOL,
        detail: format!("max isometry error {worst:.2e}, uniform maps to {origin:.1e} from origin"),
        report: format!("{worst:e} {z1:e} {z2:e}"),
    }
}

/// Clusters on 2-dimensional random signal subspaces (sd 1) plus noise
/// (sd 0.3); centers pairwise `sep` apart, so `sep = 10` is 10 signal sd.
fn planted(seed: u64, n: usize, p: usize, k: usize, sep: f64) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = rng::seeded(seed);
    let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();
    let bases: Vec<DMatrix<f64>> = (0..k)
        .map(|_| DMatrix::from_fn(p, 2, |_, _| normal(&mut rng)).qr().q())
        .collect();
    let scale = sep / std::f64::consts::SQRT_2;
    let mut data = DMatrix::zeros(n, p);
    for i in 0..n {
        let c = labels[i];
        let s = [normal(&mut rng), normal(&mut rng)];
        for j in 0..p {
            let signal = bases[c][(j, 0)] * s[0] + bases[c][(j, 1)] * s[1];
            let center = if j == c { scale } else { 0.0 };
            data[(i, j)] = center + signal + 0.3 * normal(&mut rng);
        }
    }
    (data, labels)
}

fn monotone(trace: &[f64]) -> bool {
    trace
        .windows(2)
        .all(|w| w[1] >= w[0] - EM_MONOTONE_REL_TOL * w[0].abs())
}

fn criterion_5() -> Outcome {
    let opts = ClusterOptions::default();
    let mut hits = 0;
    let mut all_monotone = true;
    let mut report = String::new();
    for seed in 0..10 {
        let (data, labels) = planted(seed, 40, 20, 3, 10.0);
        let mut attempts = Vec::new();
        for k in 1..=6 {
            for s in [0, 1, 2] {
                let fit = cluster::fit(&data, k, s, &opts);
                if let Ok(m) = &fit {
                    all_monotone &= monotone(&m.ll_trace);
                }
                attempts.push((k, s, fit));
            }
        }
        let best = choose_best(attempts).unwrap().best;
        let ari = adjusted_rand_index(&best.assignments, &labels);
        hits += usize::from(best.k() == 3 && ari == 1.0);
        report.push_str(&format!("{seed} {} {ari} {}\n", best.k(), best.bic));
    }
    Outcome {
        pass: hits >= 9 && all_monotone,
        detail: format!(
            "K=3 with ARI 1 in {hits}/10 seeds, EM traces {}",
            if all_monotone { "non-decreasing" } else { "DECREASE" }
        ),
        report,
    }
}

fn criterion_6() -> Outcome {
    let mut rng = rng::seeded(6);
    let data = DMatrix::from_fn(10, 60, |i, j| {
        normal(&mut rng) + if i < 5 && j < 30 { 3.0 } else { 0.0 }
    });
    let res = cluster::select(&data, 1..=4, &[0, 1, 2], &ClusterOptions::default());
    let (pass, detail, report) = match res {
        Ok(sel) => {
            let m = &sel.best;
            let rows_ok = (0..10).all(|r| {
                let s: f64 = m.posteriors.row(r).iter().sum();
                (s - 1.0).abs() < 1e-9
            });
            let valid = m.assignments.len() == 10
                && m.assignments.iter().all(|&a| a < m.k())
                && m.log_likelihood.is_finite()
                && m.bic.is_finite()
                && rows_ok;
            (
                valid,
                format!("K={}, assignments {:?}", m.k(), m.assignments),
                format!("{:?} {}", m.assignments, m.bic),
            )
        }
        Err(e) => (false, format!("clustering failed: {e}"), e.to_string()),
    };
    Outcome { pass, detail, report }
}

fn criterion_7() -> Outcome {
    let mut together = 0;
    let mut problems = Vec::new();
    let mut report = String::new();
    let mut slowest = 0.0f64;
    for seed in 0..PIPELINE_SEEDS {
        let dir = tempfile::tempdir().unwrap();
        let p = pipeline(seed, dir.path());
        let c = p.collect().unwrap();
        slowest = slowest.max(c.max_run_secs);
        let a = p.analyze().unwrap();
        let figures = p.plot().unwrap().figures;
        for path in &c.log_paths {
            let log = read_log(path).unwrap();
            if log.run_count() != 10 {
                problems.push(format!(
                    "seed {seed}: {} has run_count {}",
                    path.display(),
                    log.run_count()
                ));
            }
            if !log.cells().all(|(_, _, cell)| cell.is_consistent()) {
                problems.push(format!("seed {seed}: counter invariant broken in {}", path.display()));
            }
        }
        let out = dir.path();
        for f in [
            "analysis/frames.csv",
            "analysis/features.csv",
            "analysis/clusters.csv",
            "analysis/bic.csv",
        ] {
            if !out.join(f).is_file() {
                problems.push(format!("seed {seed}: missing {f}"));
            }
        }
        if figures.len() != 3 * 12 || !figures.iter().all(|f| f.is_file() && f.with_extension("csv").is_file()) {
            problems.push(format!("seed {seed}: figures incomplete"));
        }
        let k = a.model().k();
        if !(2..=12).contains(&k) {
            problems.push(format!("seed {seed}: K={k}"));
        }
        let same = a.cluster_of("swap").is_some() && a.cluster_of("swap") == a.cluster_of("swap-b");
        together += usize::from(same);
        report.push_str(&format!("{seed} {} {}\n", k, digest_outputs(&p)));
    }
    if slowest > MAX_RUN_SECS {
        problems.push(format!("slowest run took {slowest:.2} s"));
    }
    Outcome {
        pass: problems.is_empty() && together >= 8,
        detail: format!(
            "swap copies share a cluster in {together}/{PIPELINE_SEEDS} seeds, slowest run {slowest:.3} s{}",
            if problems.is_empty() {
                String::new()
            } else {
                format!(", problems: {problems:?}")
            }
        ),
        report,
    }
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(TUNE_SEED, dir.path());
    p.collect().unwrap();
    p.analyze().unwrap();
    let s = p.tune().unwrap();
    let cvb = s.comparison("clustered_vs_basic").unwrap();
    let b_sr = s.comparison("basic_vs_basic_identical").unwrap();
    let c_sr = s.comparison("clustered_vs_clustered_identical").unwrap();
    let t = cvb.test.map_or(f64::NAN, |x| x.t);
    let pv = cvb.test.map_or(f64::NAN, |x| x.p_value);
    let report_has_t = std::fs::read_to_string(dir.path().join("tune/summary.csv"))
        .map(|text| text.contains(",t,"))
        .unwrap_or(false);
    let direction = cvb.wins >= 6;
    let baselines = b_sr.wins >= 7 && c_sr.wins >= 7;
    Outcome {
        pass: direction && baselines && report_has_t,
        detail: format!(
            "clustered <= basic in {}/{} trials (t = {t:.3}, p = {pv:.3}); basic beats its identical-weights version in {}/{}, clustered in {}/{}; spaces {} vs {} parameters",
            cvb.wins, cvb.trials, b_sr.wins, b_sr.trials, c_sr.wins, c_sr.trials, s.basic_params, s.clustered_params
        ),
        report: digest_outputs(&p),
    }
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

const CRITERIA: [Criterion; 8] = [
    (1, "grid geometry", Duration::from_secs(1), criterion_1),
    (2, "frame grouping", Duration::from_secs(5), criterion_2),
    (3, "rank aggregation", Duration::from_secs(30), criterion_3),
    (4, "ILR isometry", Duration::from_secs(1), criterion_4),
    (5, "planted cluster recovery", Duration::from_secs(60), criterion_5),
    (6, "wide feature matrix", Duration::from_secs(30), criterion_6),
    (7, "end-to-end pipeline", Duration::from_secs(600), criterion_7),
    (
        8,
        "tuning analogue (informational)",
        Duration::from_secs(1800),
        criterion_8,
    ),
];

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    let mut reports = Vec::new();
    for (id, name, limit, f) in CRITERIA {
        let (o, took, in_time) = timed(limit, f);
        let pass = o.pass && in_time;
        let verdict = match (pass, id == 8) {
            (true, _) => "PASS",
            (false, true) => "FAIL (informational, not asserted)",
            (false, false) => "FAIL",
        };
        say(&format!(
            "criterion {id} [{name}]: {verdict} | {} | {:.2} s (limit {} s)",
            o.detail,
            took.as_secs_f64(),
            limit.as_secs()
        ));
        if !pass && id != 8 {
            failed.push(id);
        }
        reports.push((id, o.report));
    }

    let t = Instant::now();
    let mut differing = Vec::new();
    for (id, _, _, f) in CRITERIA.iter().filter(|c| c.0 >= 2) {
        let again = f().report;
        let first = &reports.iter().find(|r| r.0 == *id).unwrap().1;
        if &again != first {
            differing.push(*id);
        }
    }
    let pass = differing.is_empty();
    say(&format!(
        "criterion 9 [determinism]: {} | reports of criteria 2-8 {} on rerun | {:.2} s",
        if pass { "PASS" } else { "FAIL" },
        if pass {
            "byte-identical".to_string()
        } else {
            format!("differ for {differing:?}")
        },
        t.elapsed().as_secs_f64()
    ));
    if !pass {
        failed.push(9);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
