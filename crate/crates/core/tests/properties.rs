use nbprofile_core::aggregate::{frame_ratios, rra_score};
use nbprofile_core::features::{ilr, Composition3};
use nbprofile_core::frames::{group_frames, FrameError, FrameSpec};
use nbprofile_core::runlog::{merge_logs, CellStats, IntervalGrid, QualityBounds, RunLog};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = IntervalGrid> {
    (1.0f64..1e6, 0.0f64..1e6, 1usize..1500, 0.5f64..=1.0).prop_filter_map("widths underflow", |(span, lb, n, q)| {
        IntervalGrid::new(QualityBounds::new(lb + span, lb).unwrap(), n, q).ok()
    })
}

proptest! {
    #[test]
    fn widths_sum_to_span(g in grid_strategy()) {
        let total: f64 = (1..=g.n_intervals()).map(|i| g.width(i)).sum();
        let span = g.bounds().span();
        prop_assert!((total - span).abs() <= 1e-9 * span);
        for i in 1..=g.n_intervals() {
            prop_assert!(g.width(i) > 0.0);
        }
    }

    #[test]
    fn lookup_is_monotone_and_routes_agree(g in grid_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let bounds = g.bounds();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let cheap = bounds.lower() + lo * bounds.span();
        let dear = bounds.lower() + hi * bounds.span();
        prop_assert!(g.interval_of(cheap).unwrap() >= g.interval_of(dear).unwrap());
        for cost in [cheap, dear] {
            let i = g.interval_of(cost).unwrap();
            prop_assert!((1..=g.n_intervals()).contains(&i));
            prop_assert!(g.boundary(i) <= cost || i == g.n_intervals());
            prop_assert!(cost <= g.boundary(i - 1) || i == 1);
            // the closed form may land one cell off right at a boundary
            let j = g.interval_of_closed_form(cost).unwrap();
            prop_assert!(i.abs_diff(j) <= 1, "{i} vs {j}");
        }
    }
}

fn random_log(seed: u64, n_nbh: usize, grid: &IntervalGrid) -> RunLog {
    use rand::Rng;
    let mut rng = nbprofile_core::rng::seeded(seed);
    let ids = (0..n_nbh).map(|i| format!("n{i}")).collect();
    let mut log = RunLog::empty("inst", grid.clone(), ids);
    log.set_run_count(1);
    for nbh in 0..n_nbh {
        for interval in 1..=grid.n_intervals() {
            if rng.random_bool(0.4) {
                continue;
            }
            let (i, s, w) = (
                rng.random_range(0..20),
                rng.random_range(0..20),
                rng.random_range(0..20),
            );
            *log.cell_mut(nbh, interval) = CellStats {
                n_iters: i + s + w,
                n_improve: i,
                n_nothing: s,
                n_worsen: w,
                s_improve: if i > 0 { rng.random::<f64>() * 3.7 } else { 0.0 },
                s_worsen: if w > 0 { rng.random::<f64>() * 1e3 } else { 0.0 },
                s_time_ns: rng.random_range(0..10_000),
            };
        }
    }
    log
}

fn small_grid() -> IntervalGrid {
    IntervalGrid::new(QualityBounds::new(50.0, 10.0).unwrap(), 12, 0.9).unwrap()
}

proptest! {
    #[test]
    fn merge_ignores_order(seed in any::<u64>(), perm_seed in any::<u64>(), n in 1usize..6) {
        use rand::seq::SliceRandom;
        let grid = small_grid();
        let logs: Vec<RunLog> = (0..n).map(|k| random_log(seed.wrapping_add(k as u64), 3, &grid)).collect();
        let mut shuffled = logs.clone();
        shuffled.shuffle(&mut nbprofile_core::rng::seeded(perm_seed));
        let a = merge_logs(&logs).unwrap();
        let b = merge_logs(&shuffled).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.cells().all(|(_, _, c)| c.is_consistent()));
        prop_assert_eq!(a.run_count(), n as u64);
    }

    #[test]
    fn ratios_commute_with_merging(seed in any::<u64>(), n in 2usize..5, n_frames in 1usize..4) {
        let grid = small_grid();
        let logs: Vec<RunLog> = (0..n).map(|k| random_log(seed.wrapping_add(k as u64), 3, &grid)).collect();
        let whole = merge_logs(&logs).unwrap();
        let split_then_merged = merge_logs(&[merge_logs(&logs[..1]).unwrap(), merge_logs(&logs[1..]).unwrap()]).unwrap();
        let activity = whole.activity();
        let last = activity.iter().rposition(|&a| a > 0).unwrap();
        prop_assume!(n_frames <= last + 1);
        let Ok(spec) = group_frames(&activity[..=last], n_frames) else { return Ok(()) };
        prop_assert_eq!(frame_ratios(&whole, &spec).unwrap(), frame_ratios(&split_then_merged, &spec).unwrap());
    }
}

fn profile_strategy() -> impl Strategy<Value = (Vec<u64>, usize)> {
    prop::collection::vec(
        prop_oneof![3 => 0u64..1000, 1 => Just(0u64), 1 => 0u64..1_000_000],
        1..60,
    )
    .prop_filter_map("needs a nonzero tail", |mut v| {
        let last = v.iter().rposition(|&a| a > 0)?;
        v.truncate(last + 1);
        Some(v)
    })
    .prop_flat_map(|v| {
        let n = v.len();
        (Just(v), 1..=n.min(8))
    })
}

/// One pass of the grouping scan at slack `r`, in floating point.
fn single_pass(profile: &[u64], n_frames: usize, r: f64) -> Vec<usize> {
    let total: f64 = profile.iter().map(|&a| a as f64).sum();
    let l = total / n_frames as f64 * (1.0 + r);
    let mut ends = Vec::new();
    let mut i = 0;
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
        ends.push(i);
    }
    ends
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn frames_partition_the_axis((profile, n_frames) in profile_strategy(), scale in 1u64..1000) {
        match group_frames(&profile, n_frames) {
            Ok(spec) => {
                let ends = spec.ends();
                prop_assert_eq!(ends.len(), n_frames);
                prop_assert_eq!(*ends.last().unwrap(), profile.len());
                prop_assert!(ends.windows(2).all(|w| w[0] < w[1]));
                let scaled: Vec<u64> = profile.iter().map(|&a| a * scale).collect();
                prop_assert_eq!(group_frames(&scaled, n_frames).unwrap(), spec.clone());
                let first = single_pass(&profile, n_frames, 0.05);
                if first.len() == n_frames {
                    prop_assert_eq!(ends, &first[..]);
                }
            }
            Err(e) => {
                // giving up is only allowed when even the lowest threshold
                // leaves too few frames
                prop_assert_eq!(e, FrameError::RFloorReached { n_frames });
                prop_assert!(single_pass(&profile, n_frames, -0.95).len() < n_frames);
            }
        }
    }

    #[test]
    fn frame_of_inverts_ends((profile, n_frames) in profile_strategy()) {
        let Ok(spec) = group_frames(&profile, n_frames) else { return Ok(()) };
        for f in 1..=spec.n_frames() {
            for i in spec.intervals(f) {
                prop_assert_eq!(spec.frame_of(i).unwrap(), f);
            }
        }
        let rebuilt = FrameSpec::from_ends(spec.ends().to_vec()).unwrap();
        prop_assert_eq!(rebuilt, spec);
    }

    #[test]
    fn rra_is_monotone(ranks in prop::collection::vec(0.001f64..=1.0, 1..8), extra in 0usize..4, idx in any::<prop::sample::Index>(), bump in 0.0f64..1.0) {
        let n_lists = ranks.len() + extra;
        let base = rra_score(&ranks, n_lists).unwrap();
        let mut worse = ranks.clone();
        let i = idx.index(worse.len());
        worse[i] += (1.0 - worse[i]) * bump;
        let after = rra_score(&worse, n_lists).unwrap();
        prop_assert!(after >= base - 1e-15, "{base} -> {after}");
        prop_assert!(base > 0.0 && base <= 1.0);
    }
}

fn closure(v: [f64; 3]) -> [f64; 3] {
    let s: f64 = v.iter().sum();
    v.map(|x| x / s)
}

/// Aitchison distance through centered log-ratios.
fn aitchison(a: [f64; 3], b: [f64; 3]) -> f64 {
    let clr = |v: [f64; 3]| {
        let g = v.iter().map(|x| x.ln()).sum::<f64>() / 3.0;
        v.map(|x| x.ln() - g)
    };
    let (ca, cb) = (clr(a), clr(b));
    ca.iter().zip(&cb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ilr_is_an_isometry(a in prop::array::uniform3(1e-3f64..1.0), b in prop::array::uniform3(1e-3f64..1.0)) {
        let (a, b) = (closure(a), closure(b));
        let (za, zb) = (
            ilr(&Composition3::new(a).unwrap(), 0.0).unwrap(),
            ilr(&Composition3::new(b).unwrap(), 0.0).unwrap(),
        );
        let euclid = ((za.0 - zb.0).powi(2) + (za.1 - zb.1).powi(2)).sqrt();
        prop_assert!((euclid - aitchison(a, b)).abs() < 1e-9);
    }

    #[test]
    fn only_the_barycenter_maps_to_origin(a in prop::array::uniform3(1e-3f64..1.0)) {
        let a = closure(a);
        let (z1, z2) = ilr(&Composition3::new(a).unwrap(), 0.0).unwrap();
        let uniform = a.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-9);
        prop_assert_eq!(z1.abs() < 1e-12 && z2.abs() < 1e-12, uniform);
    }
}

#[test]
fn barycenter_is_origin() {
    let third = 1.0 / 3.0;
    let (z1, z2) = ilr(&Composition3::new([third, third, third]).unwrap(), 0.0).unwrap();
    assert!(z1.abs() < 1e-12 && z2.abs() < 1e-12);
}
