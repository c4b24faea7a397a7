//! Per-frame observables from per-interval counters.
//!
//! Improve/worsen/nothing probabilities are plain ratios of counts summed
//! over a frame. Magnitudes are not comparable across intervals, so each
//! interval ranks the neighborhoods by average magnitude and the ranks of a
//! frame are combined with an order-statistic score: for sorted normalized
//! ranks `r_(1) <= … <= r_(L)`,
//!
//! ```text
//! rho = min_k  P(U_(k) <= r_(k))  =  min_k  Σ_{l=k..L} C(L,l) r_(k)^l (1 - r_(k))^(L-l)
//! ```
//!
//! where `U_(k)` is the k-th order statistic of `L` uniforms. Small `rho`
//! means a neighborhood ranks near the top more consistently than chance.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::frames::{trim_empty_tail, FrameSpec};
use crate::math;
use crate::runlog::{CellStats, RunLog};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregateError {
    #[error("frame spec covers {spec} intervals but the trimmed log has {log}")]
    AxisMismatch { spec: usize, log: usize },
    #[error("log has no activity")]
    EmptyLog,
    #[error("rank {0} outside (0, 1]")]
    RankOutOfRange(f64),
    #[error("{ranks} ranks supplied for {lists} lists")]
    TooManyRanks { ranks: usize, lists: usize },
    #[error("list count must be at least 1")]
    NoLists,
    #[error("frame has no ranked lists")]
    EmptyFrame,
}

/// Probabilities of improving, worsening and doing nothing within a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRatios {
    pub improve: f64,
    pub worsen: f64,
    pub nothing: f64,
    /// Applications summed over the frame.
    pub n_iters: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagnitudeKind {
    Improve,
    Worsen,
}

impl MagnitudeKind {
    pub const ALL: [MagnitudeKind; 2] = [MagnitudeKind::Improve, MagnitudeKind::Worsen];

    fn sum(self, cell: &CellStats) -> f64 {
        match self {
            MagnitudeKind::Improve => cell.s_improve,
            MagnitudeKind::Worsen => cell.s_worsen,
        }
    }
}

/// Trimmed interval count of a log (last interval with any activity).
pub fn trimmed_len(log: &RunLog) -> Result<usize, AggregateError> {
    let activity = log.activity();
    trim_empty_tail(&activity)
        .map(<[u64]>::len)
        .map_err(|_| AggregateError::EmptyLog)
}

fn check_axis(log: &RunLog, spec: &FrameSpec) -> Result<(), AggregateError> {
    let log_len = trimmed_len(log)?;
    if log_len != spec.n_intervals() {
        return Err(AggregateError::AxisMismatch {
            spec: spec.n_intervals(),
            log: log_len,
        });
    }
    Ok(())
}

/// Ratios per `[neighborhood][frame - 1]`; `None` where the neighborhood was
/// never applied inside the frame.
pub fn frame_ratios(log: &RunLog, spec: &FrameSpec) -> Result<Vec<Vec<Option<FrameRatios>>>, AggregateError> {
    check_axis(log, spec)?;
    let out = (0..log.n_neighborhoods())
        .map(|nbh| {
            (1..=spec.n_frames())
                .map(|f| {
                    let mut total = CellStats::default();
                    for interval in spec.intervals(f) {
                        let c = log.cell(nbh, interval);
                        total.n_iters += c.n_iters;
                        total.n_improve += c.n_improve;
                        total.n_worsen += c.n_worsen;
                        total.n_nothing += c.n_nothing;
                    }
                    (total.n_iters > 0).then(|| {
                        let n = total.n_iters as f64;
                        FrameRatios {
                            improve: total.n_improve as f64 / n,
                            worsen: total.n_worsen as f64 / n,
                            nothing: total.n_nothing as f64 / n,
                            n_iters: total.n_iters,
                        }
                    })
                })
                .collect()
        })
        .collect();
    Ok(out)
}

/// Neighborhoods applied in one interval, best (largest average magnitude)
/// first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankList {
    pub interval: usize,
    /// Neighborhood positions, best first.
    pub order: Vec<usize>,
    /// Normalization universe `m` (total neighborhood count).
    pub universe: usize,
}

impl RankList {
    /// Normalized rank `position / m` of a neighborhood, if listed.
    pub fn normalized_rank(&self, nbh: usize) -> Option<f64> {
        self.order
            .iter()
            .position(|&n| n == nbh)
            .map(|p| (p + 1) as f64 / self.universe as f64)
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Orders two applied cells: larger average magnitude first, then smaller
/// average time, then lower position.
fn rank_cmp(kind: MagnitudeKind, (ia, a): (usize, &CellStats), (ib, b): (usize, &CellStats)) -> Ordering {
    let avg_a = kind.sum(a) / a.n_iters as f64;
    let avg_b = kind.sum(b) / b.n_iters as f64;
    avg_b
        .total_cmp(&avg_a)
        .then_with(|| {
            // s_time_a / n_a  vs  s_time_b / n_b
            let lhs = u128::from(a.s_time_ns) * u128::from(b.n_iters);
            let rhs = u128::from(b.s_time_ns) * u128::from(a.n_iters);
            lhs.cmp(&rhs)
        })
        .then(ia.cmp(&ib))
}

/// One rank list per interval `1..=n_intervals` of the log.
pub fn interval_rank_lists(log: &RunLog, kind: MagnitudeKind) -> Vec<RankList> {
    (1..=log.n_intervals())
        .map(|interval| {
            let mut applied: Vec<(usize, &CellStats)> = (0..log.n_neighborhoods())
                .map(|nbh| (nbh, log.cell(nbh, interval)))
                .filter(|(_, c)| c.n_iters > 0)
                .collect();
            applied.sort_by(|&a, &b| rank_cmp(kind, a, b));
            RankList {
                interval,
                order: applied.into_iter().map(|(nbh, _)| nbh).collect(),
                universe: log.n_neighborhoods(),
            }
        })
        .collect()
}

/// `P(U_(k) <= r)` for the k-th of `n` uniform order statistics, i.e. the
/// upper tail `P(Binomial(n, r) >= k)`.
pub fn order_statistic_cdf(k: usize, n: usize, r: f64) -> f64 {
    debug_assert!(k >= 1 && k <= n);
    if r >= 1.0 {
        return 1.0;
    }
    if r <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let mode = nf * r;
    let binomial_term = |l: usize| {
        let lf = l as f64;
        let ln_choose = math::ln_gamma(nf + 1.0) - math::ln_gamma(lf + 1.0) - math::ln_gamma(nf - lf + 1.0);
        math::exp(ln_choose + lf * math::ln(r) + (nf - lf) * math::ln_1p(-r))
    };
    // Sum whichever tail lies away from the mode so the starting term is the
    // largest one and the recurrence only shrinks.
    if (k as f64) > mode {
        let odds = r / (1.0 - r);
        let mut term = binomial_term(k);
        let mut sum = 0.0;
        for l in k..=n {
            sum += term;
            if l == n || term <= sum * 1e-17 {
                break;
            }
            term *= (nf - l as f64) / (l as f64 + 1.0) * odds;
        }
        sum.min(1.0)
    } else {
        let inv_odds = (1.0 - r) / r;
        let mut term = binomial_term(k - 1);
        let mut lower = 0.0;
        for l in (0..k).rev() {
            lower += term;
            if l == 0 || term <= lower * 1e-17 {
                break;
            }
            term *= l as f64 / (nf - l as f64 + 1.0) * inv_odds;
        }
        (1.0 - lower).clamp(0.0, 1.0)
    }
}

/// Rank-aggregation score of one item seen in `n_lists` lists.
///
/// `ranks` holds the item's normalized ranks in the lists where it appears;
/// the remaining `n_lists - ranks.len()` lists count as rank 1.0.
pub fn rra_score(ranks: &[f64], n_lists: usize) -> Result<f64, AggregateError> {
    if n_lists == 0 {
        return Err(AggregateError::NoLists);
    }
    if ranks.len() > n_lists {
        return Err(AggregateError::TooManyRanks {
            ranks: ranks.len(),
            lists: n_lists,
        });
    }
    if let Some(&bad) = ranks.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(AggregateError::RankOutOfRange(bad));
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    // padded ranks of 1.0 contribute beta = 1
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &r)| order_statistic_cdf(i + 1, n_lists, r))
        .fold(1.0, f64::min))
}

/// Scores of every neighborhood across the lists of one frame. Lists without
/// entries carry no information and are skipped.
pub fn aggregate_magnitudes(lists: &[&RankList], n_neighborhoods: usize) -> Result<Vec<f64>, AggregateError> {
    let informative: Vec<&RankList> = lists.iter().copied().filter(|l| !l.is_empty()).collect();
    if informative.is_empty() {
        return Err(AggregateError::EmptyFrame);
    }
    let mut ranks = vec![Vec::new(); n_neighborhoods];
    for list in &informative {
        for (pos, &nbh) in list.order.iter().enumerate() {
            ranks[nbh].push((pos + 1) as f64 / list.universe as f64);
        }
    }
    ranks.iter().map(|r| rra_score(r, informative.len())).collect()
}

/// Scores per `[neighborhood][frame - 1]` for one magnitude kind. A frame
/// with no activity at all scores 1.0 for everyone.
pub fn frame_scores(log: &RunLog, spec: &FrameSpec, kind: MagnitudeKind) -> Result<Vec<Vec<f64>>, AggregateError> {
    check_axis(log, spec)?;
    let lists = interval_rank_lists(log, kind);
    let m = log.n_neighborhoods();
    let mut out = vec![vec![1.0; spec.n_frames()]; m];
    for f in 1..=spec.n_frames() {
        let frame_lists: Vec<&RankList> = spec.intervals(f).map(|i| &lists[i - 1]).collect();
        match aggregate_magnitudes(&frame_lists, m) {
            Ok(scores) => {
                for (nbh, s) in scores.into_iter().enumerate() {
                    out[nbh][f - 1] = s;
                }
            }
            Err(AggregateError::EmptyFrame) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
