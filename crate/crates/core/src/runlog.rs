//! Interval geometry over the cost axis and the per-cell counter model.
//!
//! The range between a worst reference cost (upper bound) and a best known
//! cost (lower bound) is cut into `n` intervals whose widths shrink
//! geometrically towards the lower bound. Interval `1` touches the upper
//! bound, interval `n` the lower bound.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Default interval count used for collection.
pub const DEFAULT_INTERVALS: usize = 1000;
/// Default ratio between consecutive interval widths.
pub const DEFAULT_DECAY: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("bounds must be finite with upper > lower (got upper={upper}, lower={lower})")]
    InvalidBounds { upper: f64, lower: f64 },
    #[error("decay must lie in (0, 1], got {0}")]
    InvalidDecay(f64),
    #[error("interval count must be at least 1")]
    NoIntervals,
    #[error("interval widths underflow; use fewer intervals or a decay nearer 1")]
    Underflow,
    #[error("cost must be finite, got {0}")]
    NonFiniteCost(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error("nothing to merge")]
    Empty,
    #[error("instance mismatch: `{0}` vs `{1}`")]
    Instance(String, String),
    #[error("grid parameters differ between logs")]
    Grid,
    #[error("neighborhood lists differ between logs")]
    Neighborhoods,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityBounds {
    upper: f64,
    lower: f64,
}

impl QualityBounds {
    pub fn new(upper: f64, lower: f64) -> Result<Self, GridError> {
        if !upper.is_finite() || !lower.is_finite() || upper <= lower {
            return Err(GridError::InvalidBounds { upper, lower });
        }
        Ok(Self { upper, lower })
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn span(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Exponentially shrinking partition of `[lower, upper]`.
///
/// Boundaries are held as offsets above the lower bound so that the fine
/// intervals near the lower bound keep full relative precision even when
/// the bounds themselves are large.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGrid {
    bounds: QualityBounds,
    decay: f64,
    // offsets[i] = b_i - lower, i = 0..=n, strictly descending, offsets[n] = 0
    offsets: Vec<f64>,
}

impl IntervalGrid {
    pub fn new(bounds: QualityBounds, n_intervals: usize, decay: f64) -> Result<Self, GridError> {
        if n_intervals == 0 {
            return Err(GridError::NoIntervals);
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(GridError::InvalidDecay(decay));
        }
        let span = bounds.span();
        let n = n_intervals as i32;
        let offsets = (0..=n)
            .map(|i| {
                if decay == 1.0 {
                    span * f64::from(n - i) / f64::from(n)
                } else {
                    // span * q^i (1 - q^(n-i)) / (1 - q^n)
                    span * math::powi(decay, i) * (1.0 - math::powi(decay, n - i)) / (1.0 - math::powi(decay, n))
                }
            })
            .collect::<Vec<f64>>();
        if offsets.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(GridError::Underflow);
        }
        Ok(Self { bounds, decay, offsets })
    }

    pub fn bounds(&self) -> QualityBounds {
        self.bounds
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn n_intervals(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Boundary `b_i` for `i` in `0..=n`.
    pub fn boundary(&self, i: usize) -> f64 {
        if i == self.n_intervals() {
            self.bounds.lower
        } else {
            self.bounds.lower + self.offsets[i]
        }
    }

    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.n_intervals()).map(|i| self.boundary(i)).collect()
    }

    /// Width of interval `i` (1-based).
    pub fn width(&self, i: usize) -> f64 {
        self.offsets[i - 1] - self.offsets[i]
    }

    /// Interval index in `1..=n` holding `cost`, with `b_i < cost <= b_{i-1}`.
    /// Costs outside the bounds clamp to the end intervals.
    pub fn interval_of(&self, cost: f64) -> Result<usize, GridError> {
        if !cost.is_finite() {
            return Err(GridError::NonFiniteCost(cost));
        }
        let offset = cost - self.bounds.lower;
        let n = self.n_intervals();
        // number of boundaries b_1..b_n that are >= cost
        let above = self.offsets[1..].partition_point(|&b| offset <= b);
        Ok((above + 1).min(n))
    }

    /// Closed-form inverse of the boundary formula; agrees with
    /// [`interval_of`](Self::interval_of) up to floating rounding right at a
    /// boundary.
    pub fn interval_of_closed_form(&self, cost: f64) -> Result<usize, GridError> {
        if !cost.is_finite() {
            return Err(GridError::NonFiniteCost(cost));
        }
        let n = self.n_intervals();
        let frac = (cost - self.bounds.lower) / self.bounds.span();
        if frac >= 1.0 {
            return Ok(1);
        }
        if frac <= 0.0 {
            return Ok(n);
        }
        // largest real i with offset_i >= frac * span, then interval = floor(i) + 1
        let x = if self.decay == 1.0 {
            n as f64 * (1.0 - frac)
        } else {
            let q = self.decay;
            let qn = math::powi(q, n as i32);
            math::ln(frac * (1.0 - qn) + qn) / math::ln(q)
        };
        let i = math::floor(x) as usize;
        Ok((i + 1).clamp(1, n))
    }
}

/// Accumulated counters for one (neighborhood, interval) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellStats {
    pub n_iters: u64,
    pub n_improve: u64,
    pub n_nothing: u64,
    pub n_worsen: u64,
    /// Summed improvement magnitudes, cost units, nonnegative.
    pub s_improve: f64,
    /// Summed worsening magnitudes, cost units, nonnegative.
    pub s_worsen: f64,
    pub s_time_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Improve,
    Worsen,
    Nothing,
}

impl CellStats {
    pub fn is_empty(&self) -> bool {
        *self == CellStats::default()
    }

    /// `n_iters = n_I + n_SN + n_W`, magnitudes nonnegative and zero when
    /// the matching count is zero.
    pub fn is_consistent(&self) -> bool {
        self.n_improve
            .checked_add(self.n_nothing)
            .and_then(|s| s.checked_add(self.n_worsen))
            == Some(self.n_iters)
            && self.s_improve >= 0.0
            && self.s_worsen >= 0.0
            && (self.n_improve > 0 || self.s_improve == 0.0)
            && (self.n_worsen > 0 || self.s_worsen == 0.0)
    }

    pub fn record(&mut self, kind: MoveKind, delta: f64, elapsed_ns: u64) {
        self.n_iters += 1;
        self.s_time_ns += elapsed_ns;
        match kind {
            MoveKind::Improve => {
                self.n_improve += 1;
                self.s_improve += delta;
            }
            MoveKind::Worsen => {
                self.n_worsen += 1;
                self.s_worsen += delta;
            }
            MoveKind::Nothing => self.n_nothing += 1,
        }
    }

    fn add_counts(&mut self, other: &CellStats) {
        self.n_iters += other.n_iters;
        self.n_improve += other.n_improve;
        self.n_nothing += other.n_nothing;
        self.n_worsen += other.n_worsen;
        self.s_time_ns += other.s_time_ns;
    }
}

/// Per-instance table of [`CellStats`] over neighborhoods × intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    instance_id: String,
    grid: IntervalGrid,
    neighborhood_ids: Vec<String>,
    cells: Vec<CellStats>,
    run_count: u64,
}

impl RunLog {
    /// A log with all-zero cells and `run_count = 0`; the identity for
    /// [`merge_logs`].
    pub fn empty(instance_id: impl Into<String>, grid: IntervalGrid, neighborhood_ids: Vec<String>) -> Self {
        let cells = vec![CellStats::default(); neighborhood_ids.len() * grid.n_intervals()];
        Self {
            instance_id: instance_id.into(),
            grid,
            neighborhood_ids,
            cells,
            run_count: 0,
        }
    }

    pub fn instance_id(&self) -> &str {
        &self.instance_id
    }

    pub fn grid(&self) -> &IntervalGrid {
        &self.grid
    }

    pub fn neighborhood_ids(&self) -> &[String] {
        &self.neighborhood_ids
    }

    pub fn n_neighborhoods(&self) -> usize {
        self.neighborhood_ids.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.grid.n_intervals()
    }

    pub fn run_count(&self) -> u64 {
        self.run_count
    }

    pub fn set_run_count(&mut self, run_count: u64) {
        self.run_count = run_count;
    }

    fn index(&self, nbh: usize, interval: usize) -> usize {
        debug_assert!(interval >= 1 && interval <= self.n_intervals());
        nbh * self.n_intervals() + (interval - 1)
    }

    /// Cell for neighborhood position `nbh` (0-based) and `interval` (1-based).
    pub fn cell(&self, nbh: usize, interval: usize) -> &CellStats {
        &self.cells[self.index(nbh, interval)]
    }

    pub fn cell_mut(&mut self, nbh: usize, interval: usize) -> &mut CellStats {
        let i = self.index(nbh, interval);
        &mut self.cells[i]
    }

    /// Iterates `(nbh, interval, cell)` over all cells, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &CellStats)> + '_ {
        let n = self.n_intervals();
        self.cells.iter().enumerate().map(move |(i, c)| (i / n, i % n + 1, c))
    }

    /// Σ over neighborhoods of `n_iters`, per interval.
    pub fn activity(&self) -> Vec<u64> {
        let n = self.n_intervals();
        let mut out = vec![0u64; n];
        for (_, interval, c) in self.cells() {
            out[interval - 1] += c.n_iters;
        }
        out
    }

    pub fn total_iters(&self) -> u64 {
        self.cells.iter().map(|c| c.n_iters).sum()
    }

    fn same_shape(&self, other: &RunLog) -> Result<(), MergeError> {
        if self.instance_id != other.instance_id {
            return Err(MergeError::Instance(
                self.instance_id.clone(),
                other.instance_id.clone(),
            ));
        }
        if self.grid != other.grid {
            return Err(MergeError::Grid);
        }
        if self.neighborhood_ids != other.neighborhood_ids {
            return Err(MergeError::Neighborhoods);
        }
        Ok(())
    }
}

/// Field-wise sum of logs that share instance, grid and neighborhood list.
///
/// Floating magnitudes are summed in sorted order per cell, so the result
/// does not depend on the order of `logs`.
pub fn merge_logs(logs: &[RunLog]) -> Result<RunLog, MergeError> {
    let first = logs.first().ok_or(MergeError::Empty)?;
    for log in &logs[1..] {
        first.same_shape(log)?;
    }
    let mut out = RunLog::empty(
        first.instance_id.clone(),
        first.grid.clone(),
        first.neighborhood_ids.clone(),
    );
    out.run_count = logs.iter().map(|l| l.run_count).sum();
    let mut improve = Vec::with_capacity(logs.len());
    let mut worsen = Vec::with_capacity(logs.len());
    for (i, cell) in out.cells.iter_mut().enumerate() {
        improve.clear();
        worsen.clear();
        for log in logs {
            let c = &log.cells[i];
            cell.add_counts(c);
            improve.push(c.s_improve);
            worsen.push(c.s_worsen);
        }
        cell.s_improve = ordered_sum(&mut improve);
        cell.s_worsen = ordered_sum(&mut worsen);
    }
    Ok(out)
}

fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    values.iter().fold(0.0, |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn grid(ub: f64, lb: f64, n: usize, q: f64) -> IntervalGrid {
        IntervalGrid::new(QualityBounds::new(ub, lb).unwrap(), n, q).unwrap()
    }

    #[test]
    fn two_interval_grid_matches_geometric_sum() {
        let g = grid(100.0, 0.0, 2, 0.5);
        // direct summation: w1 + w1*q = 100 -> w1 = 200/3
        let w1 = 100.0 / (1.0 + 0.5);
        let b = g.boundaries();
        assert_eq!(b.len(), 3);
        assert!((b[0] - 100.0).abs() < 1e-12);
        assert!((b[1] - (100.0 - w1)).abs() < 1e-12);
        assert_eq!(b[2], 0.0);
        assert!((g.width(1) - 66.666_666_666_666_67).abs() < 1e-9);
        assert!((g.width(2) - 33.333_333_333_333_33).abs() < 1e-9);
    }

    #[test]
    fn uniform_grid() {
        let g = grid(100.0, 0.0, 4, 1.0);
        assert_eq!(g.boundaries(), vec![100.0, 75.0, 50.0, 25.0, 0.0]);
    }

    #[test]
    fn interval_lookup_examples() {
        let g = grid(100.0, 0.0, 2, 0.5);
        assert_eq!(g.interval_of(50.0).unwrap(), 1);
        assert_eq!(g.interval_of(20.0).unwrap(), 2);
        assert_eq!(g.interval_of(100.0).unwrap(), 1);
        assert_eq!(g.interval_of(250.0).unwrap(), 1);
        assert_eq!(g.interval_of(0.0).unwrap(), 2);
        assert_eq!(g.interval_of(-5.0).unwrap(), 2);
        assert!(matches!(g.interval_of(f64::NAN), Err(GridError::NonFiniteCost(_))));
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(QualityBounds::new(0.0, 1.0).is_err());
        assert!(QualityBounds::new(f64::INFINITY, 1.0).is_err());
        let b = QualityBounds::new(1.0, 0.0).unwrap();
        assert_eq!(IntervalGrid::new(b, 0, 0.5), Err(GridError::NoIntervals));
        assert_eq!(IntervalGrid::new(b, 3, 0.0), Err(GridError::InvalidDecay(0.0)));
        assert_eq!(IntervalGrid::new(b, 3, 1.5), Err(GridError::InvalidDecay(1.5)));
    }

    #[test]
    fn production_grid_is_finer_near_lower_bound() {
        let g = grid(1500.0, 1200.0, DEFAULT_INTERVALS, DEFAULT_DECAY);
        for i in 1..DEFAULT_INTERVALS {
            let ratio = g.width(i + 1) / g.width(i);
            assert!((ratio - 0.99).abs() <= 1e-9 * 0.99, "ratio {ratio} at {i}");
        }
        assert_eq!(g.boundary(DEFAULT_INTERVALS), 1200.0);
    }

    fn log_with(n_iters: u64) -> RunLog {
        let mut l = RunLog::empty("a", grid(10.0, 0.0, 3, 0.9), vec!["x".to_string(), "y".to_string()]);
        for _ in 0..n_iters {
            l.cell_mut(0, 2).record(MoveKind::Improve, 0.5, 10);
        }
        l.set_run_count(1);
        l
    }

    #[test]
    fn merge_sums_cells() {
        let merged = merge_logs(&[log_with(3), log_with(4)]).unwrap();
        assert_eq!(merged.cell(0, 2).n_iters, 7);
        assert_eq!(merged.cell(0, 2).s_time_ns, 70);
        assert_eq!(merged.run_count(), 2);
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let l = log_with(5);
        let e = RunLog::empty("a", l.grid().clone(), l.neighborhood_ids().to_vec());
        assert_eq!(merge_logs(&[l.clone(), e]).unwrap(), l);
    }

    #[test]
    fn merge_rejects_mismatch() {
        let a = log_with(1);
        let b = RunLog::empty("b", a.grid().clone(), a.neighborhood_ids().to_vec());
        assert!(matches!(merge_logs(&[a.clone(), b]), Err(MergeError::Instance(..))));
        let c = RunLog::empty("a", grid(10.0, 0.0, 3, 0.8), a.neighborhood_ids().to_vec());
        assert_eq!(merge_logs(&[a.clone(), c]), Err(MergeError::Grid));
        let d = RunLog::empty("a", a.grid().clone(), vec!["x".to_string()]);
        assert_eq!(merge_logs(&[a, d]), Err(MergeError::Neighborhoods));
        assert_eq!(merge_logs(&[]), Err(MergeError::Empty));
    }

    #[test]
    fn consistency_check() {
        let mut c = CellStats::default();
        c.record(MoveKind::Worsen, 1.0, 3);
        c.record(MoveKind::Nothing, 0.0, 3);
        assert!(c.is_consistent());
        c.n_improve = 3;
        assert!(!c.is_consistent());
    }
}
