//! Late-acceptance hill climbing inside an iterated local search, recording
//! every neighborhood application into a [`RunLog`].

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::instance::RoutingInstance;
use super::neighborhoods::{apply_neighborhood, NeighborhoodKind, Roster, WorkMeter};
use super::solution::{initial_solution, Solution};
use crate::rng::{self, Rng};
use crate::runlog::{GridError, IntervalGrid, MoveKind, QualityBounds, RunLog};

/// Relative tolerance under which a cost change counts as "nothing".
pub const RELATIVE_EPSILON: f64 = 1e-9;
/// Cached costs are resynchronized against a full recomputation this often.
const RESYNC_EVERY: u64 = 1000;
/// Size of the ruin-recreate move used to perturb between restarts.
const PERTURBATION_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("weights must be finite, nonnegative and not all zero")]
    InvalidWeights,
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("laList and itWI must be at least 1")]
    InvalidMemory,
    #[error("budget must be positive")]
    EmptyBudget,
    #[error("unknown neighborhood `{0}`")]
    UnknownNeighborhood(alloc::string::String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Improve iff `new < old - eps`, worsen iff `new > old + eps`.
pub fn classify_move(old_cost: f64, new_cost: f64, epsilon: f64) -> MoveKind {
    if new_cost < old_cost - epsilon {
        MoveKind::Improve
    } else if new_cost > old_cost + epsilon {
        MoveKind::Worsen
    } else {
        MoveKind::Nothing
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    /// `|new - old|`, zero for `Nothing`.
    pub delta: f64,
    pub elapsed_ns: u64,
}

impl MoveOutcome {
    pub fn new(old_cost: f64, new_cost: f64, epsilon: f64, elapsed_ns: u64) -> Self {
        let kind = classify_move(old_cost, new_cost, epsilon);
        let delta = match kind {
            MoveKind::Nothing => 0.0,
            _ => (new_cost - old_cost).abs(),
        };
        Self {
            kind,
            delta,
            elapsed_ns,
        }
    }
}

/// Cumulative-weight sampler over neighborhood positions.
#[derive(Debug, Clone)]
pub struct WeightedSelector {
    cumulative: Vec<f64>,
}

impl WeightedSelector {
    pub fn new(weights: &[f64]) -> Result<Self, SearchError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SearchError::InvalidWeights);
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(SearchError::InvalidWeights);
        }
        Ok(Self { cumulative })
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        // u < total always, but guard against rounding at the top end
        idx.min(self.cumulative.len() - 1)
    }
}

/// Draws a neighborhood position with probability `w_k / Σw`.
pub fn select_neighborhood(weights: &[f64], rng: &mut Rng) -> Result<usize, SearchError> {
    Ok(WeightedSelector::new(weights)?.sample(rng))
}

/// Source of per-application running times.
pub trait Stopwatch {
    fn start(&mut self);
    /// Nanoseconds since the last `start`; `work_units` is the operator's
    /// step count, which deterministic clocks may use instead of wall time.
    fn stop(&mut self, work_units: u64) -> u64;
}

/// Reproducible clock: `base_ns + ns_per_unit · work_units`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeledClock {
    pub base_ns: u64,
    pub ns_per_unit: u64,
}

impl Default for ModeledClock {
    fn default() -> Self {
        Self {
            base_ns: 100,
            ns_per_unit: 4,
        }
    }
}

impl Stopwatch for ModeledClock {
    fn start(&mut self) {}

    fn stop(&mut self, work_units: u64) -> u64 {
        self.base_ns + self.ns_per_unit * work_units
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Total neighborhood applications.
    Iterations(u64),
    /// Total measured operator time, as reported by the stopwatch.
    TimeNs(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// One weight per roster entry, normalized on construction.
    weights: Vec<f64>,
    pub la_list: usize,
    pub it_wi: usize,
    pub budget: Budget,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(
        weights: Vec<f64>,
        la_list: usize,
        it_wi: usize,
        budget: Budget,
        seed: u64,
    ) -> Result<Self, SearchError> {
        WeightedSelector::new(&weights)?;
        if la_list == 0 || it_wi == 0 {
            return Err(SearchError::InvalidMemory);
        }
        if matches!(budget, Budget::Iterations(0) | Budget::TimeNs(0)) {
            return Err(SearchError::EmptyBudget);
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
            la_list,
            it_wi,
            budget,
            seed,
        })
    }

    /// Identical weights over `n` neighborhoods.
    pub fn uniform(n: usize, la_list: usize, it_wi: usize, budget: Budget, seed: u64) -> Result<Self, SearchError> {
        Self::new(vec![1.0; n], la_list, it_wi, budget, seed)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub best: Solution,
    pub log: RunLog,
    pub iterations: u64,
    pub restarts: u64,
}

struct Spent {
    iterations: u64,
    time_ns: u64,
}

impl Spent {
    fn exhausted(&self, budget: Budget) -> bool {
        match budget {
            Budget::Iterations(n) => self.iterations >= n,
            Budget::TimeNs(t) => self.time_ns >= t,
        }
    }
}

/// Runs the iterated LAHC from the one-route-per-customer solution.
///
/// Every application is recorded into the cell addressed by the interval of
/// the current cost *before* the move, whether or not the candidate is
/// accepted. Perturbation moves between restarts are not recorded.
pub fn lahc_run(
    inst: &RoutingInstance,
    roster: &Roster,
    config: &SearchConfig,
    grid: &IntervalGrid,
    clock: &mut dyn Stopwatch,
) -> Result<RunOutcome, SearchError> {
    if config.weights.len() != roster.len() {
        return Err(SearchError::WeightCount {
            expected: roster.len(),
            got: config.weights.len(),
        });
    }
    let selector = WeightedSelector::new(&config.weights)?;
    let kinds: Vec<NeighborhoodKind> = roster.iter().map(|n| n.kind).collect();
    let mut rng = rng::seeded(config.seed);
    let mut perturb_rng = rng::stream(config.seed, 1);
    let mut log = RunLog::empty(inst.id(), grid.clone(), roster.ids());
    log.set_run_count(1);

    let mut current = initial_solution(inst);
    let mut best = current.clone();
    let mut spent = Spent {
        iterations: 0,
        time_ns: 0,
    };
    let mut restarts = 0;

    'ils: loop {
        let mut memory = vec![current.cost(); config.la_list];
        let mut idle = 0usize;
        let mut local_iter = 0usize;
        while idle < config.it_wi {
            if spent.exhausted(config.budget) {
                break 'ils;
            }
            let k = selector.sample(&mut rng);
            let before = current.cost();
            let interval = grid.interval_of(before)?;
            let mut meter = WorkMeter::default();
            clock.start();
            let candidate = apply_neighborhood(kinds[k], &current, inst, &mut rng, &mut meter);
            let elapsed = clock.stop(meter.units);
            let after = candidate.as_ref().map_or(before, Solution::cost);
            let outcome = MoveOutcome::new(before, after, RELATIVE_EPSILON * before.abs(), elapsed);
            log.cell_mut(k, interval)
                .record(outcome.kind, outcome.delta, outcome.elapsed_ns);
            spent.iterations += 1;
            spent.time_ns += elapsed;

            let slot = local_iter % config.la_list;
            let mut improved = false;
            if let Some(cand) = candidate {
                if cand.cost() <= memory[slot] || cand.cost() <= before {
                    improved = outcome.kind == MoveKind::Improve;
                    current = cand;
                    #[cfg(debug_assertions)]
                    current.validate(inst).expect("accepted move keeps feasibility");
                }
            }
            memory[slot] = current.cost();
            idle = if improved { 0 } else { idle + 1 };
            if current.cost() < best.cost() {
                best = current.clone();
            }
            local_iter += 1;
            if spent.iterations.is_multiple_of(RESYNC_EVERY) {
                let cached = current.cost();
                current.resync(inst);
                debug_assert!((cached - current.cost()).abs() <= 1e-6 * current.cost().abs().max(1.0));
            }
        }
        restarts += 1;
        let mut meter = WorkMeter::default();
        current = apply_neighborhood(
            NeighborhoodKind::RuinRecreate(PERTURBATION_SIZE),
            &best,
            inst,
            &mut perturb_rng,
            &mut meter,
        )
        .unwrap_or_else(|| best.clone());
    }
    best.resync(inst);
    Ok(RunOutcome {
        best,
        log,
        iterations: spent.iterations,
        restarts,
    })
}

/// Long uniform-weight run whose best cost serves as the lower bound of an
/// instance. The grid used for recording is a throwaway.
pub fn reference_run(
    inst: &RoutingInstance,
    roster: &Roster,
    la_list: usize,
    it_wi: usize,
    iterations: u64,
    seed: u64,
) -> Result<Solution, SearchError> {
    let init = initial_solution(inst).cost();
    let grid = IntervalGrid::new(QualityBounds::new(init, 0.0)?, 1, 1.0)?;
    let config = SearchConfig::uniform(roster.len(), la_list, it_wi, Budget::Iterations(iterations), seed)?;
    Ok(lahc_run(inst, roster, &config, &grid, &mut ModeledClock::default())?.best)
}
