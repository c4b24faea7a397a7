//! Seeded random search over neighborhood weights and the two integer
//! search parameters, with weights either free per neighborhood or tied per
//! cluster.
//!
//! Running the search itself is delegated to a batch evaluator so callers
//! decide how (and on how many threads) the jobs execute.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::math;
use crate::rng::{self, Rng};
use crate::search::{Budget, SearchConfig, SearchError};

pub const DEFAULT_LA_LIST_RANGE: IntRange = IntRange { lo: 1, hi: 5000 };
pub const DEFAULT_IT_WI_RANGE: IntRange = IntRange { lo: 100, hi: 50_000 };
/// Integer parameters of the untuned default configuration.
pub const DEFAULT_LA_LIST: usize = 100;
pub const DEFAULT_IT_WI: usize = 2000;

const TRAIN_STREAM: u64 = 1 << 32;
const EVAL_STREAM: u64 = 2 << 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TuneError {
    #[error("lower bound must be positive, got {0}")]
    NonPositiveBound(f64),
    #[error("assignments cover {got} neighborhoods, expected {expected}")]
    IncompleteAssignments { expected: usize, got: usize },
    #[error("clustered space requires assignments")]
    MissingAssignments,
    #[error("no neighborhoods")]
    NoNeighborhoods,
    #[error("integer range [{0}, {1}] is empty or starts at 0")]
    BadRange(usize, usize),
    #[error("budget must allow at least one run")]
    ZeroBudget,
    #[error("no instances to tune on")]
    NoInstances,
    #[error("evaluator returned {got} results for {expected} jobs")]
    ResultCount { expected: usize, got: usize },
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// `100·(cost − lb)/lb`.
pub fn optimality_gap(cost: f64, lower_bound: f64) -> Result<f64, TuneError> {
    if !(lower_bound > 0.0) {
        return Err(TuneError::NonPositiveBound(lower_bound));
    }
    Ok(100.0 * (cost - lower_bound) / lower_bound)
}

/// Inclusive integer range sampled log-uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub fn new(lo: usize, hi: usize) -> Result<Self, TuneError> {
        if lo == 0 || lo > hi {
            return Err(TuneError::BadRange(lo, hi));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: usize) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn sample_log_uniform(&self, rng: &mut Rng) -> usize {
        let lo = math::ln(self.lo as f64);
        let hi = math::ln(self.hi as f64 + 1.0);
        let v = math::floor(math::exp(lo + rng.random::<f64>() * (hi - lo))) as usize;
        v.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceMode {
    /// One weight per neighborhood.
    Basic,
    /// One weight per cluster.
    Clustered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    /// Neighborhood indices sharing one weight; a partition of the roster.
    groups: Vec<Vec<usize>>,
    n_neighborhoods: usize,
    pub la_list: IntRange,
    pub it_wi: IntRange,
}

impl ConfigSpace {
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_neighborhoods(&self) -> usize {
        self.n_neighborhoods
    }

    pub fn n_weight_params(&self) -> usize {
        self.groups.len()
    }

    /// Weight parameters plus the two integers.
    pub fn n_params(&self) -> usize {
        self.groups.len() + 2
    }

    /// Per-neighborhood weights (normalized) from one weight per group.
    pub fn expand(&self, group_weights: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.n_neighborhoods];
        for (g, members) in self.groups.iter().enumerate() {
            for &m in members {
                w[m] = group_weights[g];
            }
        }
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            for v in &mut w {
                *v /= total;
            }
        }
        w
    }
}

pub fn build_space(
    mode: SpaceMode,
    n_neighborhoods: usize,
    assignments: Option<&[usize]>,
    la_list: IntRange,
    it_wi: IntRange,
) -> Result<ConfigSpace, TuneError> {
    if n_neighborhoods == 0 {
        return Err(TuneError::NoNeighborhoods);
    }
    let groups = match mode {
        SpaceMode::Basic => (0..n_neighborhoods).map(|i| vec![i]).collect(),
        SpaceMode::Clustered => {
            let labels = assignments.ok_or(TuneError::MissingAssignments)?;
            if labels.len() != n_neighborhoods {
                return Err(TuneError::IncompleteAssignments {
                    expected: n_neighborhoods,
                    got: labels.len(),
                });
            }
            let k = labels.iter().max().map_or(0, |m| m + 1);
            let mut groups = vec![Vec::new(); k];
            for (i, &l) in labels.iter().enumerate() {
                groups[l].push(i);
            }
            groups.retain(|g| !g.is_empty());
            groups
        }
    };
    Ok(ConfigSpace {
        groups,
        n_neighborhoods,
        la_list,
        it_wi,
    })
}

/// Uniform group weights (redrawn if all zero), log-uniform integers.
/// The returned seed is a placeholder; jobs set their own.
pub fn sample_config(space: &ConfigSpace, budget: Budget, rng: &mut Rng) -> Result<SearchConfig, TuneError> {
    let group_weights = loop {
        let w: Vec<f64> = (0..space.groups.len()).map(|_| rng.random::<f64>()).collect();
        if w.iter().any(|&v| v > 0.0) {
            break w;
        }
    };
    let la_list = space.la_list.sample_log_uniform(rng);
    let it_wi = space.it_wi.sample_log_uniform(rng);
    Ok(SearchConfig::new(
        space.expand(&group_weights),
        la_list,
        it_wi,
        budget,
        0,
    )?)
}

/// Identical weights, default integers.
pub fn default_config(n_neighborhoods: usize, budget: Budget) -> Result<SearchConfig, TuneError> {
    Ok(SearchConfig::uniform(
        n_neighborhoods,
        DEFAULT_LA_LIST,
        DEFAULT_IT_WI,
        budget,
        0,
    )?)
}

/// Identical weights with the integers of `tuned`.
pub fn identical_weights(tuned: &SearchConfig) -> Result<SearchConfig, TuneError> {
    Ok(SearchConfig::uniform(
        tuned.weights().len(),
        tuned.la_list,
        tuned.it_wi,
        tuned.budget,
        0,
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneSettings {
    /// Total algorithm runs spent on training.
    pub budget_runs: usize,
    pub n_instances: usize,
    /// Per-run stopping rule.
    pub run_budget: Budget,
    /// Held-out runs per instance when evaluating a configuration.
    pub eval_runs: usize,
    pub seed: u64,
}

impl TuneSettings {
    pub fn n_samples(&self) -> usize {
        (self.budget_runs / self.n_instances.max(1)).max(1)
    }

    /// Seed shared by every configuration on training instance `i`.
    pub fn train_seed(&self, instance: usize) -> u64 {
        rng::derive_seed(self.seed, TRAIN_STREAM + instance as u64)
    }

    /// Held-out seed `run` on instance `i`; never equal to a training seed
    /// stream.
    pub fn eval_seed(&self, instance: usize, run: usize) -> u64 {
        rng::derive_seed(self.seed, EVAL_STREAM + (instance * self.eval_runs + run) as u64)
    }

    fn validate(&self) -> Result<(), TuneError> {
        if self.budget_runs == 0 {
            return Err(TuneError::ZeroBudget);
        }
        if self.n_instances == 0 {
            return Err(TuneError::NoInstances);
        }
        Ok(())
    }
}

/// One algorithm run to be executed by the evaluator, which returns its
/// optimality gap.
#[derive(Debug, Clone, PartialEq)]
pub struct RunJob {
    pub instance: usize,
    pub config: SearchConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub config: SearchConfig,
    /// Gap per training instance.
    pub gaps: Vec<f64>,
    pub mean_gap: f64,
}

/// Held-out results of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub config: SearchConfig,
    /// `(instance, seed, gap)` per run.
    pub runs: Vec<(usize, u64, f64)>,
    pub mean_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best_index: usize,
    pub best: SearchConfig,
    pub training_mean: f64,
    pub trials: Vec<Trial>,
    pub evaluation: Evaluation,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn run_batch<E: From<TuneError>>(
    jobs: &[RunJob],
    evaluate: &mut impl FnMut(&[RunJob]) -> Result<Vec<f64>, E>,
) -> Result<Vec<f64>, E> {
    let gaps = evaluate(jobs)?;
    if gaps.len() != jobs.len() {
        return Err(TuneError::ResultCount {
            expected: jobs.len(),
            got: gaps.len(),
        }
        .into());
    }
    Ok(gaps)
}

/// Runs `config` on the held-out seeds of every instance.
pub fn evaluate_config<E: From<TuneError>>(
    config: &SearchConfig,
    settings: &TuneSettings,
    mut evaluate: impl FnMut(&[RunJob]) -> Result<Vec<f64>, E>,
) -> Result<Evaluation, E> {
    settings.validate()?;
    let mut jobs = Vec::new();
    for instance in 0..settings.n_instances {
        for run in 0..settings.eval_runs.max(1) {
            jobs.push(RunJob {
                instance,
                config: config.with_seed(settings.eval_seed(instance, run)),
            });
        }
    }
    let gaps = run_batch(&jobs, &mut evaluate)?;
    let runs: Vec<(usize, u64, f64)> = jobs
        .iter()
        .zip(&gaps)
        .map(|(j, &g)| (j.instance, j.config.seed, g))
        .collect();
    Ok(Evaluation {
        config: config.with_seed(0),
        runs,
        mean_gap: mean(&gaps),
    })
}

/// Samples `settings.n_samples()` configurations, scores each by its mean
/// gap over the training instances and re-evaluates the winner.
///
/// Sample `i` depends only on `(seed, i)`, so a larger budget extends the
/// sample sequence and never ends with a worse training mean.
pub fn random_search<E: From<TuneError>>(
    space: &ConfigSpace,
    settings: &TuneSettings,
    mut evaluate: impl FnMut(&[RunJob]) -> Result<Vec<f64>, E>,
) -> Result<TuneResult, E> {
    settings.validate()?;
    let n_samples = settings.n_samples();
    let mut configs = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let mut rng = rng::stream(settings.seed, i as u64);
        configs.push(sample_config(space, settings.run_budget, &mut rng)?);
    }
    let n_inst = settings.n_instances;
    let mut jobs = Vec::with_capacity(n_samples * n_inst);
    for c in &configs {
        for instance in 0..n_inst {
            jobs.push(RunJob {
                instance,
                config: c.with_seed(settings.train_seed(instance)),
            });
        }
    }
    let gaps = run_batch(&jobs, &mut evaluate)?;
    let trials: Vec<Trial> = configs
        .into_iter()
        .enumerate()
        .map(|(index, config)| {
            let g = gaps[index * n_inst..(index + 1) * n_inst].to_vec();
            Trial {
                index,
                config,
                mean_gap: mean(&g),
                gaps: g,
            }
        })
        .collect();
    let best_index = trials.iter().fold(0, |best, t| {
        if t.mean_gap < trials[best].mean_gap {
            t.index
        } else {
            best
        }
    });
    let best = trials[best_index].config.clone();
    let evaluation = evaluate_config(&best, settings, &mut evaluate)?;
    Ok(TuneResult {
        best_index,
        training_mean: trials[best_index].mean_gap,
        best,
        trials,
        evaluation,
    })
}
