//! Pipeline configuration: a TOML file with one section per stage.
//!
//! Relative paths inside the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nbprofile_core::cluster::ClusterOptions;
use nbprofile_core::frames::DEFAULT_FRAMES;
use nbprofile_core::runlog::{DEFAULT_DECAY, DEFAULT_INTERVALS};
use nbprofile_core::search::Roster;
use nbprofile_core::tune::{IntRange, DEFAULT_IT_WI_RANGE, DEFAULT_LA_LIST_RANGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub instances: InstancesSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub collect: CollectSection,
    #[serde(default)]
    pub frames: FramesSection,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub tune: TuneSection,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstancesSection {
    pub paths: Vec<PathBuf>,
    /// Iterations of the reference run used when no `.lb` file exists.
    #[serde(default = "default_reference_iterations")]
    pub reference_iterations: u64,
    #[serde(default = "default_reference_seed")]
    pub reference_seed: u64,
}

fn default_reference_iterations() -> u64 {
    500_000
}

fn default_reference_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RosterKind {
    #[default]
    Standard,
    /// Standard roster plus a second copy of swap under another id.
    DuplicateSwap,
}

impl RosterKind {
    pub fn roster(self) -> Roster {
        match self {
            RosterKind::Standard => Roster::standard(),
            RosterKind::DuplicateSwap => Roster::with_duplicate_swap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClockKind {
    /// Operator time derived from counted work; reproducible.
    #[default]
    Modeled,
    /// Measured wall time; logs stop being reproducible.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub roster: RosterKind,
    pub clock: ClockKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_intervals: usize,
    pub decay: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_intervals: DEFAULT_INTERVALS,
            decay: DEFAULT_DECAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfiguration {
    pub name: String,
    pub la_list: usize,
    pub it_wi: usize,
    /// Per-neighborhood weights in roster order; identical when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectSection {
    pub runs: usize,
    /// Neighborhood applications per run.
    pub iterations: u64,
    pub configurations: Vec<RunConfiguration>,
}

impl Default for CollectSection {
    fn default() -> Self {
        Self {
            runs: 5,
            iterations: 20_000,
            configurations: vec![
                RunConfiguration {
                    name: "short-memory".into(),
                    la_list: 10,
                    it_wi: 1000,
                    weights: None,
                },
                RunConfiguration {
                    name: "long-memory".into(),
                    la_list: 200,
                    it_wi: 5000,
                    weights: None,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FramesSection {
    pub n_frames: usize,
}

impl Default for FramesSection {
    fn default() -> Self {
        Self {
            n_frames: DEFAULT_FRAMES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    pub k_min: usize,
    /// Clamped to `rows - 1`.
    pub k_max: usize,
    pub seeds: Vec<u64>,
    pub scree_threshold: f64,
    pub n_init: usize,
    pub min_cluster_size: f64,
    pub standardize: bool,
}

impl Default for ClusterSection {
    fn default() -> Self {
        let o = ClusterOptions::default();
        Self {
            k_min: 2,
            k_max: 12,
            seeds: vec![0, 1, 2],
            scree_threshold: o.scree_threshold,
            n_init: o.n_init,
            min_cluster_size: o.min_cluster_size,
            standardize: true,
        }
    }
}

impl ClusterSection {
    pub fn options(&self) -> ClusterOptions {
        ClusterOptions {
            scree_threshold: self.scree_threshold,
            n_init: self.n_init,
            min_cluster_size: self.min_cluster_size,
            ..ClusterOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSection {
    /// Training runs per tuning session.
    pub budget_runs: usize,
    /// Paired tuning sessions per scenario.
    pub trials: usize,
    /// Held-out runs per instance when evaluating.
    pub eval_runs: usize,
    /// Neighborhood applications per run.
    pub iterations: u64,
    pub la_list: [usize; 2],
    pub it_wi: [usize; 2],
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            budget_runs: 200,
            trials: 10,
            eval_runs: 5,
            iterations: 20_000,
            la_list: [DEFAULT_LA_LIST_RANGE.lo, DEFAULT_LA_LIST_RANGE.hi],
            it_wi: [DEFAULT_IT_WI_RANGE.lo, DEFAULT_IT_WI_RANGE.hi],
        }
    }
}

impl TuneSection {
    pub fn ranges(&self) -> Result<(IntRange, IntRange)> {
        Ok((
            IntRange::new(self.la_list[0], self.la_list[1])?,
            IntRange::new(self.it_wi[0], self.it_wi[1])?,
        ))
    }
}

/// Command-line values that replace file settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_frames: Option<usize>,
    pub n_intervals: Option<usize>,
    pub decay: Option<f64>,
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies overrides; an overridden `out` is taken as given, not
    /// relative to the config file.
    pub fn with_overrides(mut self, o: &Overrides) -> Self {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
        if let Some(f) = o.n_frames {
            self.frames.n_frames = f;
        }
        if let Some(n) = o.n_intervals {
            self.grid.n_intervals = n;
        }
        if let Some(q) = o.decay {
            self.grid.decay = q;
        }
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn instance_paths(&self) -> Vec<PathBuf> {
        self.instances.paths.iter().map(|p| self.resolve(p)).collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances.paths.is_empty() {
            bail!("no instance paths configured");
        }
        for p in self.instance_paths() {
            if !p.is_file() {
                bail!("instance file {} does not exist", p.display());
            }
        }
        if self.grid.n_intervals == 0 || !(self.grid.decay > 0.0 && self.grid.decay <= 1.0) {
            bail!("grid needs n_intervals >= 1 and decay in (0, 1]");
        }
        if self.frames.n_frames == 0 {
            bail!("n_frames must be at least 1");
        }
        let n_nbh = self.search.roster.roster().len();
        for c in &self.collect.configurations {
            if let Some(w) = &c.weights {
                if w.len() != n_nbh {
                    bail!(
                        "configuration `{}` has {} weights for {n_nbh} neighborhoods",
                        c.name,
                        w.len()
                    );
                }
            }
        }
        if self.cluster.seeds.is_empty() || self.cluster.k_min == 0 || self.cluster.k_min > self.cluster.k_max {
            bail!("cluster section needs seeds and 1 <= k_min <= k_max");
        }
        self.tune.ranges()?;
        Ok(())
    }

    /// Short digest of the effective settings. Instance paths count as
    /// written; the output location does not count.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let text = toml::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }
}
