//! File formats, plotting and stage orchestration for `nbprofile-core`.
//!
//! [`pipeline::Pipeline`] runs the four stages (`collect`, `analyze`,
//! `plot`, `tune`) against a [`config::PipelineConfig`]; the `nbprofile`
//! binary is a thin wrapper around it.

pub mod config;
pub mod instances;
pub mod logfile;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod stats;

/// Config hash and seed stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: &str, seed: u64) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            seed,
        }
    }

    /// `"<prefix> nbprofile config=<hash> seed=<seed>"`.
    pub fn comment_line(&self, prefix: &str) -> String {
        format!("{prefix} nbprofile config={} seed={}", self.config_hash, self.seed)
    }
}
