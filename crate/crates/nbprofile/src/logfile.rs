//! Line-oriented text format for [`RunLog`].
//!
//! ```text
//! # nbprofile config=<hash> seed=<seed>
//! instance=demo-a
//! upper_bound=25.18
//! lower_bound=7.99
//! n_intervals=1000
//! decay=0.99
//! run_count=10
//! neighborhoods=swap,relocate
//! # nbh_id,interval,n_iters,n_I,n_SN,n_W,s_I,s_W,s_time_ns
//! swap,3,12,4,6,2,0.5,0.25,4800
//! ```
//!
//! Only nonzero cells are written. Floats use the shortest representation
//! that parses back to the same value, so a write/read round trip is exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nbprofile_core::runlog::{CellStats, GridError, IntervalGrid, QualityBounds, RunLog};

use crate::Provenance;

pub const CELL_COLUMNS: &str = "nbh_id,interval,n_iters,n_I,n_SN,n_W,s_I,s_W,s_time_ns";

const HEADER_KEYS: [&str; 7] = [
    "instance",
    "upper_bound",
    "lower_bound",
    "n_intervals",
    "decay",
    "run_count",
    "neighborhoods",
];

#[derive(Debug, thiserror::Error)]
pub enum LogFormatError {
    #[error("missing header `{0}`")]
    MissingHeader(&'static str),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn line_err(line: usize, msg: impl Into<String>) -> LogFormatError {
    LogFormatError::Line { line, msg: msg.into() }
}

pub fn format_log(log: &RunLog, provenance: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(p) = provenance {
        writeln!(out, "{}", p.comment_line("#")).unwrap();
    }
    let grid = log.grid();
    writeln!(out, "instance={}", log.instance_id()).unwrap();
    writeln!(out, "upper_bound={}", grid.bounds().upper()).unwrap();
    writeln!(out, "lower_bound={}", grid.bounds().lower()).unwrap();
    writeln!(out, "n_intervals={}", grid.n_intervals()).unwrap();
    writeln!(out, "decay={}", grid.decay()).unwrap();
    writeln!(out, "run_count={}", log.run_count()).unwrap();
    writeln!(out, "neighborhoods={}", log.neighborhood_ids().join(",")).unwrap();
    writeln!(out, "# {CELL_COLUMNS}").unwrap();
    let ids = log.neighborhood_ids();
    for (nbh, interval, c) in log.cells() {
        if c.is_empty() {
            continue;
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            ids[nbh], interval, c.n_iters, c.n_improve, c.n_nothing, c.n_worsen, c.s_improve, c.s_worsen, c.s_time_ns
        )
        .unwrap();
    }
    out
}

fn parse_num<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T, LogFormatError> {
    s.trim()
        .parse()
        .map_err(|_| line_err(line, format!("bad {what} `{s}`")))
}

pub fn parse_log(text: &str) -> Result<RunLog, LogFormatError> {
    let mut header: HashMap<&str, (usize, &str)> = HashMap::new();
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = l.split_once('=') {
            let k = k.trim();
            if !HEADER_KEYS.contains(&k) {
                return Err(line_err(line, format!("unknown header `{k}`")));
            }
            if header.insert(k, (line, v.trim())).is_some() {
                return Err(line_err(line, format!("duplicate header `{k}`")));
            }
        } else {
            rows.push((line, l));
        }
    }
    let get = |k: &'static str| header.get(k).copied().ok_or(LogFormatError::MissingHeader(k));
    let (_, instance) = get("instance")?;
    let (l, v) = get("upper_bound")?;
    let upper: f64 = parse_num(l, "upper_bound", v)?;
    let (l, v) = get("lower_bound")?;
    let lower: f64 = parse_num(l, "lower_bound", v)?;
    let (l, v) = get("n_intervals")?;
    let n: usize = parse_num(l, "n_intervals", v)?;
    let (l, v) = get("decay")?;
    let decay: f64 = parse_num(l, "decay", v)?;
    let (l, v) = get("run_count")?;
    let run_count: u64 = parse_num(l, "run_count", v)?;
    let (l, v) = get("neighborhoods")?;
    let ids: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
    if ids.iter().any(String::is_empty) {
        return Err(line_err(l, "empty neighborhood id"));
    }
    let position: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if position.len() != ids.len() {
        return Err(line_err(l, "duplicate neighborhood id"));
    }

    let grid = IntervalGrid::new(QualityBounds::new(upper, lower)?, n, decay)?;
    let mut log = RunLog::empty(instance, grid, ids.clone());
    log.set_run_count(run_count);
    for (line, row) in rows {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 9 {
            return Err(line_err(line, format!("expected 9 fields, got {}", f.len())));
        }
        let nbh = *position
            .get(f[0].trim())
            .ok_or_else(|| line_err(line, format!("unknown neighborhood `{}`", f[0])))?;
        let interval: usize = parse_num(line, "interval", f[1])?;
        if !(1..=n).contains(&interval) {
            return Err(line_err(line, format!("interval {interval} outside 1..={n}")));
        }
        let cell = CellStats {
            n_iters: parse_num(line, "n_iters", f[2])?,
            n_improve: parse_num(line, "n_I", f[3])?,
            n_nothing: parse_num(line, "n_SN", f[4])?,
            n_worsen: parse_num(line, "n_W", f[5])?,
            s_improve: parse_num(line, "s_I", f[6])?,
            s_worsen: parse_num(line, "s_W", f[7])?,
            s_time_ns: parse_num(line, "s_time_ns", f[8])?,
        };
        if !cell.is_consistent() {
            return Err(line_err(line, "counters violate n_iters = n_I + n_SN + n_W"));
        }
        let slot = log.cell_mut(nbh, interval);
        if !slot.is_empty() {
            return Err(line_err(line, "duplicate cell"));
        }
        *slot = cell;
    }
    Ok(log)
}

pub fn read_log(path: &Path) -> anyhow::Result<RunLog> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_log(&text)?)
}
