//! Instance files and their cached lower bounds.
//!
//! An instance file holds the vehicle capacity on its first line, then one
//! `id x y demand` row per node. Row `0` is the depot; without it the depot
//! sits at `(0.5, 0.5)`. The lower bound lives next to the instance in a
//! file with the `.lb` extension.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nbprofile_core::search::{Point, RoutingInstance};

pub fn parse_instance(id: &str, text: &str) -> Result<RoutingInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, cap) = lines.next().ok_or_else(|| anyhow!("empty instance file"))?;
    let capacity: u32 = cap.parse().with_context(|| format!("bad capacity `{cap}`"))?;
    let mut depot = Point { x: 0.5, y: 0.5 };
    let mut customers: Vec<(usize, Point, u32)> = Vec::new();
    for (line, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 4 {
            bail!("line {line}: expected `id x y demand`");
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .with_context(|| format!("line {line}: bad number `{s}`"))
        };
        let node: usize = f[0]
            .parse()
            .with_context(|| format!("line {line}: bad id `{}`", f[0]))?;
        let p = Point {
            x: parse_f(f[1])?,
            y: parse_f(f[2])?,
        };
        let demand: u32 = f[3]
            .parse()
            .with_context(|| format!("line {line}: bad demand `{}`", f[3]))?;
        if node == 0 {
            depot = p;
        } else {
            customers.push((node, p, demand));
        }
    }
    customers.sort_by_key(|c| c.0);
    for (i, c) in customers.iter().enumerate() {
        if c.0 != i + 1 {
            bail!("customer ids must be 1..={} without gaps or repeats", customers.len());
        }
    }
    let pts: Vec<(Point, u32)> = customers.iter().map(|c| (c.1, c.2)).collect();
    Ok(RoutingInstance::new(id, capacity, depot, &pts)?)
}

pub fn format_instance(inst: &RoutingInstance) -> String {
    let mut out = String::new();
    writeln!(out, "{}", inst.capacity()).unwrap();
    let d = inst.depot();
    writeln!(out, "0 {} {} 0", d.x, d.y).unwrap();
    for (i, (p, demand)) in inst.customers().enumerate() {
        writeln!(out, "{} {} {} {}", i + 1, p.x, p.y, demand).unwrap();
    }
    out
}

/// Instance id taken from the file stem.
pub fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned())
}

pub fn read_instance(path: &Path) -> Result<RoutingInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&instance_id(path), &text).with_context(|| format!("parsing {}", path.display()))
}

pub fn bound_path(instance_path: &Path) -> PathBuf {
    instance_path.with_extension("lb")
}

pub fn format_bound(lower_bound: f64, iterations: u64, seed: u64) -> String {
    format!("# best cost of a {iterations}-iteration reference run, seed {seed}\nlower_bound={lower_bound}\n")
}

pub fn parse_bound(text: &str) -> Result<f64> {
    let v = text
        .lines()
        .find_map(|l| l.trim().strip_prefix("lower_bound="))
        .ok_or_else(|| anyhow!("no `lower_bound=` line"))?;
    let lb: f64 = v.trim().parse().with_context(|| format!("bad lower bound `{v}`"))?;
    if !(lb.is_finite() && lb > 0.0) {
        bail!("lower bound must be positive, got {lb}");
    }
    Ok(lb)
}

pub fn read_bound(instance_path: &Path) -> Result<Option<f64>> {
    let path = bound_path(instance_path);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path)?;
    parse_bound(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map(Some)
}
