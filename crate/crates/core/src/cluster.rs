//! Gaussian mixture with a low-dimensional signal subspace per cluster.
//!
//! Cluster `k` has covariance `Q diag(a, .., a, b, .., b) Qᵀ` with `a` on
//! the `d` leading principal axes and `b` on the complement, so only the
//! `d` leading eigenvectors are ever stored and no full covariance is
//! inverted. Fitted by EM, cluster count chosen by BIC.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;

use crate::math;
use crate::rng::{self, Rng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("cannot fit {k} clusters to {rows} rows")]
    TooManyClusters { k: usize, rows: usize },
    #[error("cluster count must be at least 1")]
    ZeroClusters,
    #[error("data matrix is empty")]
    EmptyData,
    #[error("data contains non-finite values")]
    NonFinite,
    #[error("K={k}: a cluster kept collapsing after {attempts} attempts")]
    Degenerate { k: usize, attempts: usize },
    #[error("empty cluster-count range or seed list")]
    EmptyRange,
    #[error("no K in the range produced a usable fit")]
    NoFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOptions {
    /// Scree cut: keep axes up to the last eigenvalue drop that is at least
    /// this fraction of the largest drop.
    pub scree_threshold: f64,
    /// k-means++ restarts used for initialization.
    pub n_init: usize,
    pub max_iter: usize,
    /// Relative log-likelihood change that ends EM.
    pub tol: f64,
    /// Fresh-seed retries after a cluster collapses.
    pub max_restarts: usize,
    /// Effective size below which a cluster counts as collapsed.
    pub min_cluster_size: f64,
    /// Noise variance floor as a fraction of the mean per-column variance.
    pub noise_floor: f64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            scree_threshold: 0.2,
            n_init: 10,
            max_iter: 200,
            tol: 1e-7,
            max_restarts: 5,
            min_cluster_size: 3.0,
            noise_floor: 1e-6,
        }
    }
}

/// Parameters of one mixture component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: DVector<f64>,
    /// `p × d`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl Component {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let p = x.len();
        let d = self.dim();
        let mut total = 0.0;
        let mut resid = vec![0.0; p];
        for j in 0..p {
            resid[j] = x[j] - self.mean[j];
            total += resid[j] * resid[j];
        }
        let mut signal = 0.0;
        for c in 0..d {
            let col = self.basis.column(c);
            let mut dot = 0.0;
            for j in 0..p {
                dot += col[j] * resid[j];
            }
            signal += dot * dot;
        }
        let noise = (total - signal).max(0.0);
        let (a, b) = (self.signal_var, self.noise_var);
        -0.5 * (p as f64 * LN_2PI + d as f64 * math::ln(a) + (p - d) as f64 * math::ln(b) + signal / a + noise / b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub components: Vec<Component>,
    pub log_likelihood: f64,
    pub bic: f64,
    /// 0-based cluster per row.
    pub assignments: Vec<usize>,
    /// `n × K` responsibilities.
    pub posteriors: DMatrix<f64>,
    /// Log-likelihood after each E-step.
    pub ll_trace: Vec<f64>,
    pub seed: u64,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn n_params(&self) -> f64 {
        n_params(&self.components)
    }

    pub fn max_posterior(&self, row: usize) -> f64 {
        self.posteriors.row(row).max()
    }
}

/// Free-parameter count: weights, means, subspace orientations, and
/// `a`, `b`, `d` per cluster.
pub fn n_params(components: &[Component]) -> f64 {
    let k = components.len() as f64;
    let p = components.first().map_or(0, |c| c.mean.len()) as f64;
    let orient: f64 = components
        .iter()
        .map(|c| {
            let d = c.dim() as f64;
            d * (p - (d + 1.0) / 2.0)
        })
        .sum();
    (k - 1.0) + k * p + orient + 3.0 * k
}

/// `2·ll − m·ln n`; larger is better.
pub fn bic_value(log_likelihood: f64, n_params: f64, n_rows: usize) -> f64 {
    2.0 * log_likelihood - n_params * math::ln(n_rows as f64)
}

/// BIC of `model` evaluated on `data`.
pub fn bic(model: &ClusterModel, data: &DMatrix<f64>) -> f64 {
    let (ll, _) = e_step(&model.components, data);
    bic_value(ll, model.n_params(), data.nrows())
}

pub fn default_k_range(n_rows: usize) -> RangeInclusive<usize> {
    2..=n_rows.saturating_sub(1).clamp(2, 12)
}

fn check_data(data: &DMatrix<f64>) -> Result<(), ClusterError> {
    if data.nrows() == 0 || data.ncols() == 0 {
        return Err(ClusterError::EmptyData);
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    Ok(())
}

pub fn fit(data: &DMatrix<f64>, k: usize, seed: u64, opts: &ClusterOptions) -> Result<ClusterModel, ClusterError> {
    check_data(data)?;
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if k > data.nrows() {
        return Err(ClusterError::TooManyClusters { k, rows: data.nrows() });
    }
    let attempts = opts.max_restarts + 1;
    for attempt in 0..attempts {
        let attempt_seed = if attempt == 0 {
            seed
        } else {
            rng::derive_seed(seed, attempt as u64)
        };
        if let Some(mut model) = fit_once(data, k, attempt_seed, opts) {
            model.seed = seed;
            return Ok(model);
        }
    }
    Err(ClusterError::Degenerate { k, attempts })
}

fn rows_of(data: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..data.nrows())
        .map(|i| data.row(i).iter().copied().collect())
        .collect()
}

fn fit_once(data: &DMatrix<f64>, k: usize, seed: u64, opts: &ClusterOptions) -> Option<ClusterModel> {
    let n = data.nrows();
    let min_size = if k == 1 { 0.0 } else { opts.min_cluster_size };

    let labels = kmeans(data, k, seed, opts.n_init);
    let mut resp = DMatrix::zeros(n, k);
    for (i, &l) in labels.iter().enumerate() {
        resp[(i, l)] = 1.0;
    }
    let floor = variance_floor(data, opts.noise_floor);

    let mut dims: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut components;
    let mut ll;
    let mut iterations = 0;
    loop {
        let sizes: Vec<f64> = (0..k).map(|c| resp.column(c).sum()).collect();
        if sizes.iter().any(|&s| s < min_size.max(1e-9)) {
            return None;
        }
        let (comps, new_dims) = m_step(data, &resp, dims.as_deref(), floor, opts.scree_threshold);
        components = comps;
        dims = Some(new_dims);
        let (new_ll, new_resp) = e_step(&components, data);
        ll = new_ll;
        resp = new_resp;
        iterations += 1;
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() <= opts.tol * ll.abs().max(1.0));
        trace.push(ll);
        if converged || iterations >= opts.max_iter {
            break;
        }
    }
    if !ll.is_finite() {
        return None;
    }
    let assignments = (0..n)
        .map(|i| {
            let row = resp.row(i);
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    let bic = bic_value(ll, n_params(&components), n);
    Some(ClusterModel {
        components,
        log_likelihood: ll,
        bic,
        assignments,
        posteriors: resp,
        ll_trace: trace,
        seed,
    })
}

fn variance_floor(data: &DMatrix<f64>, ratio: f64) -> f64 {
    let n = data.nrows() as f64;
    let mut total = 0.0;
    for col in data.column_iter() {
        let mean = col.sum() / n;
        total += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    }
    (ratio * total / data.ncols() as f64).max(1e-12)
}

/// Log-likelihood and responsibilities for the given parameters.
fn e_step(components: &[Component], data: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let n = data.nrows();
    let k = components.len();
    let mut resp = DMatrix::zeros(n, k);
    let mut ll = 0.0;
    let mut logs = vec![0.0; k];
    let rows = rows_of(data);
    for (i, x) in rows.iter().enumerate() {
        for (c, comp) in components.iter().enumerate() {
            logs[c] = math::ln(comp.weight) + comp.log_density(x);
        }
        let lse = math::log_sum_exp(&logs);
        ll += lse;
        for c in 0..k {
            resp[(i, c)] = math::exp(logs[c] - lse);
        }
    }
    (ll, resp)
}

/// Eigenvalues (descending) and matching eigenvectors of a symmetric matrix.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Scree choice: the last axis whose eigenvalue drop is at least
/// `threshold` times the largest drop.
pub fn scree_dimension(eigenvalues: &[f64], threshold: f64) -> usize {
    if eigenvalues.len() < 2 {
        return 0;
    }
    let drops: Vec<f64> = eigenvalues.windows(2).map(|w| w[0] - w[1]).collect();
    let max = drops.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 1;
    }
    drops.iter().rposition(|&d| d >= threshold * max).map_or(1, |i| i + 1)
}

struct SubspaceFit {
    signal_var: f64,
    noise_var: f64,
    objective: f64,
}

/// ML variances for dimension `d` and the cluster's share of the expected
/// complete-data log-likelihood (constants dropped).
fn subspace_fit(eigenvalues: &[f64], d: usize, n_k: f64, floor: f64) -> SubspaceFit {
    let p = eigenvalues.len();
    let top: f64 = eigenvalues[..d].iter().sum();
    let rest: f64 = eigenvalues[d..].iter().sum::<f64>().max(0.0);
    let noise_var = if p > d {
        (rest / (p - d) as f64).max(floor)
    } else {
        floor
    };
    let signal_var = if d > 0 {
        (top / d as f64).max(noise_var)
    } else {
        noise_var
    };
    let mut inner = (p - d) as f64 * math::ln(noise_var) + rest / noise_var;
    if d > 0 {
        inner += d as f64 * math::ln(signal_var) + top / signal_var;
    }
    SubspaceFit {
        signal_var,
        noise_var,
        objective: -0.5 * n_k * inner,
    }
}

fn m_step(
    data: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    prev_dims: Option<&[usize]>,
    floor: f64,
    threshold: f64,
) -> (Vec<Component>, Vec<usize>) {
    let n = data.nrows();
    let p = data.ncols();
    let k = resp.ncols();
    let mut comps = Vec::with_capacity(k);
    let mut dims = Vec::with_capacity(k);
    for c in 0..k {
        let w = resp.column(c);
        let n_k: f64 = w.sum();
        let mut mean = DVector::zeros(p);
        for i in 0..n {
            mean.axpy(w[i], &data.row(i).transpose(), 1.0);
        }
        mean /= n_k;
        let mut centered = DMatrix::zeros(n, p);
        for i in 0..n {
            let s = math::sqrt(w[i]);
            for j in 0..p {
                centered[(i, j)] = s * (data[(i, j)] - mean[j]);
            }
        }
        let cov = centered.transpose() * &centered / n_k;
        let (values, vectors) = sorted_eigen(cov);

        let upper = if p == 1 {
            0
        } else {
            let by_size = (math::floor(n_k) as usize).saturating_sub(2);
            by_size.min(p - 1).max(1)
        };
        let lower = upper.min(1);
        let mut d = scree_dimension(&values, threshold).clamp(lower, upper);
        let mut sub = subspace_fit(&values, d, n_k, floor);
        // never pick a dimension that lowers the EM objective below the
        // previous one, which keeps the likelihood monotone
        if let Some(prev) = prev_dims.map(|v| v[c]) {
            if prev != d {
                let alt = subspace_fit(&values, prev, n_k, floor);
                if alt.objective > sub.objective {
                    d = prev;
                    sub = alt;
                }
            }
        }
        comps.push(Component {
            weight: n_k / n as f64,
            mean,
            basis: vectors.columns(0, d).into_owned(),
            signal_var: sub.signal_var,
            noise_var: sub.noise_var,
        });
        dims.push(d);
    }
    (comps, dims)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best-of-`n_init` k-means++ / Lloyd labeling.
pub fn kmeans(data: &DMatrix<f64>, k: usize, seed: u64, n_init: usize) -> Vec<usize> {
    let rows = rows_of(data);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for run in 0..n_init.max(1) {
        let mut rng = rng::stream(seed, run as u64);
        let (inertia, labels) = lloyd(&rows, kmeans_pp(&rows, k, &mut rng));
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

fn kmeans_pp(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].clone();
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(rows: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> (f64, Vec<usize>) {
    let k = centers.len();
    let p = rows[0].len();
    let mut labels = vec![usize::MAX; rows.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let mut best = 0;
            let mut best_d = sq_dist(r, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(r, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for j in 0..p {
                sums[l][j] += r[j];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..p {
                    centers[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
        }
    }
    let inertia = rows.iter().zip(&labels).map(|(r, &l)| sq_dist(r, &centers[l])).sum();
    (inertia, labels)
}

/// One `(K, seed)` entry of a model-selection sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BicEntry {
    pub k: usize,
    pub seed: u64,
    /// `None` when the fit failed.
    pub bic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: ClusterModel,
    pub trace: Vec<BicEntry>,
}

impl Selection {
    /// Best BIC reached for each K, in K order.
    pub fn best_per_k(&self) -> Vec<(usize, Option<f64>)> {
        let mut out: Vec<(usize, Option<f64>)> = Vec::new();
        for e in &self.trace {
            match out.iter_mut().find(|(k, _)| *k == e.k) {
                Some((_, best)) => {
                    if let Some(b) = e.bic {
                        *best = Some(best.map_or(b, |x: f64| x.max(b)));
                    }
                }
                None => out.push((e.k, e.bic)),
            }
        }
        out.sort_by_key(|(k, _)| *k);
        out
    }
}

/// Picks the highest BIC; ties go to lower K, then lower seed.
pub fn choose_best(attempts: Vec<(usize, u64, Result<ClusterModel, ClusterError>)>) -> Result<Selection, ClusterError> {
    let mut trace = Vec::with_capacity(attempts.len());
    let mut best: Option<ClusterModel> = None;
    let mut ordered = attempts;
    ordered.sort_by_key(|(k, seed, _)| (*k, *seed));
    for (k, seed, res) in ordered {
        match res {
            Ok(model) => {
                trace.push(BicEntry {
                    k,
                    seed,
                    bic: Some(model.bic),
                });
                if best.as_ref().is_none_or(|b| model.bic > b.bic) {
                    best = Some(model);
                }
            }
            Err(_) => trace.push(BicEntry { k, seed, bic: None }),
        }
    }
    best.map(|best| Selection { best, trace }).ok_or(ClusterError::NoFit)
}

/// Fits every `(K, seed)` pair and keeps the best model by BIC.
pub fn select(
    data: &DMatrix<f64>,
    k_range: RangeInclusive<usize>,
    seeds: &[u64],
    opts: &ClusterOptions,
) -> Result<Selection, ClusterError> {
    check_data(data)?;
    if k_range.is_empty() || seeds.is_empty() {
        return Err(ClusterError::EmptyRange);
    }
    let mut attempts = Vec::new();
    for k in k_range {
        for &seed in seeds {
            attempts.push((k, seed, fit(data, k, seed, opts)));
        }
    }
    choose_best(attempts)
}

/// Adjusted Rand index between two labelings of the same rows.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |m: u64| (m * m.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&m| pairs(m)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
