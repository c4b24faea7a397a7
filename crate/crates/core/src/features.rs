//! Per-neighborhood feature vectors.
//!
//! The three probabilities of a frame form a composition on the simplex and
//! are mapped to the plane with an isometric log-ratio transform using the
//! balance basis
//!
//! ```text
//! z1 = sqrt(1/2) · ln(x1 / x2)
//! z2 = sqrt(2/3) · ln(sqrt(x1 · x2) / x3)
//! ```
//!
//! Each (instance, frame) contributes four columns: `z1`, `z2` and the
//! improvement / worsening rank-aggregation scores.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::aggregate::FrameRatios;
use crate::math;

/// Upper cap on the zero-replacement floor, so that a single application
/// never produces a composition where the replaced zeros dominate.
pub const MAX_ZERO_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("composition parts must be nonnegative and sum to 1, got {0:?}")]
    InvalidComposition([f64; 3]),
    #[error("zero-replacement floor {0} is out of range")]
    InvalidFloor(f64),
    #[error("composition has no positive part")]
    AllZero,
    #[error("instance `{0}` has a different neighborhood list")]
    InconsistentNeighborhoods(String),
    #[error("observables of instance `{0}` have inconsistent shapes")]
    Shape(String),
    #[error("no instances to assemble")]
    NoInstances,
    #[error("standardization needs at least 2 rows, got {0}")]
    TooFewRows(usize),
}

/// Nonnegative three-part composition summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composition3([f64; 3]);

impl Composition3 {
    pub fn new(parts: [f64; 3]) -> Result<Self, FeatureError> {
        let sum: f64 = parts.iter().sum();
        if parts.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || (sum - 1.0).abs() > 1e-12 {
            return Err(FeatureError::InvalidComposition(parts));
        }
        Ok(Self(parts))
    }

    pub fn from_ratios(r: &FrameRatios) -> Result<Self, FeatureError> {
        Self::new([r.improve, r.worsen, r.nothing])
    }

    pub fn parts(&self) -> [f64; 3] {
        self.0
    }

    /// Multiplicative replacement: zero parts become `floor`, positive parts
    /// shrink proportionally so the sum stays one.
    pub fn replace_zeros(&self, floor: f64) -> Result<Self, FeatureError> {
        let zeros = self.0.iter().filter(|&&x| x == 0.0).count();
        if zeros == 3 {
            return Err(FeatureError::AllZero);
        }
        if !(floor >= 0.0) || floor * zeros as f64 >= 1.0 {
            return Err(FeatureError::InvalidFloor(floor));
        }
        let keep = 1.0 - floor * zeros as f64;
        Ok(Self(self.0.map(|x| if x == 0.0 { floor } else { x * keep })))
    }
}

/// Isometric log-ratio coordinates after zero replacement with `floor`.
///
/// With `floor = 0` a zero part yields infinite coordinates.
pub fn ilr(c: &Composition3, floor: f64) -> Result<(f64, f64), FeatureError> {
    let [x1, x2, x3] = c.replace_zeros(floor)?.0;
    let z1 = math::sqrt(0.5) * math::ln(x1 / x2);
    let z2 = math::sqrt(2.0 / 3.0) * (0.5 * (math::ln(x1) + math::ln(x2)) - math::ln(x3));
    Ok((z1, z2))
}

/// Zero-replacement floor for a frame composition estimated from
/// `n_iters` applications: half a pseudo-count, capped at [`MAX_ZERO_FLOOR`].
pub fn default_zero_floor(n_iters: u64) -> f64 {
    (0.5 / n_iters.max(1) as f64).min(MAX_ZERO_FLOOR)
}

/// Observables of one instance, indexed `[neighborhood][frame - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceObservables {
    pub instance_id: String,
    pub neighborhood_ids: Vec<String>,
    pub ratios: Vec<Vec<Option<FrameRatios>>>,
    pub rho_improve: Vec<Vec<f64>>,
    pub rho_worsen: Vec<Vec<f64>>,
}

impl InstanceObservables {
    pub fn n_frames(&self) -> usize {
        self.ratios.first().map_or(0, Vec::len)
    }

    fn check_shape(&self) -> Result<(), FeatureError> {
        let m = self.neighborhood_ids.len();
        let f = self.n_frames();
        let ok = self.ratios.len() == m
            && self.rho_improve.len() == m
            && self.rho_worsen.len() == m
            && self
                .ratios
                .iter()
                .zip(&self.rho_improve)
                .zip(&self.rho_worsen)
                .all(|((a, b), c)| a.len() == f && b.len() == f && c.len() == f);
        if ok {
            Ok(())
        } else {
            Err(FeatureError::Shape(self.instance_id.clone()))
        }
    }
}

/// Labeled dense matrix, one row per neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub column_labels: Vec<String>,
    /// Row-major values.
    pub values: Vec<f64>,
    /// True where the value was imputed.
    pub missing: Vec<bool>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_labels.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n_rows(), self.n_cols(), &self.values)
    }
}

pub const COLUMN_KINDS: [&str; 4] = ["z1", "z2", "rho_improve", "rho_worsen"];

/// Builds the feature matrix from per-instance observables.
///
/// Missing ratio cells take the mean ILR coordinates of the neighborhoods
/// that were observed in the same frame (the origin if none was).
pub fn assemble(instances: &[InstanceObservables]) -> Result<FeatureMatrix, FeatureError> {
    let first = instances.first().ok_or(FeatureError::NoInstances)?;
    let ids = &first.neighborhood_ids;
    for inst in instances {
        if &inst.neighborhood_ids != ids {
            return Err(FeatureError::InconsistentNeighborhoods(inst.instance_id.clone()));
        }
        inst.check_shape()?;
    }
    let m = ids.len();
    let mut labels = Vec::new();
    let mut columns: Vec<(Vec<f64>, Vec<bool>)> = Vec::new();
    for inst in instances {
        for f in 0..inst.n_frames() {
            let coords: Vec<Option<(f64, f64)>> = inst
                .ratios
                .iter()
                .map(|row| {
                    row[f]
                        .map(|r| {
                            let c = Composition3::from_ratios(&r)?;
                            ilr(&c, default_zero_floor(r.n_iters))
                        })
                        .transpose()
                })
                .collect::<Result<_, _>>()?;
            let observed: Vec<(f64, f64)> = coords.iter().flatten().copied().collect();
            let fill = if observed.is_empty() {
                (0.0, 0.0)
            } else {
                let n = observed.len() as f64;
                (
                    observed.iter().map(|c| c.0).sum::<f64>() / n,
                    observed.iter().map(|c| c.1).sum::<f64>() / n,
                )
            };
            let mask: Vec<bool> = coords.iter().map(Option::is_none).collect();
            let z: Vec<(f64, f64)> = coords.iter().map(|c| c.unwrap_or(fill)).collect();
            columns.push((z.iter().map(|c| c.0).collect(), mask.clone()));
            columns.push((z.iter().map(|c| c.1).collect(), mask));
            columns.push(((0..m).map(|k| inst.rho_improve[k][f]).collect(), vec![false; m]));
            columns.push(((0..m).map(|k| inst.rho_worsen[k][f]).collect(), vec![false; m]));
            for kind in COLUMN_KINDS {
                labels.push(format!("{}/f{}/{}", inst.instance_id, f + 1, kind));
            }
        }
    }
    let n_cols = columns.len();
    let mut values = vec![0.0; m * n_cols];
    let mut missing = vec![false; m * n_cols];
    for (j, (col, mask)) in columns.iter().enumerate() {
        for k in 0..m {
            values[k * n_cols + j] = col[k];
            missing[k * n_cols + j] = mask[k];
        }
    }
    Ok(FeatureMatrix {
        row_ids: ids.clone(),
        column_labels: labels,
        values,
        missing,
    })
}

/// Column shifts and scales applied by [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Population standard deviations; 0 marks a constant column.
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Maps a standardized value back to the original column scale.
    pub fn invert(&self, col: usize, value: f64) -> f64 {
        value * self.scales[col] + self.means[col]
    }
}

/// Relative spread below which a column counts as constant.
const CONSTANT_TOL: f64 = 1e-12;

/// Shifts every column to mean 0 and scales it to unit population variance.
/// Constant columns become all zeros.
pub fn standardize(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, Standardization), FeatureError> {
    let n = matrix.n_rows();
    if n < 2 {
        return Err(FeatureError::TooFewRows(n));
    }
    let mut out = matrix.clone();
    let mut means = Vec::with_capacity(matrix.n_cols());
    let mut scales = Vec::with_capacity(matrix.n_cols());
    for j in 0..matrix.n_cols() {
        let col = matrix.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let sd = math::sqrt(var);
        let magnitude = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let scale = if sd <= CONSTANT_TOL * magnitude.max(1.0) {
            0.0
        } else {
            sd
        };
        for (i, x) in col.iter().enumerate() {
            out.values[i * matrix.n_cols() + j] = if scale == 0.0 { 0.0 } else { (x - mean) / scale };
        }
        means.push(mean);
        scales.push(scale);
    }
    Ok((out, Standardization { means, scales }))
}
