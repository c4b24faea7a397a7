//! Paired two-sided t-test.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    /// Mean of `a - b`.
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: f64,
    pub n_pairs: usize,
    /// Differences have zero variance, so `t` is 0 or infinite.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PairedError {
    #[error("paired samples differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("need at least 2 pairs, got {0}")]
    TooFew(usize),
}

/// Two-sided paired t-test of `a` against `b`.
///
/// Zero-variance differences are reported as degenerate: `p = 1` when all
/// differences are zero, otherwise `t = ±∞` and `p = 0`.
pub fn paired_compare(a: &[f64], b: &[f64]) -> Result<PairedTest, PairedError> {
    if a.len() != b.len() {
        return Err(PairedError::Length(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(PairedError::TooFew(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if var <= (1e-12 * scale).powi(2) {
        let (t, p_value) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        };
        return Ok(PairedTest {
            mean_diff: mean,
            t,
            p_value,
            n_pairs: n,
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(PairedTest {
        mean_diff: mean,
        t,
        p_value,
        n_pairs: n,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors() {
        let r = paired_compare(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.mean_diff, r.p_value, r.degenerate), (0.0, 1.0, true));
    }

    #[test]
    fn constant_shift_is_degenerate() {
        let r = paired_compare(&[1.0; 4], &[2.0; 4]).unwrap();
        assert_eq!(r.mean_diff, -1.0);
        assert!(r.degenerate && r.t == f64::NEG_INFINITY && r.p_value == 0.0);
    }

    #[test]
    fn known_value() {
        // diffs 1, 2, 3, 4: mean 2.5, sd 1.2910, t = 3.8730, df 3
        let r = paired_compare(&[2.0, 4.0, 6.0, 8.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r.t - 3.872_983_346_207_417).abs() < 1e-12);
        assert!((r.p_value - 0.030_466_291_662_2).abs() < 1e-9, "{}", r.p_value);
    }

    #[test]
    fn too_few_pairs() {
        assert_eq!(paired_compare(&[1.0], &[2.0]), Err(PairedError::TooFew(1)));
        assert_eq!(paired_compare(&[1.0, 2.0], &[2.0]), Err(PairedError::Length(2, 1)));
    }
}
