use super::svd::thin_svd;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Principal components kept under a variance-retention rule.
#[derive(Clone, Debug)]
pub struct PcaResult {
    /// `P × D`, orthonormal rows sorted by explained variance.
    pub components: DMatrix<f64>,
    /// Length `P`, non-increasing, each in `(0, 1]`.
    pub explained_variance_ratio: Vec<f64>,
    /// Column means of the input, length `D`.
    pub mean: DVector<f64>,
    /// `(X - mean) · componentsᵀ`, `T × P`.
    pub transformed: DMatrix<f64>,
}

impl PcaResult {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    /// Maps the transformed rows back into the input space.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut x = &self.transformed * &self.components;
        for mut row in x.row_iter_mut() {
            row += self.mean.transpose();
        }
        x
    }
}

/// Mean-centred PCA through an SVD of the centred matrix, keeping the
/// fewest components whose cumulative explained variance reaches
/// `retention`.
///
/// Each component's sign is fixed so its largest-magnitude entry is
/// positive. Variances are `s² / (T - 1)`.
pub fn pca_retain(x: &DMatrix<f64>, retention: f64) -> Result<PcaResult> {
    let (t, d) = x.shape();
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 rows, got {t}"
        )));
    }
    if !(retention > 0.0 && retention <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "retention {retention} outside (0, 1]"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "PCA input contains non-finite values".into(),
        ));
    }

    let mean: DVector<f64> = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    let svd = thin_svd(&centered);
    let s = &svd.singular_values;

    let scale = x.amax().max(1.0);
    let tol = 1e-12 * scale * (t.max(d) as f64);
    if s.is_empty() || s[0] <= tol {
        return Err(Error::DegenerateMatrix);
    }
    let rank = s.iter().take_while(|&&v| v > tol).count().min(t - 1);

    let denom = (t - 1) as f64;
    let variances: Vec<f64> = s.iter().map(|v| v * v / denom).collect();
    let total: f64 = variances.iter().sum();
    let ratios: Vec<f64> = variances.iter().map(|v| v / total).collect();

    let mut keep = rank;
    let mut cum = 0.0;
    for (k, r) in ratios.iter().take(rank).enumerate() {
        cum += r;
        if cum >= retention - 1e-12 {
            keep = k + 1;
            break;
        }
    }

    let mut components = DMatrix::zeros(keep, d);
    for row in 0..keep {
        let mut v = svd.v.column(row).transpose();
        let (mut big, mut big_abs) = (0.0, -1.0);
        for &c in v.iter() {
            if c.abs() > big_abs {
                big_abs = c.abs();
                big = c;
            }
        }
        if big < 0.0 {
            v.neg_mut();
        }
        components.set_row(row, &v);
    }
    let transformed = &centered * components.transpose();

    Ok(PcaResult {
        components,
        explained_variance_ratio: ratios[..keep].to_vec(),
        mean,
        transformed,
    })
}
