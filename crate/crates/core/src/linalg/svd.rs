//! One-sided Jacobi (Hestenes) SVD.
//!
//! Used instead of nalgebra's bidiagonal SVD, which loses accuracy on
//! rank-deficient wide matrices (a trailing zero singular value perturbs the
//! others around the sixth digit). Jacobi rotations reach full relative
//! accuracy and are cheap at the sizes seen here (tens of rows, hundreds of
//! columns).

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) Vᵀ` with `s` sorted descending. `U` is `m × k`
/// and `V` is `n × k`, `k = min(m, n)`. Columns for zero singular values are
/// zero.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// Orthogonalizes the columns of `w` in place; returns the accumulated
/// rotation `J` with `w_in · J = w_out`.
fn orthogonalize_columns(w: &mut DMatrix<f64>) -> DMatrix<f64> {
    let n = w.ncols();
    let mut j = DMatrix::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if alpha == 0.0
                    || beta == 0.0
                    || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(w, p, q, c, s);
                rotate(&mut j, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    j
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (a, b) = (m[(r, p)], m[(r, q)]);
        m[(r, p)] = c * a - s * b;
        m[(r, q)] = s * a + c * b;
    }
}

/// Splits orthogonal columns into unit directions and norms, sorted by norm.
fn normalize(w: &DMatrix<f64>, j: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let k = w.ncols();
    let norms: Vec<f64> = (0..k).map(|i| w.column(i).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut dirs = DMatrix::zeros(w.nrows(), k);
    let mut rot = DMatrix::zeros(j.nrows(), k);
    let mut s = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        if norms[src] > 0.0 {
            dirs.set_column(dst, &(w.column(src) / norms[src]));
        }
        rot.set_column(dst, &j.column(src));
    }
    (dirs, s, rot)
}

pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let (m, n) = a.shape();
    if m >= n {
        // A J = W  =>  A = (W/σ) Σ Jᵀ
        let mut w = a.clone();
        let j = orthogonalize_columns(&mut w);
        let (u, singular_values, v) = normalize(&w, &j);
        ThinSvd {
            u,
            singular_values,
            v,
        }
    } else {
        // Aᵀ J = W  =>  A = J Σ (W/σ)ᵀ
        let mut w = a.transpose();
        let j = orthogonalize_columns(&mut w);
        let (v, singular_values, u) = normalize(&w, &j);
        ThinSvd {
            u,
            singular_values,
            v,
        }
    }
}
