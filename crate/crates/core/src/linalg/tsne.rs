use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::pca::pca_retain;
use crate::error::{Error, Result};

/// Settings for the exact t-SNE used in token projections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    /// Variance retention of the PCA step that precedes t-SNE.
    pub pca_pre_retention: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 10.0,
            iterations: 500,
            learning_rate: 100.0,
            early_exaggeration: 4.0,
            exaggeration_iterations: 100,
            pca_pre_retention: 0.95,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TsneOutput {
    /// `T × 2` embedding.
    pub embedding: DMatrix<f64>,
    /// KL(P || Q) after each iteration, computed on the unexaggerated P.
    pub kl_history: Vec<f64>,
}

const MOMENTUM_SWITCH: usize = 250;
const MIN_GAIN: f64 = 0.01;

fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (x.row(i) - x.row(j)).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Row-conditional affinities with a per-row precision found by bisection
/// so each row's entropy matches `ln(perplexity)`.
fn conditional_affinities(dist: &DMatrix<f64>, perplexity: f64) -> DMatrix<f64> {
    let n = dist.nrows();
    let target = perplexity.ln();
    let mut p = DMatrix::zeros(n, n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
        let min_d = (0..n)
            .filter(|&j| j != i)
            .map(|j| dist[(i, j)])
            .fold(f64::INFINITY, f64::min);
        for _ in 0..200 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i {
                    0.0
                } else {
                    (-(dist[(i, j)] - min_d) * beta).exp()
                };
                sum += row[j];
            }
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] /= sum;
                weighted += row[j] * (dist[(i, j)] - min_d);
            }
            let entropy = sum.ln() + beta * weighted;
            let diff = entropy - target;
            if diff.abs() < 1e-10 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() {
                    (beta + hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = if lo.is_finite() {
                    (beta + lo) / 2.0
                } else {
                    beta / 2.0
                };
            }
        }
        for j in 0..n {
            p[(i, j)] = row[j];
        }
    }
    p
}

fn kl_divergence(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let mut kl = 0.0;
    for (pv, qv) in p.iter().zip(q.iter()) {
        if *pv > 0.0 {
            kl += pv * (pv / qv.max(1e-300)).ln();
        }
    }
    kl
}

/// Exact t-SNE on the rows of `x`.
pub fn tsne(x: &DMatrix<f64>, config: &TsneConfig, seed: u64) -> Result<TsneOutput> {
    let n = x.nrows();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "t-SNE needs at least 4 points, got {n}"
        )));
    }
    if !(config.perplexity > 0.0) || config.perplexity >= n as f64 {
        return Err(Error::InvalidInput(format!(
            "perplexity {} must be positive and below the point count {n}",
            config.perplexity
        )));
    }

    let dist = squared_distances(x);
    let cond = conditional_affinities(&dist, config.perplexity);
    let mut p = (&cond + cond.transpose()) / (2.0 * n as f64);
    p.apply(|v| *v = v.max(1e-12));
    let p_sum = p.sum();
    p /= p_sum;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y = DMatrix::from_fn(n, 2, |_, _| normal.sample(&mut rng));
    let mut velocity = DMatrix::<f64>::zeros(n, 2);
    let mut gains = DMatrix::<f64>::from_element(n, 2, 1.0);
    let mut grad = DMatrix::<f64>::zeros(n, 2);
    let mut num = DMatrix::<f64>::zeros(n, n);
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut kl_history = Vec::with_capacity(config.iterations);

    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < MOMENTUM_SWITCH { 0.5 } else { 0.8 };

        let mut num_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dy0 = y[(i, 0)] - y[(j, 0)];
                let dy1 = y[(i, 1)] - y[(j, 1)];
                let v = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                num[(i, j)] = v;
                num[(j, i)] = v;
                num_sum += 2.0 * v;
            }
        }
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] = if i == j {
                    0.0
                } else {
                    (num[(i, j)] / num_sum).max(1e-12)
                };
            }
        }

        grad.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mult = 4.0 * (exaggeration * p[(i, j)] - q[(i, j)]) * num[(i, j)];
                grad[(i, 0)] += mult * (y[(i, 0)] - y[(j, 0)]);
                grad[(i, 1)] += mult * (y[(i, 1)] - y[(j, 1)]);
            }
        }

        for k in 0..n * 2 {
            let same_sign = (grad[k] > 0.0) == (velocity[k] > 0.0);
            gains[k] = if same_sign {
                gains[k] * 0.8
            } else {
                gains[k] + 0.2
            };
            gains[k] = gains[k].max(MIN_GAIN);
            velocity[k] = momentum * velocity[k] - config.learning_rate * gains[k] * grad[k];
            y[k] += velocity[k];
        }
        let centroid = y.row_mean();
        for mut row in y.row_iter_mut() {
            row -= &centroid;
        }

        kl_history.push(kl_divergence(&p, &q));
    }

    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "t-SNE diverged to non-finite coordinates".into(),
        ));
    }
    Ok(TsneOutput {
        embedding: y,
        kl_history,
    })
}

/// PCA (to `config.pca_pre_retention`) followed by exact t-SNE.
pub fn project_2d_with(x: &DMatrix<f64>, config: &TsneConfig, seed: u64) -> Result<TsneOutput> {
    let n = x.nrows();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "projection needs at least 4 points, got {n}"
        )));
    }
    if config.perplexity >= n as f64 {
        return Err(Error::InvalidInput(format!(
            "perplexity {} must be below the point count {n}",
            config.perplexity
        )));
    }
    let reduced = pca_retain(x, config.pca_pre_retention)?;
    tsne(&reduced.transformed, config, seed)
}

/// `T × 2` projection with default settings and the given perplexity.
pub fn project_2d(x: &DMatrix<f64>, perplexity: f64, seed: u64) -> Result<DMatrix<f64>> {
    let config = TsneConfig {
        perplexity,
        ..TsneConfig::default()
    };
    Ok(project_2d_with(x, &config, seed)?.embedding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_clusters(seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        DMatrix::from_fn(40, 10, |i, j| {
            let centre = if i < 20 {
                0.0
            } else if j < 5 {
                4.0
            } else {
                -4.0
            };
            centre + noise.sample(&mut rng)
        })
    }

    #[test]
    fn separates_gaussian_clusters() {
        let x = two_clusters(1);
        let y = project_2d(&x, 10.0, 42).unwrap();
        let dist = |a: usize, b: usize| (y.row(a) - y.row(b)).norm();
        let mut max_intra: f64 = 0.0;
        let mut min_inter = f64::INFINITY;
        for a in 0..40 {
            for b in (a + 1)..40 {
                if (a < 20) == (b < 20) {
                    max_intra = max_intra.max(dist(a, b));
                } else {
                    min_inter = min_inter.min(dist(a, b));
                }
            }
        }
        assert!(
            min_inter > max_intra,
            "inter {min_inter} vs intra {max_intra}"
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let x = two_clusters(2);
        let a = project_2d(&x, 10.0, 9).unwrap();
        let b = project_2d(&x, 10.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_points() {
        let x = DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
        assert!(project_2d(&x, 2.0, 0).is_err());
    }

    #[test]
    fn perplexity_must_be_below_point_count() {
        let x = two_clusters(3);
        assert!(project_2d(&x, 40.0, 0).is_err());
    }

    #[test]
    fn kl_settles_at_the_end() {
        let x = two_clusters(4);
        let out = project_2d_with(&x, &TsneConfig::default(), 5).unwrap();
        let tail = &out.kl_history[out.kl_history.len() - 50..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
    }
}
