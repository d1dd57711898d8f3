//! Per-layer, per-class empirical CDFs of train-set mean cosines, the
//! windowed interval probability, and its label-free approximations.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Label;
use crate::similarity::AnswerSimilarityProfile;

/// Default half-width of the probability window.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Empirical distribution of one class's mean cosines at one layer.
///
/// Evaluated with linear interpolation between order statistics: the `i`-th
/// smallest of `n` values (0-based) sits at probability `i / (n - 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCdf {
    pub layer: usize,
    pub class_tag: Label,
    pub sorted_values: Vec<f64>,
    pub mean: f64,
}

impl LayerCdf {
    pub fn new(layer: usize, class_tag: Label, mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no {} values at layer {layer}",
                class_tag.as_str()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at layer {layer}"
            )));
        }
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(LayerCdf {
            layer,
            class_tag,
            sorted_values: values,
            mean,
        })
    }

    /// `P(X ≤ x)`.
    pub fn ecdf_at(&self, x: f64) -> f64 {
        ecdf_at(self, x)
    }
}

/// `P(X ≤ x)` under the linearly interpolated empirical distribution; 0
/// below the minimum and 1 from the maximum on.
pub fn ecdf_at(cdf: &LayerCdf, x: f64) -> f64 {
    let v = &cdf.sorted_values;
    let n = v.len();
    if x < v[0] {
        return 0.0;
    }
    if x >= v[n - 1] {
        return 1.0;
    }
    // v[k-1] <= x < v[k], with k in 1..n
    let k = v.partition_point(|&s| s <= x);
    let (lo, hi) = (v[k - 1], v[k]);
    let frac = (x - lo) / (hi - lo);
    (((k - 1) as f64 + frac) / (n - 1) as f64).clamp(0.0, 1.0)
}

/// Probability mass within `[x - delta, x + delta]`.
pub fn p_cdf(cdf: &LayerCdf, x: f64, delta: f64) -> f64 {
    (ecdf_at(cdf, x + delta) - ecdf_at(cdf, x - delta)).clamp(0.0, 1.0)
}

/// Label-free weighting strategy for the approximated interval probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Inverse distance to each class's train mean.
    #[default]
    Distance,
    /// Tail balance of each class's CDF at the observation.
    CdfProperties,
}

/// How the two class-conditional probabilities are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// `½ (p_c w_c + p_i w_i)`.
    #[default]
    Corrected,
    /// `½ (p_c w_c + p_c w_i)`, with the correct-class probability in both
    /// terms.
    #[serde(rename = "paper_literal")]
    Literal,
}

/// Form of the distance weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceForm {
    /// `clamp(1 - |x - μ|, 0, 1)`.
    #[default]
    Symmetric,
    /// `1 - (x - μ)`, unclamped and signed.
    Literal,
}

/// Approximation settings used when the test-time class is unknown.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Approximation {
    pub strategy: Strategy,
    pub combine: Combine,
    pub distance_form: DistanceForm,
}

/// Correct- and incorrect-class CDFs for every layer, plus the window Δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfBank {
    pub delta: f64,
    pub per_layer_correct: Vec<LayerCdf>,
    pub per_layer_incorrect: Vec<LayerCdf>,
}

impl CdfBank {
    /// Fits the bank from labeled train profiles. Profiles without a label
    /// or not eligible for distribution building are ignored.
    pub fn fit(profiles: &[AnswerSimilarityProfile], delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "delta must be positive, got {delta}"
            )));
        }
        let usable: Vec<_> = profiles
            .iter()
            .filter(|p| p.distribution_eligible && !p.single_token && p.label.is_some())
            .collect();
        let layers = usable
            .first()
            .map(|p| p.layer_count())
            .ok_or_else(|| Error::InvalidInput("no labeled multi-token profiles to fit".into()))?;
        if let Some(bad) = usable.iter().find(|p| p.layer_count() != layers) {
            return Err(Error::record(
                &bad.example_id,
                format!("{} layers, expected {layers}", bad.layer_count()),
            ));
        }
        let build = |class: Label| -> Result<Vec<LayerCdf>> {
            (0..layers)
                .map(|l| {
                    let values = usable
                        .iter()
                        .filter(|p| p.label == Some(class))
                        .map(|p| p.mean_cos[l])
                        .collect();
                    LayerCdf::new(l, class, values)
                })
                .collect()
        };
        Ok(CdfBank {
            delta,
            per_layer_correct: build(Label::Correct)?,
            per_layer_incorrect: build(Label::Incorrect)?,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.per_layer_correct.len()
    }

    pub fn layer(&self, layer: usize, class: Label) -> Result<&LayerCdf> {
        let set = match class {
            Label::Correct => &self.per_layer_correct,
            Label::Incorrect => &self.per_layer_incorrect,
        };
        set.get(layer).ok_or_else(|| {
            Error::InvalidInput(format!(
                "layer {layer} outside bank of {} layers",
                set.len()
            ))
        })
    }

    /// Checks the structural invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput("bank delta must be positive".into()));
        }
        if self.per_layer_correct.len() != self.per_layer_incorrect.len()
            || self.per_layer_correct.is_empty()
        {
            return Err(Error::InvalidInput(
                "bank classes disagree on layer count".into(),
            ));
        }
        for (class, set) in [
            (Label::Correct, &self.per_layer_correct),
            (Label::Incorrect, &self.per_layer_incorrect),
        ] {
            for (l, c) in set.iter().enumerate() {
                let sorted = c.sorted_values.windows(2).all(|w| w[0] <= w[1]);
                if c.layer != l || c.class_tag != class || c.sorted_values.is_empty() || !sorted {
                    return Err(Error::InvalidInput(format!(
                        "malformed {} CDF at layer {l}",
                        class.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("bank", e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bank: CdfBank =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        bank.validate()?;
        Ok(bank)
    }
}

fn distance_weight(x: f64, mu: f64, form: DistanceForm) -> f64 {
    match form {
        DistanceForm::Symmetric => (1.0 - (x - mu).abs()).clamp(0.0, 1.0),
        DistanceForm::Literal => 1.0 - (x - mu),
    }
}

/// Inverse-distance weights `(w_correct, w_incorrect)` of `x` against each
/// class's train mean.
pub fn weight_distance(bank: &CdfBank, layer: usize, x: f64) -> Result<(f64, f64)> {
    weight_distance_with(bank, layer, x, DistanceForm::Symmetric)
}

pub fn weight_distance_with(
    bank: &CdfBank,
    layer: usize,
    x: f64,
    form: DistanceForm,
) -> Result<(f64, f64)> {
    let c = bank.layer(layer, Label::Correct)?;
    let i = bank.layer(layer, Label::Incorrect)?;
    Ok((
        distance_weight(x, c.mean, form),
        distance_weight(x, i.mean, form),
    ))
}

/// `1 - |P(X ≤ x) - P(X ≥ x)|` for one class's CDF.
pub fn tail_balance(cdf: &LayerCdf, x: f64) -> f64 {
    let below_or_eq = ecdf_at(cdf, x);
    // P(X < x) is the left limit of the CDF at x.
    let strictly_below = ecdf_left_limit(cdf, x);
    let above_or_eq = 1.0 - strictly_below;
    (1.0 - (below_or_eq - above_or_eq).abs()).clamp(0.0, 1.0)
}

fn ecdf_left_limit(cdf: &LayerCdf, x: f64) -> f64 {
    let v = &cdf.sorted_values;
    let n = v.len();
    if x <= v[0] {
        return 0.0;
    }
    if x > v[n - 1] {
        return 1.0;
    }
    // v[k-1] < x <= v[k]
    let k = v.partition_point(|&s| s < x);
    if n == 1 {
        return 0.0;
    }
    let (lo, hi) = (v[k - 1], v[k]);
    let frac = (x - lo) / (hi - lo);
    (((k - 1) as f64 + frac) / (n - 1) as f64).clamp(0.0, 1.0)
}

/// Tail-balance weights `(w_correct, w_incorrect)`.
pub fn weight_cdf_properties(bank: &CdfBank, layer: usize, x: f64) -> Result<(f64, f64)> {
    let c = bank.layer(layer, Label::Correct)?;
    let i = bank.layer(layer, Label::Incorrect)?;
    Ok((tail_balance(c, x), tail_balance(i, x)))
}

/// Combines class-conditional probabilities and weights.
pub fn combine(
    p_correct: f64,
    p_incorrect: f64,
    w_correct: f64,
    w_incorrect: f64,
    mode: Combine,
) -> f64 {
    match mode {
        Combine::Corrected => 0.5 * (p_correct * w_correct + p_incorrect * w_incorrect),
        Combine::Literal => 0.5 * (p_correct * w_correct + p_correct * w_incorrect),
    }
}

/// Label-free approximation of the interval probability at one layer.
pub fn approx_p_cdf(bank: &CdfBank, layer: usize, x: f64, approx: Approximation) -> Result<f64> {
    let c = bank.layer(layer, Label::Correct)?;
    let i = bank.layer(layer, Label::Incorrect)?;
    let p_c = p_cdf(c, x, bank.delta);
    let p_i = p_cdf(i, x, bank.delta);
    let (w_c, w_i) = match approx.strategy {
        Strategy::Distance => weight_distance_with(bank, layer, x, approx.distance_form)?,
        Strategy::CdfProperties => weight_cdf_properties(bank, layer, x)?,
    };
    Ok(combine(p_c, p_i, w_c, w_i, approx.combine))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cdf(values: &[f64]) -> LayerCdf {
        LayerCdf::new(0, Label::Correct, values.to_vec()).unwrap()
    }

    fn bank(mu_c: f64, mu_i: f64) -> CdfBank {
        CdfBank {
            delta: 0.1,
            per_layer_correct: vec![LayerCdf::new(0, Label::Correct, vec![mu_c]).unwrap()],
            per_layer_incorrect: vec![LayerCdf::new(0, Label::Incorrect, vec![mu_i]).unwrap()],
        }
    }

    fn uniform_sample(n: usize, seed: u64) -> LayerCdf {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cdf(&(0..n)
            .map(|_| rng.random_range(0.0..1.0))
            .collect::<Vec<_>>())
    }

    #[test]
    fn ecdf_edges() {
        assert_eq!(ecdf_at(&cdf(&[0.2, 0.4, 0.6]), 0.6), 1.0);
        assert_eq!(ecdf_at(&cdf(&[0.2, 0.4]), 0.1), 0.0);
        assert!((ecdf_at(&cdf(&[0.0, 1.0]), 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interpolation_within_step_band() {
        // A step ECDF at 0.5 over {0, 1} is 0.5; the band 0.5 ± 0.25 holds.
        let c = cdf(&[0.0, 1.0]);
        let step = c.sorted_values.iter().filter(|&&v| v <= 0.5).count() as f64 / 2.0;
        assert!((ecdf_at(&c, 0.5) - step).abs() <= 0.25);
    }

    #[test]
    fn single_value_is_a_step() {
        let c = cdf(&[0.3]);
        assert_eq!(ecdf_at(&c, 0.29), 0.0);
        assert_eq!(ecdf_at(&c, 0.3), 1.0);
    }

    #[test]
    fn mean_matches_arithmetic_mean() {
        let c = cdf(&[0.5, 0.1, 0.3]);
        assert_eq!(c.sorted_values, vec![0.1, 0.3, 0.5]);
        assert!((c.mean - 0.3).abs() < 1e-12);
    }

    #[test]
    fn p_cdf_cases() {
        let c = cdf(&[0.4, 0.45, 0.5, 0.55, 0.6]);
        assert_eq!(p_cdf(&c, -0.5, 0.1), 0.0);
        assert_eq!(p_cdf(&c, 0.5, 0.5), 1.0);
        // uniform(0, 1): true mass in [0.4, 0.6] is 0.2
        let u = uniform_sample(1000, 1);
        assert!((p_cdf(&u, 0.5, 0.1) - 0.2).abs() < 0.05);
    }

    #[test]
    fn distance_weights() {
        let b = bank(0.8, 0.3);
        assert_eq!(weight_distance(&b, 0, 0.8).unwrap().0, 1.0);
        let (wc, wi) = weight_distance(&b, 0, 0.7).unwrap();
        assert!((wc - 0.9).abs() < 1e-12 && (wi - 0.6).abs() < 1e-12);
        assert_eq!(weight_distance(&b, 0, -0.5).unwrap().0, 0.0);
        let (lc, _) = weight_distance_with(&b, 0, 0.6, DistanceForm::Literal).unwrap();
        assert!((lc - 1.2).abs() < 1e-12);
    }

    #[test]
    fn cdf_property_weights() {
        let c = cdf(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert!((tail_balance(&c, 0.3) - 1.0).abs() < 1e-12);
        assert_eq!(tail_balance(&c, 0.0), 0.0);
        let u = uniform_sample(2000, 2);
        assert!((tail_balance(&u, 0.75) - 0.5).abs() < 0.05);
    }

    #[test]
    fn combine_modes() {
        let corrected = combine(0.8, 0.2, 1.0, 0.5, Combine::Corrected);
        let literal = combine(0.8, 0.2, 1.0, 0.5, Combine::Literal);
        assert!((corrected - 0.45).abs() < 1e-12);
        assert!((literal - 0.60).abs() < 1e-12);
        assert_eq!(combine(0.4, 0.4, 0.7, 0.7, Combine::Corrected), 0.4 * 0.7);
        assert_eq!(combine(0.4, 0.4, 0.7, 0.7, Combine::Literal), 0.4 * 0.7);
        assert_eq!(combine(0.6, 0.3, 1.0, 0.0, Combine::Corrected), 0.5 * 0.6);
    }

    #[test]
    fn approx_outside_support_is_zero() {
        let b = CdfBank {
            delta: 0.1,
            per_layer_correct: vec![cdf(&[0.6, 0.7, 0.8])],
            per_layer_incorrect: vec![LayerCdf::new(0, Label::Incorrect, vec![0.2, 0.3]).unwrap()],
        };
        for strategy in [Strategy::Distance, Strategy::CdfProperties] {
            let a = Approximation {
                strategy,
                ..Default::default()
            };
            assert_eq!(approx_p_cdf(&b, 0, -0.9, a).unwrap(), 0.0);
        }
        assert!(approx_p_cdf(&b, 3, 0.5, Approximation::default()).is_err());
    }

    #[test]
    fn fit_skips_ineligible_profiles() {
        use crate::similarity::{AnswerSimilarityProfile, SpanChoice};
        let mk = |id: &str, m: f64, label: Label, eligible: bool| AnswerSimilarityProfile {
            example_id: id.into(),
            mean_cos: vec![m, m],
            std_cos: vec![0.0, 0.0],
            answer_token_count: 3,
            span_used: SpanChoice::Predicted,
            single_token: false,
            label: Some(label),
            distribution_eligible: eligible,
        };
        let profiles = vec![
            mk("a", 0.9, Label::Correct, true),
            mk("b", 0.7, Label::Correct, true),
            mk("c", 0.1, Label::Incorrect, true),
            mk("d", -0.9, Label::Incorrect, false),
        ];
        let b = CdfBank::fit(&profiles, 0.1).unwrap();
        assert_eq!(b.layer_count(), 2);
        assert_eq!(b.per_layer_incorrect[1].sorted_values, vec![0.1]);
        assert!((b.per_layer_correct[0].mean - 0.8).abs() < 1e-12);
        b.validate().unwrap();
        assert!(CdfBank::fit(&profiles[..2], 0.1).is_err());
    }
}
