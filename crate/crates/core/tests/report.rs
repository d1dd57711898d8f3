use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use veridict::linalg::TsneConfig;
use veridict::report::{
    class_curves, cluster_plot, density_estimate, error_card, render_curves_svg, token_roles,
    Bandwidth, CurveKind, DensityCurve, TokenRole,
};
use veridict::similarity::profile_example;
use veridict::synth::{generate, SynthConfig};
use veridict::{AnswerSimilarityProfile, HiddenDump, Label, Span, SpanChoice, Split};

/// 40 tokens of isotropic noise with a tight four-token answer cluster at
/// the last layer.
fn clustered_dump() -> HiddenDump {
    let (layers, t, d) = (2, 40, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let answer = Span::new(20, 24);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let centre: Vec<f64> = (0..d).map(|_| 6.0 * normal()).collect();
    let mut values = Vec::with_capacity(layers * t * d);
    for l in 0..layers {
        for tok in 0..t {
            for c in centre.iter() {
                let noise = normal();
                let v = if l == layers - 1 && answer.contains(tok) {
                    c + 0.05 * noise
                } else {
                    noise
                };
                values.push(v as f32);
            }
        }
    }
    HiddenDump {
        example_id: "clustered".into(),
        tokens: (0..t).map(|i| format!("w{i}")).collect(),
        word_ids: None,
        layer_count: layers,
        hidden_size: d,
        layers: values,
        question_span: Span::new(1, 8),
        context_span: Span::new(9, 39),
        predicted_answer_span: answer,
        gold_answer_span: Some(answer),
        pad_mask: vec![false; t],
        label: Some(Label::Correct),
        answerable: true,
    }
}

fn centroid(coords: &nalgebra::DMatrix<f64>, rows: &[usize]) -> [f64; 2] {
    let n = rows.len() as f64;
    let sx: f64 = rows.iter().map(|&r| coords[(r, 0)]).sum();
    let sy: f64 = rows.iter().map(|&r| coords[(r, 1)]).sum();
    [sx / n, sy / n]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[test]
fn answer_cluster_stands_apart_in_projection() {
    let dump = clustered_dump();
    let plot = cluster_plot(&dump, 1, 7, &TsneConfig::default()).unwrap();
    assert_eq!(plot.roles, token_roles(&dump));
    let with_role = |role: TokenRole| -> Vec<usize> {
        plot.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == role)
            .map(|(i, _)| i)
            .collect()
    };
    let answer = with_role(TokenRole::Answer);
    let context = with_role(TokenRole::Context);
    assert_eq!(answer.len(), 4);
    let a = centroid(&plot.coords, &answer);
    let radius = answer
        .iter()
        .map(|&r| dist([plot.coords[(r, 0)], plot.coords[(r, 1)]], a))
        .fold(0.0, f64::max);
    let gap = dist(a, centroid(&plot.coords, &context));
    assert!(gap > 2.0 * radius, "gap {gap}, radius {radius}");

    assert_eq!(plot.svg.matches("#d62728").count(), 4);
    assert_eq!(plot.svg.matches("#1f4fd1").count(), 7);
    assert_eq!(plot.svg.matches("<circle").count(), 40 - 4 - 7);
}

#[test]
fn projection_is_seed_deterministic() {
    let dump = clustered_dump();
    let cfg = TsneConfig::default();
    let a = cluster_plot(&dump, 0, 11, &cfg).unwrap();
    let b = cluster_plot(&dump, 0, 11, &cfg).unwrap();
    assert_eq!(a.svg, b.svg);
    assert_eq!(a.coords, b.coords);
}

#[test]
fn projection_layer_out_of_range() {
    let dump = clustered_dump();
    assert!(cluster_plot(&dump, 2, 0, &TsneConfig::default()).is_err());
}

/// Equal-tailed interval holding the central `mass` of a pdf curve.
fn central_interval(c: &DensityCurve, mass: f64) -> (f64, f64) {
    let mut cum = vec![0.0];
    for (x, y) in c.xs.windows(2).zip(c.ys.windows(2)) {
        cum.push(cum.last().unwrap() + 0.5 * (y[0] + y[1]) * (x[1] - x[0]));
    }
    let total = *cum.last().unwrap();
    let tail = (1.0 - mass) / 2.0 * total;
    let lo = cum.iter().position(|&m| m >= tail).unwrap();
    let hi = cum.iter().position(|&m| m >= total - tail).unwrap();
    (c.xs[lo], c.xs[hi])
}

fn profile(id: usize, label: Label, v: f64) -> AnswerSimilarityProfile {
    AnswerSimilarityProfile {
        example_id: format!("p{id}"),
        mean_cos: vec![v],
        std_cos: vec![0.0],
        answer_token_count: 2,
        span_used: SpanChoice::Gold,
        single_token: false,
        label: Some(label),
        distribution_eligible: true,
    }
}

#[test]
fn disjoint_classes_have_separate_mass() {
    let profiles: Vec<_> = (0..200)
        .map(|i| {
            let u = i as f64 / 199.0;
            if i % 2 == 0 {
                profile(i, Label::Correct, 0.5 + 0.4 * u)
            } else {
                profile(i, Label::Incorrect, -0.9 + 0.4 * u)
            }
        })
        .collect();
    let curves = class_curves(&profiles, 0, CurveKind::Pdf, Bandwidth::Auto).unwrap();
    assert_eq!(curves.len(), 2);
    assert_eq!(curves[0].class_tag, Some(Label::Correct));
    let (c_lo, _) = central_interval(&curves[0], 0.99);
    let (_, i_hi) = central_interval(&curves[1], 0.99);
    assert!(i_hi < c_lo, "incorrect up to {i_hi}, correct from {c_lo}");
    for c in &curves {
        assert!((c.integral() - 1.0).abs() < 0.01);
    }

    let svg = render_curves_svg("layer 1", &curves);
    assert!(svg.contains("#1f77b4") && svg.contains("#ff7f0e"));
    assert!(svg.starts_with("<svg"));
}

#[test]
fn cdf_curve_is_monotone_from_zero_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let values: Vec<f64> = (0..300)
        .map(|_| 0.3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let c = density_estimate(&values, CurveKind::Cdf, Bandwidth::Auto).unwrap();
    assert!(c.ys.windows(2).all(|w| w[0] <= w[1]));
    assert!(c.ys[0] <= 0.01 && *c.ys.last().unwrap() >= 0.99);
}

#[test]
fn card_for_a_synthetic_example() {
    let corpus = generate(&SynthConfig::default(), 4, 3, Split::Test).unwrap();
    let corpus = veridict::ingest::strip_corpus(&corpus).unwrap();
    let ex = corpus
        .examples
        .iter()
        .find(|e| e.answerable && e.label.is_some())
        .unwrap();
    let profile = profile_example(ex, SpanChoice::Predicted, 0.95).unwrap();
    let truth = ex.label.unwrap();
    let wrong = match truth {
        Label::Correct => Label::Incorrect,
        Label::Incorrect => Label::Correct,
    };
    let by_scheme = BTreeMap::from([("raw".to_string(), truth), ("heuristic".to_string(), wrong)]);
    let card = error_card(ex, &profile, &by_scheme);
    assert!(card.contains(&format!("- QA model: `{}`", truth.as_str())));
    assert!(card.contains(&format!("- raw: `{}` ✓", truth.as_str())));
    assert!(card.contains(&format!("- heuristic: `{}` ✗", wrong.as_str())));
    let cos_line = card
        .lines()
        .find(|l| l.starts_with("- cos per layer:"))
        .unwrap();
    assert_eq!(cos_line.matches(',').count(), profile.mean_cos.len() - 1);
}
