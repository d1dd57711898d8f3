use nalgebra::DMatrix;
use proptest::prelude::*;

use veridict::cdf::{combine, ecdf_at, p_cdf, Combine, LayerCdf};
use veridict::features::{features_heuristic, FeatureSet, HEURISTIC_DIM};
use veridict::linalg::pca_retain;
use veridict::similarity::{avg_pairwise_cosine, profile_example};
use veridict::stats::{bonferroni, layer_analysis, t_test, Significance, TTestVariant};
use veridict::synth::{generate, SynthConfig};
use veridict::{AnswerSimilarityProfile, Label, SpanChoice, Split};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-5.0f64..5.0, rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn sized_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..7, 2usize..9).prop_flat_map(|(r, c)| matrix(r, c))
}

fn permuted_rows(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], j)])
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

/// Full-matrix oracle: mean over ordered pairs `j != k`.
fn brute_mean_cos(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut sum = 0.0;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                let (a, b) = (m.row(j), m.row(k));
                sum += a.dot(&b) / (a.norm() * b.norm());
            }
        }
    }
    sum / (n * n - n) as f64
}

fn nonzero_rows(m: &DMatrix<f64>) -> bool {
    m.row_iter().all(|r| r.norm() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn mean_cos_matches_full_matrix(m in sized_matrix()) {
        prop_assume!(nonzero_rows(&m));
        let (mean, std) = avg_pairwise_cosine(&m).unwrap();
        prop_assert!((mean - brute_mean_cos(&m)).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&mean));
        prop_assert!(std >= 0.0);
    }

    #[test]
    fn mean_cos_ignores_row_order_and_scale(
        (m, perm) in sized_matrix().prop_flat_map(|m| { let n = m.nrows(); (Just(m), permutation(n)) }),
        scales in proptest::collection::vec(0.01f64..100.0, 7),
    ) {
        prop_assume!(nonzero_rows(&m));
        let (mean, std) = avg_pairwise_cosine(&m).unwrap();
        let mut shuffled = permuted_rows(&m, &perm);
        for (i, mut row) in shuffled.row_iter_mut().enumerate() {
            row *= scales[i];
        }
        let (mean2, std2) = avg_pairwise_cosine(&shuffled).unwrap();
        prop_assert!((mean - mean2).abs() < 1e-12);
        prop_assert!((std - std2).abs() < 1e-9);
    }

    #[test]
    fn pca_ignores_row_order(
        (m, perm) in (3usize..8, 2usize..10)
            .prop_flat_map(|(r, c)| (matrix(r, c), permutation(r))),
        retention in 0.5f64..1.0,
    ) {
        let a = pca_retain(&m, retention).unwrap();
        let b = pca_retain(&permuted_rows(&m, &perm), retention).unwrap();
        prop_assert_eq!(a.n_components(), b.n_components());
        for (x, y) in a.explained_variance_ratio.iter().zip(&b.explained_variance_ratio) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        // sign convention makes the projection itself order-independent
        // unless two variances (nearly) tie
        let ratios = &a.explained_variance_ratio;
        let separated = ratios.windows(2).all(|w| w[0] - w[1] > 1e-6);
        if separated {
            let expected = permuted_rows(&a.transformed, &perm);
            prop_assert!((expected - &b.transformed).norm() < 1e-7 * (1.0 + m.norm()));
        }
    }

    #[test]
    fn pca_retention_is_reached_minimally(m in (3usize..8, 2usize..10).prop_flat_map(|(r, c)| matrix(r, c)),
                                          retention in 0.3f64..1.0) {
        let pca = pca_retain(&m, retention).unwrap();
        let cum: f64 = pca.explained_variance_ratio.iter().sum();
        let without_last: f64 = cum - pca.explained_variance_ratio.last().unwrap();
        prop_assert!(cum >= retention - 1e-12);
        prop_assert!(without_last < retention);
        prop_assert!(pca.n_components() < m.nrows());
    }

    #[test]
    fn ecdf_is_monotone_and_bounded(
        values in proptest::collection::vec(-1.0f64..1.0, 1..40),
        mut xs in proptest::collection::vec(-1.5f64..1.5, 2..30),
    ) {
        let cdf = LayerCdf::new(0, Label::Correct, values).unwrap();
        xs.sort_by(f64::total_cmp);
        let fs: Vec<f64> = xs.iter().map(|&x| ecdf_at(&cdf, x)).collect();
        prop_assert!(fs.iter().all(|f| (0.0..=1.0).contains(f)));
        prop_assert!(fs.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(ecdf_at(&cdf, 1.0), 1.0);
        prop_assert_eq!(ecdf_at(&cdf, -1.0 - 1e-9), 0.0);
    }

    #[test]
    fn window_mass_grows_with_delta(
        values in proptest::collection::vec(-1.0f64..1.0, 1..40),
        x in -1.2f64..1.2,
        d1 in 0.0f64..0.5,
        extra in 0.0f64..0.5,
    ) {
        let cdf = LayerCdf::new(3, Label::Incorrect, values).unwrap();
        let narrow = p_cdf(&cdf, x, d1);
        let wide = p_cdf(&cdf, x, d1 + extra);
        prop_assert!((0.0..=1.0).contains(&narrow));
        prop_assert!(narrow <= wide + 1e-15);
        prop_assert!(p_cdf(&cdf, x, 10.0) == 1.0);
    }

    #[test]
    fn corrected_combine_stays_in_unit_interval(
        p in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0)
    ) {
        let v = combine(p.0, p.1, p.2, p.3, Combine::Corrected);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v - 0.5 * (p.0 * p.2 + p.1 * p.3)).abs() < 1e-15);
    }

    #[test]
    fn swapping_samples_negates_t(
        a in proptest::collection::vec(-3.0f64..3.0, 2..30),
        b in proptest::collection::vec(-3.0f64..3.0, 2..30),
    ) {
        for variant in [TTestVariant::Welch, TTestVariant::Student] {
            let (Ok(ab), Ok(ba)) = (t_test(&a, &b, variant), t_test(&b, &a, variant)) else {
                continue;
            };
            prop_assert!((ab.t + ba.t).abs() < 1e-12 * (1.0 + ab.t.abs()));
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p));
        }
    }

    #[test]
    fn common_affine_map_keeps_student_t(
        a in proptest::collection::vec(-3.0f64..3.0, 3..20),
        b in proptest::collection::vec(-3.0f64..3.0, 3..20),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let Ok(base) = t_test(&a, &b, TTestVariant::Student) else { return Ok(()) };
        prop_assume!(base.p > 1e-12);
        let map = |v: &[f64]| v.iter().map(|x| x * scale + shift).collect::<Vec<_>>();
        let moved = t_test(&map(&a), &map(&b), TTestVariant::Student).unwrap();
        prop_assert!((moved.t - base.t).abs() < 1e-8 * (1.0 + base.t.abs()));
        prop_assert!((moved.p - base.p).abs() < 1e-8);
    }

    #[test]
    fn correction_never_lowers_p(p in 0.0f64..=1.0, family in 1usize..20) {
        let c = bonferroni(p, family);
        prop_assert!(c >= p && c <= 1.0);
        prop_assert_eq!(bonferroni(p, 1), p);
    }
}

fn profile(id: usize, label: Label, mean_cos: Vec<f64>) -> AnswerSimilarityProfile {
    AnswerSimilarityProfile {
        example_id: format!("p{id}"),
        std_cos: vec![0.1; mean_cos.len()],
        mean_cos,
        answer_token_count: 3,
        span_used: SpanChoice::Gold,
        single_token: false,
        label: Some(label),
        distribution_eligible: true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn family_of_one_reports_raw_p(
        correct in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 3..15),
        incorrect in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 3..15),
    ) {
        let profiles: Vec<_> = correct.into_iter().map(|m| (Label::Correct, m))
            .chain(incorrect.into_iter().map(|m| (Label::Incorrect, m)))
            .enumerate()
            .map(|(i, (l, m))| profile(i, l, m))
            .collect();
        let single = layer_analysis(&profiles, 1, TTestVariant::Welch).unwrap();
        let six = layer_analysis(&profiles, 6, TTestVariant::Welch).unwrap();
        for (s, f) in single.iter().zip(&six) {
            prop_assert_eq!(s.p_corrected, s.p_raw);
            prop_assert_eq!(f.p_raw, s.p_raw);
            prop_assert!(f.p_corrected >= f.p_raw);
            prop_assert_eq!(f.significance_stars, Significance::from_p(f.p_corrected));
        }
    }
}

/// Both classes drawn from one distribution: the corrected test should
/// almost never flag a layer.
#[test]
fn identical_distributions_are_not_significant() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut flagged = 0;
    let mut total = 0;
    for trial in 0..40 {
        let profiles: Vec<_> = (0..60)
            .map(|i| {
                let label = if i % 2 == 0 {
                    Label::Correct
                } else {
                    Label::Incorrect
                };
                let m = (0..6).map(|_| rng.random_range(-0.2..0.6)).collect();
                profile(trial * 100 + i, label, m)
            })
            .collect();
        for r in layer_analysis(&profiles, 6, TTestVariant::Welch).unwrap() {
            total += 1;
            if r.significance_stars != Significance::NotSignificant {
                flagged += 1;
            }
        }
    }
    // familywise rate is at most 5% per trial; 40 trials x 6 layers
    assert!(flagged <= 4, "{flagged} of {total} layers flagged");
}

#[test]
fn synthetic_profiles_rise_after_onset() {
    let cfg = SynthConfig::default();
    let corpus = generate(&cfg, 120, 5, Split::Train).unwrap();
    let corpus = veridict::ingest::strip_corpus(&corpus).unwrap();
    let mut sums = vec![[0.0f64; 2]; cfg.layers];
    let mut counts = [0usize; 2];
    for ex in corpus.examples.iter().filter(|e| e.answerable) {
        let p = profile_example(ex, SpanChoice::Gold, 0.95).unwrap();
        assert_eq!(p.mean_cos.len(), cfg.layers);
        assert_eq!(p.std_cos.len(), cfg.layers);
        let k = usize::from(ex.label == Some(Label::Incorrect));
        counts[k] += 1;
        for (l, v) in p.mean_cos.iter().enumerate() {
            sums[l][k] += v;
        }
    }
    let gap = |l: usize| sums[l][0] / counts[0] as f64 - sums[l][1] / counts[1] as f64;
    let onset = cfg.onset_layer - 1;
    assert!(gap(onset - 1) < 0.05, "pre-onset gap {}", gap(onset - 1));
    assert!(gap(onset) > 0.1, "onset gap {}", gap(onset));
}

#[test]
fn heuristic_features_stay_in_range() {
    let corpus = generate(&SynthConfig::default(), 60, 8, Split::Test).unwrap();
    let corpus = veridict::ingest::strip_corpus(&corpus).unwrap();
    for ex in &corpus.examples {
        let f = features_heuristic(ex).unwrap();
        assert_eq!(f.dim(), HEURISTIC_DIM);
        assert_eq!(f.scheme, "heuristic".parse::<FeatureSet>().unwrap());
        assert_eq!(f.values[0], ex.predicted_answer_span.len() as f64);
        assert!((-1.0..=1.0).contains(&f.values[2]));
        for (i, v) in f.values.iter().enumerate().skip(1) {
            if i != 2 {
                assert!(
                    (0.0..=1.0).contains(v),
                    "feature {} = {v} for {}",
                    i + 1,
                    ex.example_id
                );
            }
        }
    }
}
