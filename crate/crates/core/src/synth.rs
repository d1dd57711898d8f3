//! Synthetic labeled dumps with a planted effect: answer tokens of correct
//! predictions form a tighter cluster from `onset_layer` onward.
//!
//! At every layer the answer tokens of a span are built as
//! `√c · u + √(1 - c) · n_j` with `u` and all `n_j` orthonormal, so their raw
//! pairwise cosine is exactly `c`. `c` is drawn per example and layer from a
//! normal around the layer's base level, plus `shift` for correct examples at
//! and after the onset. Everything else is isotropic noise.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Corpus, HiddenDump, Label, Span, Split};

const VOCAB: &[&str] = &[
    "the",
    "room",
    "was",
    "clean",
    "and",
    "quiet",
    "staff",
    "friendly",
    "breakfast",
    "good",
    "bathroom",
    "small",
    "great",
    "view",
    "bed",
    "comfortable",
    "price",
    "location",
    "near",
    "station",
    "pool",
    "warm",
    "noise",
    "street",
    "coffee",
    "fresh",
    "service",
    "slow",
    "wifi",
    "fast",
    "parking",
    "free",
    "shower",
    "hot",
    "window",
    "large",
    "city",
    "center",
    "walk",
    "minutes",
    "dinner",
    "menu",
    "lobby",
    "modern",
    "old",
    "carpet",
    "towels",
    "soft",
];
const QUESTION_VOCAB: &[&str] = &[
    "how", "what", "is", "the", "was", "were", "any", "does", "did", "like", "there",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub layers: usize,
    pub hidden_size: usize,
    pub question_len: usize,
    pub context_len: usize,
    /// Inclusive bounds on the answer length in tokens.
    pub min_answer_len: usize,
    pub max_answer_len: usize,
    pub correct_fraction: f64,
    /// Added to the answer-cluster cosine of correct examples.
    pub shift: f64,
    /// 1-based first layer carrying the shift.
    pub onset_layer: usize,
    /// Per-layer cosine level shared by both classes; length `layers`.
    pub base_cos: Vec<f64>,
    pub cos_sd: f64,
    /// Upper bound on trailing `[PAD]` tokens.
    pub max_padding: usize,
    pub unanswerable_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            layers: 6,
            hidden_size: 48,
            question_len: 6,
            context_len: 22,
            min_answer_len: 2,
            max_answer_len: 4,
            correct_fraction: 0.6,
            shift: 0.15,
            onset_layer: 4,
            base_cos: vec![0.10, 0.15, 0.25, 0.30, 0.30, 0.30],
            cos_sd: 0.04,
            max_padding: 3,
            unanswerable_fraction: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.layers > 0
            && self.base_cos.len() == self.layers
            && self.min_answer_len >= 2
            && self.min_answer_len <= self.max_answer_len
            && 2 * self.max_answer_len <= self.context_len
            && self.hidden_size > self.max_answer_len
            && (0.0..=1.0).contains(&self.correct_fraction)
            && (0.0..=1.0).contains(&self.unanswerable_fraction)
            && self.cos_sd >= 0.0
            && self.onset_layer >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid synth config {self:?}"
            )))
        }
    }

    fn cluster_cos(&self, layer: usize, tightened: bool, rng: &mut ChaCha8Rng) -> f64 {
        let mut c = self.base_cos[layer];
        if tightened && layer + 1 >= self.onset_layer {
            c += self.shift;
        }
        let z: f64 = StandardNormal.sample(rng);
        (c + self.cos_sd * z).clamp(0.0, 0.98)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let scale = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

/// `k` random orthonormal vectors in `R^d` (Gram-Schmidt).
fn orthonormal(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v = gaussian(rng, d);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Rows whose pairwise cosine is exactly `c`.
fn cluster(rng: &mut ChaCha8Rng, k: usize, d: usize, c: f64) -> Vec<Vec<f64>> {
    let basis = orthonormal(rng, k + 1, d);
    let (a, b) = (c.sqrt(), (1.0 - c).sqrt());
    basis[1..]
        .iter()
        .map(|n| basis[0].iter().zip(n).map(|(u, n)| a * u + b * n).collect())
        .collect()
}

fn example(cfg: &SynthConfig, id: String, rng: &mut ChaCha8Rng) -> HiddenDump {
    let d = cfg.hidden_size;
    let q = cfg.question_len;
    let ctx = cfg.context_len;
    let pad = rng.random_range(0..=cfg.max_padding);
    let real = q + ctx + 3;
    let t = real + pad;

    let question_span = Span::new(1, 1 + q);
    let context_span = Span::new(q + 2, q + 2 + ctx);

    let answerable = !rng.random_bool(cfg.unanswerable_fraction);
    let correct = answerable && rng.random_bool(cfg.correct_fraction);
    let len = rng.random_range(cfg.min_answer_len..=cfg.max_answer_len);
    let start = context_span.start + rng.random_range(0..=ctx - len);
    let predicted = Span::new(start, start + len);
    let gold = if correct {
        predicted
    } else {
        // a disjoint span elsewhere in the context
        let glen = rng.random_range(cfg.min_answer_len..=cfg.max_answer_len);
        loop {
            let s = context_span.start + rng.random_range(0..=ctx - glen);
            let g = Span::new(s, s + glen);
            if !g.overlaps(&predicted) {
                break g;
            }
        }
    };

    let mut tokens = Vec::with_capacity(t);
    tokens.push("[CLS]".to_string());
    for _ in 0..q {
        tokens.push(QUESTION_VOCAB.choose(rng).expect("vocab").to_string());
    }
    tokens.push("[SEP]".into());
    for _ in 0..ctx {
        tokens.push(VOCAB.choose(rng).expect("vocab").to_string());
    }
    tokens.push("[SEP]".into());
    tokens.extend(std::iter::repeat_n("[PAD]".to_string(), pad));

    let mut next_word = 0usize;
    let word_ids = tokens
        .iter()
        .map(|tok| {
            if tok.starts_with('[') {
                None
            } else {
                next_word += 1;
                Some(next_word - 1)
            }
        })
        .collect();

    let mut layers = vec![0f32; cfg.layers * t * d];
    for l in 0..cfg.layers {
        let mut rows: Vec<Vec<f64>> = (0..real).map(|_| gaussian(rng, d)).collect();
        let c = cfg.cluster_cos(l, correct, rng);
        for (i, v) in cluster(rng, predicted.len(), d, c).into_iter().enumerate() {
            rows[predicted.start + i] = v;
        }
        if gold != predicted {
            let c = cfg.cluster_cos(l, false, rng);
            for (i, v) in cluster(rng, gold.len(), d, c).into_iter().enumerate() {
                rows[gold.start + i] = v;
            }
        }
        let base = l * t * d;
        for (tok, row) in rows.iter().enumerate() {
            for (k, &x) in row.iter().enumerate() {
                layers[base + tok * d + k] = x as f32;
            }
        }
    }

    HiddenDump {
        example_id: id,
        tokens,
        word_ids: Some(word_ids),
        layer_count: cfg.layers,
        hidden_size: d,
        layers,
        question_span,
        context_span,
        predicted_answer_span: predicted,
        gold_answer_span: answerable.then_some(gold),
        pad_mask: (0..t).map(|i| i >= real).collect(),
        label: answerable.then(|| Label::from_spans(predicted, gold)),
        answerable,
    }
}

/// `count` examples drawn from a stream seeded with `seed`.
pub fn generate(cfg: &SynthConfig, count: usize, seed: u64, split: Split) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    let mut corpus = Corpus::new("synth", split);
    corpus
        .meta
        .insert("generator_seed".into(), serde_json::Value::from(seed));
    corpus.examples = (0..count)
        .map(|i| example(cfg, format!("synth-{tag}-{i:05}"), &mut rng))
        .collect();
    Ok(corpus)
}
