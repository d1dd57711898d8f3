//! Classifier inputs: cosine-profile schemes and the baseline feature sets.
//!
//! Scheme dimensions for `L` layers and hidden size `D`:
//!
//! | scheme            | M      |
//! |-------------------|--------|
//! | `raw`             | 2L     |
//! | `approx_weight`   | 2L     |
//! | `approx_concat`   | 4L     |
//! | `cdfaware_weight` | 2L     |
//! | `cdfaware_concat` | 4L     |
//! | `qa_concat`       | 2D     |
//! | `heuristic`       | 9      |
//! | `single_token`    | 1      |
//!
//! Schemes compose with `+` (plain concatenation), e.g. `heuristic+raw`.
//!
//! Weight mode multiplies both the mean and std halves of the raw vector by
//! the layer-matched probability. Concat mode appends the probability block
//! twice, giving `[mean, std, p, p]`.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cdf::{approx_p_cdf, p_cdf, Approximation, CdfBank};
use crate::error::{Error, Result};
use crate::ingest::{HiddenDump, Label};
use crate::similarity::{cosine, AnswerSimilarityProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Raw,
    ApproxWeight,
    ApproxConcat,
    CdfawareWeight,
    CdfawareConcat,
    QaConcat,
    Heuristic,
    /// 1.0 when the predicted answer had a single token and the cosine
    /// profile holds imputed values.
    SingleToken,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Raw,
        Scheme::ApproxWeight,
        Scheme::ApproxConcat,
        Scheme::CdfawareWeight,
        Scheme::CdfawareConcat,
        Scheme::QaConcat,
        Scheme::Heuristic,
        Scheme::SingleToken,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Raw => "raw",
            Scheme::ApproxWeight => "approx_weight",
            Scheme::ApproxConcat => "approx_concat",
            Scheme::CdfawareWeight => "cdfaware_weight",
            Scheme::CdfawareConcat => "cdfaware_concat",
            Scheme::QaConcat => "qa_concat",
            Scheme::Heuristic => "heuristic",
            Scheme::SingleToken => "single_token",
        }
    }

    /// Feature dimension for `layers` layers of width `hidden`.
    pub fn dim(self, layers: usize, hidden: usize) -> usize {
        match self {
            Scheme::Raw | Scheme::ApproxWeight | Scheme::CdfawareWeight => 2 * layers,
            Scheme::ApproxConcat | Scheme::CdfawareConcat => 4 * layers,
            Scheme::QaConcat => 2 * hidden,
            Scheme::Heuristic => HEURISTIC_DIM,
            Scheme::SingleToken => 1,
        }
    }

    pub fn needs_bank(self) -> bool {
        matches!(
            self,
            Scheme::ApproxWeight
                | Scheme::ApproxConcat
                | Scheme::CdfawareWeight
                | Scheme::CdfawareConcat
        )
    }

    pub fn needs_profile(self) -> bool {
        !matches!(self, Scheme::QaConcat | Scheme::Heuristic)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown feature scheme `{s}`")))
    }
}

/// One or more schemes concatenated in order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureSet(pub Vec<Scheme>);

impl FeatureSet {
    pub fn single(s: Scheme) -> Self {
        FeatureSet(vec![s])
    }

    pub fn dim(&self, layers: usize, hidden: usize) -> usize {
        self.0.iter().map(|s| s.dim(layers, hidden)).sum()
    }

    pub fn needs_bank(&self) -> bool {
        self.0.iter().any(|s| s.needs_bank())
    }

    pub fn needs_profile(&self) -> bool {
        self.0.iter().any(|s| s.needs_profile())
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|s| s.name()).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split('+')
            .map(Scheme::from_str)
            .collect::<Result<Vec<_>>>()?;
        if parts.is_empty() {
            return Err(Error::InvalidInput("empty feature scheme".into()));
        }
        Ok(FeatureSet(parts))
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub example_id: String,
    pub scheme: FeatureSet,
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// How a probability vector is merged with the raw cosine vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Weight,
    Concat,
}

fn merge_probabilities(profile: &AnswerSimilarityProfile, p: &[f64], mode: Mode) -> Vec<f64> {
    match mode {
        Mode::Weight => profile
            .mean_cos
            .iter()
            .zip(p)
            .map(|(m, w)| m * w)
            .chain(profile.std_cos.iter().zip(p).map(|(s, w)| s * w))
            .collect(),
        Mode::Concat => raw_values(profile)
            .into_iter()
            .chain(p.iter().copied())
            .chain(p.iter().copied())
            .collect(),
    }
}

fn raw_values(profile: &AnswerSimilarityProfile) -> Vec<f64> {
    profile
        .mean_cos
        .iter()
        .chain(&profile.std_cos)
        .copied()
        .collect()
}

fn check_bank(profile: &AnswerSimilarityProfile, bank: &CdfBank) -> Result<()> {
    if bank.layer_count() != profile.layer_count() {
        return Err(Error::DimensionMismatch {
            expected: bank.layer_count(),
            actual: profile.layer_count(),
        });
    }
    Ok(())
}

fn vector(profile: &AnswerSimilarityProfile, scheme: Scheme, values: Vec<f64>) -> FeatureVector {
    FeatureVector {
        example_id: profile.example_id.clone(),
        scheme: FeatureSet::single(scheme),
        values,
        label: profile.label,
    }
}

/// `[mean_cos(1..L), std_cos(1..L)]`.
pub fn features_raw(profile: &AnswerSimilarityProfile) -> FeatureVector {
    vector(profile, Scheme::Raw, raw_values(profile))
}

/// Per-layer approximated interval probabilities for `profile`.
pub fn approx_probabilities(
    profile: &AnswerSimilarityProfile,
    bank: &CdfBank,
    approx: Approximation,
) -> Result<Vec<f64>> {
    check_bank(profile, bank)?;
    profile
        .mean_cos
        .iter()
        .enumerate()
        .map(|(l, &x)| approx_p_cdf(bank, l, x, approx))
        .collect()
}

pub fn features_approx(
    profile: &AnswerSimilarityProfile,
    bank: &CdfBank,
    approx: Approximation,
    mode: Mode,
) -> Result<FeatureVector> {
    let p = approx_probabilities(profile, bank, approx)?;
    let scheme = match mode {
        Mode::Weight => Scheme::ApproxWeight,
        Mode::Concat => Scheme::ApproxConcat,
    };
    Ok(vector(
        profile,
        scheme,
        merge_probabilities(profile, &p, mode),
    ))
}

/// Interval probabilities under the example's true class. An upper bound
/// for the approximations, not usable at inference time.
pub fn features_cdf_aware(
    profile: &AnswerSimilarityProfile,
    bank: &CdfBank,
    mode: Mode,
) -> Result<FeatureVector> {
    check_bank(profile, bank)?;
    let label = profile
        .label
        .ok_or_else(|| Error::MissingLabel(profile.example_id.clone()))?;
    let p = profile
        .mean_cos
        .iter()
        .enumerate()
        .map(|(l, &x)| Ok(p_cdf(bank.layer(l, label)?, x, bank.delta)))
        .collect::<Result<Vec<_>>>()?;
    let scheme = match mode {
        Mode::Weight => Scheme::CdfawareWeight,
        Mode::Concat => Scheme::CdfawareConcat,
    };
    Ok(vector(
        profile,
        scheme,
        merge_probabilities(profile, &p, mode),
    ))
}

pub const HEURISTIC_DIM: usize = 9;

fn ngrams(words: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if words.len() >= n {
        for g in words.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped count of n-grams shared by `a` and `b`.
pub fn shared_ngrams(a: &[String], b: &[String], n: usize) -> usize {
    let ca = ngrams(a, n);
    let cb = ngrams(b, n);
    ca.iter()
        .map(|(g, &count)| count.min(cb.get(g).copied().unwrap_or(0)))
        .sum()
}

fn ngram_total(words: &[String], n: usize) -> usize {
    (words.len() + 1).saturating_sub(n)
}

/// Arithmetic mean of clipped n-gram precisions (n = 1..=3, over the orders
/// the candidate is long enough to have) against a single reference. No
/// brevity penalty.
pub fn bleu_overlap(candidate: &[String], reference: &[String]) -> f64 {
    let orders: Vec<f64> = (1..=3)
        .filter(|&n| ngram_total(candidate, n) > 0)
        .map(|n| shared_ngrams(candidate, reference, n) as f64 / ngram_total(candidate, n) as f64)
        .collect();
    if orders.is_empty() {
        0.0
    } else {
        orders.iter().sum::<f64>() / orders.len() as f64
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Nine baseline features, in order: answer token count; BLEU-style overlap
/// with the question; cosine of mean answer and mean question vectors at
/// the last layer; shared 1/2/3-gram counts normalized by the answer's
/// n-gram count, then by the question's.
pub fn features_heuristic(dump: &HiddenDump) -> Result<FeatureVector> {
    let answer = dump.predicted_answer_span;
    if answer.is_empty() {
        return Err(Error::record(&dump.example_id, "empty predicted span"));
    }
    let a_words = dump.span_words(answer);
    let q_words = dump.span_words(dump.question_span);
    let last = dump.layer_count - 1;
    let rep_cos = cosine(
        &dump.span_mean(last, answer),
        &dump.span_mean(last, dump.question_span),
    )
    .unwrap_or(0.0);

    let mut values = Vec::with_capacity(HEURISTIC_DIM);
    values.push(answer.len() as f64);
    values.push(bleu_overlap(&a_words, &q_words));
    values.push(rep_cos);
    let shared: Vec<usize> = (1..=3)
        .map(|n| shared_ngrams(&a_words, &q_words, n))
        .collect();
    for (n, &s) in (1..=3).zip(&shared) {
        values.push(ratio(s, ngram_total(&a_words, n)));
    }
    for (n, &s) in (1..=3).zip(&shared) {
        values.push(ratio(s, ngram_total(&q_words, n)));
    }
    Ok(FeatureVector {
        example_id: dump.example_id.clone(),
        scheme: FeatureSet::single(Scheme::Heuristic),
        values,
        label: dump.label,
    })
}

/// Mean last-layer answer vector followed by the mean last-layer question
/// vector.
pub fn features_qa_concat(dump: &HiddenDump) -> Result<FeatureVector> {
    if dump.predicted_answer_span.is_empty() || dump.question_span.is_empty() {
        return Err(Error::record(
            &dump.example_id,
            "empty answer or question span",
        ));
    }
    let last = dump.layer_count - 1;
    let mut values = dump.span_mean(last, dump.predicted_answer_span);
    values.extend(dump.span_mean(last, dump.question_span));
    Ok(FeatureVector {
        example_id: dump.example_id.clone(),
        scheme: FeatureSet::single(Scheme::QaConcat),
        values,
        label: dump.label,
    })
}

/// Most frequent label; ties go to `Incorrect`.
pub fn majority_predict(train_labels: &[Label]) -> Result<Label> {
    if train_labels.is_empty() {
        return Err(Error::InvalidInput("majority baseline needs labels".into()));
    }
    let correct = train_labels
        .iter()
        .filter(|&&l| l == Label::Correct)
        .count();
    Ok(if correct * 2 > train_labels.len() {
        Label::Correct
    } else {
        Label::Incorrect
    })
}

/// Inputs shared by every example when assembling a [`FeatureSet`].
#[derive(Clone, Copy, Debug, Default)]
pub struct FeatureContext<'a> {
    pub bank: Option<&'a CdfBank>,
    pub approx: Approximation,
}

/// Builds the concatenated feature vector for one example.
///
/// `profile` must be the predicted-span profile when the set needs one.
pub fn assemble(
    set: &FeatureSet,
    dump: Option<&HiddenDump>,
    profile: Option<&AnswerSimilarityProfile>,
    ctx: FeatureContext<'_>,
) -> Result<FeatureVector> {
    let need_profile = || {
        profile.ok_or_else(|| Error::MissingDependency {
            stage: "features",
            dependency: "a similarity profile".into(),
        })
    };
    let need_dump = || {
        dump.ok_or_else(|| Error::MissingDependency {
            stage: "features",
            dependency: "the hidden-state dump".into(),
        })
    };
    let need_bank = |s: Scheme| {
        ctx.bank.ok_or_else(|| Error::MissingDependency {
            stage: "features",
            dependency: format!("a fitted CDF bank for scheme `{}`", s.name()),
        })
    };

    let mut values = Vec::new();
    let mut id = None;
    let mut label = None;
    for &scheme in &set.0 {
        let part = match scheme {
            Scheme::Raw => features_raw(need_profile()?),
            Scheme::ApproxWeight => features_approx(
                need_profile()?,
                need_bank(scheme)?,
                ctx.approx,
                Mode::Weight,
            )?,
            Scheme::ApproxConcat => features_approx(
                need_profile()?,
                need_bank(scheme)?,
                ctx.approx,
                Mode::Concat,
            )?,
            Scheme::CdfawareWeight => {
                features_cdf_aware(need_profile()?, need_bank(scheme)?, Mode::Weight)?
            }
            Scheme::CdfawareConcat => {
                features_cdf_aware(need_profile()?, need_bank(scheme)?, Mode::Concat)?
            }
            Scheme::QaConcat => features_qa_concat(need_dump()?)?,
            Scheme::Heuristic => features_heuristic(need_dump()?)?,
            Scheme::SingleToken => {
                let p = need_profile()?;
                vector(p, scheme, vec![if p.single_token { 1.0 } else { 0.0 }])
            }
        };
        if let Some(prev) = &id {
            if prev != &part.example_id {
                return Err(Error::InvalidInput(format!(
                    "dump `{prev}` paired with profile `{}`",
                    part.example_id
                )));
            }
        }
        id = Some(part.example_id);
        label = label.or(part.label);
        values.extend(part.values);
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::record(
            id.clone().unwrap_or_default(),
            format!("non-finite feature at index {pos}"),
        ));
    }
    Ok(FeatureVector {
        example_id: id.unwrap_or_default(),
        scheme: set.clone(),
        values,
        label,
    })
}

/// JSON header line of a feature file; `count × dim` little-endian `f64`
/// values follow, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureFileHeader {
    pub format_version: u32,
    pub scheme: FeatureSet,
    pub dim: usize,
    pub count: usize,
    pub dtype: String,
    pub example_ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
}

const FEATURE_DTYPE: &str = "f64le";

pub fn write_features(path: impl AsRef<Path>, vectors: &[FeatureVector]) -> Result<()> {
    let path = path.as_ref();
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidInput("no feature vectors to write".into()))?;
    let dim = first.dim();
    if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::record(
            &bad.example_id,
            format!("feature dimension {} differs from {dim}", bad.dim()),
        ));
    }
    let header = FeatureFileHeader {
        format_version: 1,
        scheme: first.scheme.clone(),
        dim,
        count: vectors.len(),
        dtype: FEATURE_DTYPE.into(),
        example_ids: vectors.iter().map(|v| v.example_id.clone()).collect(),
        labels: vectors.iter().map(|v| v.label).collect(),
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| Error::json("feature header", e))?;
    bytes.push(b'\n');
    bytes.reserve(vectors.len() * dim * 8);
    for v in vectors {
        for x in &v.values {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = Vec::new();
    reader
        .read_until(b'\n', &mut line)
        .map_err(|e| Error::io(path, e))?;
    let header: FeatureFileHeader = serde_json::from_slice(&line)
        .map_err(|e| Error::json(format!("{} header", path.display()), e))?;
    if header.dtype != FEATURE_DTYPE
        || header.example_ids.len() != header.count
        || header.labels.len() != header.count
    {
        return Err(Error::InvalidInput(format!(
            "{}: inconsistent header",
            path.display()
        )));
    }
    let mut body = Vec::new();
    reader
        .read_to_end(&mut body)
        .map_err(|e| Error::io(path, e))?;
    if body.len() != header.count * header.dim * 8 {
        return Err(Error::InvalidInput(format!(
            "{}: body holds {} bytes, expected {}",
            path.display(),
            body.len(),
            header.count * header.dim * 8
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(header
        .example_ids
        .into_iter()
        .zip(header.labels)
        .enumerate()
        .map(|(i, (example_id, label))| FeatureVector {
            example_id,
            scheme: header.scheme.clone(),
            values: values[i * header.dim..(i + 1) * header.dim].to_vec(),
            label,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::LayerCdf;
    use crate::ingest::Span;
    use crate::similarity::SpanChoice;

    fn profile(mean: Vec<f64>, std: Vec<f64>) -> AnswerSimilarityProfile {
        AnswerSimilarityProfile {
            example_id: "p".into(),
            mean_cos: mean,
            std_cos: std,
            answer_token_count: 3,
            span_used: SpanChoice::Predicted,
            single_token: false,
            label: Some(Label::Correct),
            distribution_eligible: true,
        }
    }

    fn wide_bank(layers: usize) -> CdfBank {
        let mk = |l, c| LayerCdf::new(l, c, vec![-1.0, 1.0]).unwrap();
        CdfBank {
            delta: 5.0,
            per_layer_correct: (0..layers).map(|l| mk(l, Label::Correct)).collect(),
            per_layer_incorrect: (0..layers).map(|l| mk(l, Label::Incorrect)).collect(),
        }
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(|w| w.to_lowercase()).collect()
    }

    fn text_dump(question: &str, answer: &str) -> HiddenDump {
        let q = words(question);
        let a = words(answer);
        let mut tokens = vec!["[CLS]".to_string()];
        tokens.extend(q.iter().cloned());
        tokens.push("[SEP]".into());
        let c_start = tokens.len();
        tokens.push("ctx".into());
        let a_start = tokens.len();
        tokens.extend(a.iter().cloned());
        tokens.push("[SEP]".into());
        let t = tokens.len();
        let (l, d) = (2, 4);
        let layers = (0..l * t * d).map(|i| ((i % 7) as f32) - 3.0).collect();
        HiddenDump {
            example_id: "h".into(),
            tokens,
            word_ids: None,
            layer_count: l,
            hidden_size: d,
            layers,
            question_span: Span::new(1, 1 + q.len()),
            context_span: Span::new(c_start, t - 1),
            predicted_answer_span: Span::new(a_start, a_start + a.len()),
            gold_answer_span: None,
            pad_mask: vec![false; t],
            label: None,
            answerable: true,
        }
    }

    #[test]
    fn raw_layout() {
        let p = profile(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], vec![0.0; 6]);
        let f = features_raw(&p);
        assert_eq!(f.dim(), 12);
        assert_eq!(&f.values[..6], p.mean_cos.as_slice());
    }

    #[test]
    fn weight_with_unit_probabilities_is_raw() {
        let p = profile(vec![0.3, 0.5], vec![0.1, 0.2]);
        let merged = merge_probabilities(&p, &[1.0, 1.0], Mode::Weight);
        assert_eq!(merged, features_raw(&p).values);
        let zeroed = merge_probabilities(&p, &[0.0, 0.0], Mode::Weight);
        assert!(zeroed.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn approx_and_cdf_aware_dimensions() {
        let p = profile(vec![0.2; 6], vec![0.05; 6]);
        let b = wide_bank(6);
        let a = Approximation::default();
        assert_eq!(features_approx(&p, &b, a, Mode::Weight).unwrap().dim(), 12);
        assert_eq!(features_approx(&p, &b, a, Mode::Concat).unwrap().dim(), 24);
        assert_eq!(features_cdf_aware(&p, &b, Mode::Weight).unwrap().dim(), 12);
        assert_eq!(features_cdf_aware(&p, &b, Mode::Concat).unwrap().dim(), 24);
        assert!(features_approx(&p, &wide_bank(5), a, Mode::Weight).is_err());
    }

    #[test]
    fn cdf_aware_uses_true_class() {
        let p = profile(vec![0.2, 0.4], vec![0.0, 0.0]);
        let b = wide_bank(2);
        let f = features_cdf_aware(&p, &b, Mode::Concat).unwrap();
        for l in 0..2 {
            let expected = p_cdf(&b.per_layer_correct[l], p.mean_cos[l], b.delta);
            assert_eq!(f.values[4 + l], expected);
        }
        let mut unlabeled = p.clone();
        unlabeled.label = None;
        assert!(matches!(
            features_cdf_aware(&unlabeled, &b, Mode::Weight),
            Err(Error::MissingLabel(_))
        ));
    }

    #[test]
    fn heuristic_self_overlap() {
        let d = text_dump(
            "which river runs through town",
            "which river runs through town",
        );
        let f = features_heuristic(&d).unwrap();
        assert_eq!(f.dim(), 9);
        assert_eq!(f.values[0], 5.0);
        for v in &f.values[1..] {
            assert!((v - 1.0).abs() < 1e-12, "{:?}", f.values);
        }
    }

    #[test]
    fn heuristic_disjoint_and_table_example() {
        let d = text_dump(
            "Are there any reviews on bath options at this hotel ?",
            "great bathroom",
        );
        let f = features_heuristic(&d).unwrap();
        assert_eq!(f.values[0], 2.0);
        assert_eq!(f.values[1], 0.0);
        assert!(f.values[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn partial_overlap_counts() {
        // answer: "the old bridge", question: "where is the old mill": shared
        // unigrams {the, old}, bigram {the old}.
        let a = words("the old bridge");
        let q = words("where is the old mill");
        assert_eq!(shared_ngrams(&a, &q, 1), 2);
        assert_eq!(shared_ngrams(&a, &q, 2), 1);
        assert_eq!(shared_ngrams(&a, &q, 3), 0);
        let bleu = bleu_overlap(&a, &q);
        assert!((bleu - (2.0 / 3.0 + 1.0 / 2.0 + 0.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn qa_concat_means() {
        let d = text_dump("who won", "the cup");
        let f = features_qa_concat(&d).unwrap();
        assert_eq!(f.dim(), 8);
        let last = d.layer_count - 1;
        for j in 0..4 {
            let a: f64 = d
                .predicted_answer_span
                .indices()
                .map(|t| f64::from(d.token_vector(last, t)[j]))
                .sum::<f64>()
                / 2.0;
            assert!((f.values[j] - a).abs() < 1e-12);
        }
    }

    #[test]
    fn majority_tie_break() {
        use Label::*;
        assert_eq!(
            majority_predict(&[Correct, Correct, Incorrect]).unwrap(),
            Correct
        );
        assert_eq!(majority_predict(&[Correct, Incorrect]).unwrap(), Incorrect);
        assert!(majority_predict(&[]).is_err());
    }

    #[test]
    fn scheme_parsing() {
        let s: FeatureSet = "heuristic+approx_weight".parse().unwrap();
        assert_eq!(s.0, vec![Scheme::Heuristic, Scheme::ApproxWeight]);
        assert_eq!(s.to_string(), "heuristic+approx_weight");
        assert_eq!(s.dim(6, 768), 21);
        assert!("bogus".parse::<FeatureSet>().is_err());
    }

    #[test]
    fn assemble_requires_bank() {
        let p = profile(vec![0.2; 2], vec![0.0; 2]);
        let set = FeatureSet::single(Scheme::ApproxWeight);
        let err = assemble(&set, None, Some(&p), FeatureContext::default()).unwrap_err();
        assert!(err.to_string().contains("CDF bank"), "{err}");
    }
}
