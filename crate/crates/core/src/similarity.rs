//! Per-layer answer-span cosine agreement.
//!
//! For every layer the full token matrix of one example is reduced with a
//! variance-retaining PCA, the answer rows are sliced out of the transformed
//! matrix, and the mean and population standard deviation of their pairwise
//! cosine similarities are recorded.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{distribution_eligible, Corpus, HiddenDump, Label, Span};
use crate::linalg::pca_retain;

/// Mean cosine assigned to single-token answers, where pairwise agreement is
/// undefined.
pub const SINGLE_TOKEN_MEAN: f64 = 1.0;

/// Which answer span a profile was computed over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpanChoice {
    Predicted,
    Gold,
}

impl std::str::FromStr for SpanChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "predicted" => Ok(SpanChoice::Predicted),
            "gold" => Ok(SpanChoice::Gold),
            other => Err(Error::InvalidInput(format!("unknown span `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerSimilarityProfile {
    pub example_id: String,
    /// Mean pairwise answer-token cosine, one entry per layer.
    pub mean_cos: Vec<f64>,
    /// Population std of the same pairwise cosines, one entry per layer.
    pub std_cos: Vec<f64>,
    pub answer_token_count: usize,
    pub span_used: SpanChoice,
    /// Set when the span had one token and the sentinel values were used.
    #[serde(default)]
    pub single_token: bool,
    #[serde(default)]
    pub label: Option<Label>,
    /// Whether the example may feed the per-class train distributions.
    #[serde(default = "default_true")]
    pub distribution_eligible: bool,
}

fn default_true() -> bool {
    true
}

impl AnswerSimilarityProfile {
    pub fn layer_count(&self) -> usize {
        self.mean_cos.len()
    }
}

/// Cosine similarity of two non-zero vectors, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Cosines of every row pair `j < k`, in row-major upper-triangle order.
pub fn pairwise_cosines(rows: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = rows.nrows();
    let norms: Vec<f64> = rows.row_iter().map(|r| r.norm()).collect();
    if norms.contains(&0.0) {
        return Err(Error::ZeroNormRow);
    }
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in 0..n {
        for k in (j + 1)..n {
            let dot = rows.row(j).dot(&rows.row(k));
            out.push((dot / (norms[j] * norms[k])).clamp(-1.0, 1.0));
        }
    }
    Ok(out)
}

/// Mean and population std of the pairwise row cosines of `a` (`T_a × P`).
///
/// The mean is `2 · Σ_{j<k} cos(a_j, a_k) / (T_a² − T_a)`.
pub fn avg_pairwise_cosine(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let ta = a.nrows();
    if ta < 2 {
        return Err(Error::InvalidInput(format!(
            "pairwise cosine needs at least 2 answer tokens, got {ta}"
        )));
    }
    let pairs = pairwise_cosines(a)?;
    let sum: f64 = pairs.iter().sum();
    let mean = 2.0 * sum / (ta * ta - ta) as f64;
    let var = pairs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / pairs.len() as f64;
    Ok((mean, var.sqrt()))
}

fn resolve_span(dump: &HiddenDump, choice: SpanChoice) -> Result<Span> {
    let span = match choice {
        SpanChoice::Predicted => dump.predicted_answer_span,
        SpanChoice::Gold => dump
            .gold_answer_span
            .ok_or_else(|| Error::record(&dump.example_id, "gold span requested but absent"))?,
    };
    if span.is_empty() || span.end > dump.token_count() {
        return Err(Error::record(
            &dump.example_id,
            "answer span empty or out of range",
        ));
    }
    Ok(span)
}

/// Profiles one (padding-stripped) example for each requested span, fitting
/// the per-layer PCA once and slicing every span from the same projection.
pub fn profile_spans(
    dump: &HiddenDump,
    spans: &[SpanChoice],
    retention: f64,
) -> Result<Vec<AnswerSimilarityProfile>> {
    let resolved = spans
        .iter()
        .map(|&c| resolve_span(dump, c))
        .collect::<Result<Vec<_>>>()?;
    let layers = dump.layer_count;
    let mut means = vec![Vec::with_capacity(layers); spans.len()];
    let mut stds = vec![Vec::with_capacity(layers); spans.len()];

    let needs_pca = resolved.iter().any(|s| s.len() > 1);
    for l in 0..layers {
        let transformed = if needs_pca {
            Some(pca_retain(&dump.layer_matrix(l), retention)?.transformed)
        } else {
            None
        };
        for (i, span) in resolved.iter().enumerate() {
            let (m, s) = match (&transformed, span.len()) {
                (Some(h), n) if n > 1 => {
                    avg_pairwise_cosine(&h.rows(span.start, span.len()).into_owned())?
                }
                _ => (SINGLE_TOKEN_MEAN, 0.0),
            };
            means[i].push(m);
            stds[i].push(s);
        }
    }

    let eligible = distribution_eligible(dump);
    Ok(spans
        .iter()
        .zip(resolved)
        .zip(means.into_iter().zip(stds))
        .map(
            |((&choice, span), (mean_cos, std_cos))| AnswerSimilarityProfile {
                example_id: dump.example_id.clone(),
                mean_cos,
                std_cos,
                answer_token_count: span.len(),
                span_used: choice,
                single_token: span.len() == 1,
                label: dump.label,
                distribution_eligible: eligible,
            },
        )
        .collect())
}

/// Per-layer similarity profile of one padding-stripped example.
pub fn profile_example(
    dump: &HiddenDump,
    span: SpanChoice,
    retention: f64,
) -> Result<AnswerSimilarityProfile> {
    Ok(profile_spans(dump, &[span], retention)?.remove(0))
}

/// Profiles every example in parallel, preserving corpus order.
///
/// Errors name the failing example.
pub fn profile_corpus(
    corpus: &Corpus,
    spans: &[SpanChoice],
    retention: f64,
) -> Result<Vec<Vec<AnswerSimilarityProfile>>> {
    corpus
        .examples
        .par_iter()
        .map(|ex| {
            profile_spans(ex, spans, retention)
                .map_err(|e| e.in_stage("profile", Some(&ex.example_id)))
        })
        .collect()
}

pub fn write_profiles(path: impl AsRef<Path>, profiles: &[AnswerSimilarityProfile]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in profiles {
        serde_json::to_writer(&mut w, p).map_err(|e| Error::json(&p.example_id, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_profiles(path: impl AsRef<Path>) -> Result<Vec<AnswerSimilarityProfile>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))?,
        );
    }
    Ok(out)
}
