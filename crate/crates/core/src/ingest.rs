//! Hidden-representation dump format: reading, validation, padding removal
//! and population partitioning.
//!
//! A dump is a JSON-Lines manifest plus one companion blob of little-endian
//! IEEE-754 `f32` values. Each manifest record describes one example and
//! points at its tensor with `blob_offset`/`blob_length` (bytes). The tensor
//! is stored layer-major: `[layer][token][dim]`.
//!
//! The manifest may begin with a header line (`"kind": "header"`) naming the
//! blob file, the source/split tags and free-form exporter metadata. Without
//! a header the blob is the manifest path with a `.bin` extension.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Half-open token index range `[start, end)`, serialized as `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, idx: usize) -> bool {
        idx >= self.start && idx < self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Self {
        Span::new(v[0], v[1])
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

/// Whether the QA model's predicted span matched the gold span exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Correct,
    Incorrect,
}

impl Label {
    pub fn from_spans(predicted: Span, gold: Span) -> Self {
        if predicted == gold {
            Label::Correct
        } else {
            Label::Incorrect
        }
    }

    /// `1.0` for correct, `0.0` for incorrect; the classifier's target.
    pub fn as_target(self) -> f64 {
        match self {
            Label::Correct => 1.0,
            Label::Incorrect => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Correct => "correct",
            Label::Incorrect => "incorrect",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// One example's hidden states plus span metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenDump {
    pub example_id: String,
    pub tokens: Vec<String>,
    /// Optional subword-to-word map; tokens sharing an id form one word.
    pub word_ids: Option<Vec<Option<usize>>>,
    pub layer_count: usize,
    pub hidden_size: usize,
    /// Flat `[layer][token][dim]` tensor.
    pub layers: Vec<f32>,
    pub question_span: Span,
    pub context_span: Span,
    pub predicted_answer_span: Span,
    pub gold_answer_span: Option<Span>,
    pub pad_mask: Vec<bool>,
    pub label: Option<Label>,
    pub answerable: bool,
}

impl HiddenDump {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    /// Row-major `T × D` slice of one layer.
    pub fn layer(&self, layer: usize) -> &[f32] {
        let stride = self.token_count() * self.hidden_size;
        &self.layers[layer * stride..(layer + 1) * stride]
    }

    pub fn token_vector(&self, layer: usize, token: usize) -> &[f32] {
        let d = self.hidden_size;
        &self.layer(layer)[token * d..(token + 1) * d]
    }

    /// One layer as a `T × D` matrix of `f64`.
    pub fn layer_matrix(&self, layer: usize) -> DMatrix<f64> {
        let t = self.token_count();
        let d = self.hidden_size;
        let data = self.layer(layer);
        DMatrix::from_fn(t, d, |i, j| f64::from(data[i * d + j]))
    }

    /// Mean of the token vectors in `span` at `layer`.
    pub fn span_mean(&self, layer: usize, span: Span) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.hidden_size];
        for t in span.indices() {
            for (a, &v) in acc.iter_mut().zip(self.token_vector(layer, t)) {
                *a += f64::from(v);
            }
        }
        let n = span.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Case-folded words covering `span`, rebuilt from subword tokens.
    ///
    /// Tokens sharing a word id are joined; without a word map a token
    /// starting with `##` continues the previous word. Bracketed special
    /// tokens (`[CLS]`, `[SEP]`, ...) are dropped.
    pub fn span_words(&self, span: Span) -> Vec<String> {
        let mut words: Vec<String> = Vec::new();
        let mut last_word: Option<usize> = None;
        for t in span.indices() {
            let tok = self.tokens[t].as_str();
            if is_special_token(tok) {
                last_word = None;
                continue;
            }
            let piece = tok.strip_prefix("##").unwrap_or(tok);
            let continues = match &self.word_ids {
                Some(ids) => ids[t].is_some() && ids[t] == last_word,
                None => tok.starts_with("##") && !words.is_empty(),
            };
            if continues {
                if let Some(w) = words.last_mut() {
                    w.push_str(&piece.to_lowercase());
                }
            } else {
                let w = piece.split_whitespace().collect::<Vec<_>>().join(" ");
                if !w.is_empty() {
                    words.push(w.to_lowercase());
                }
            }
            last_word = self.word_ids.as_ref().and_then(|ids| ids[t]);
        }
        words
    }

    fn spans(&self) -> Vec<(&'static str, Span)> {
        let mut v = vec![
            ("question_span", self.question_span),
            ("context_span", self.context_span),
            ("predicted_answer_span", self.predicted_answer_span),
        ];
        if let Some(g) = self.gold_answer_span {
            v.push(("gold_answer_span", g));
        }
        v
    }

    /// Checks every record-level invariant.
    pub fn validate(&self) -> Result<()> {
        let id = &self.example_id;
        let t = self.token_count();
        if self.layer_count == 0 || self.hidden_size == 0 {
            return Err(Error::record(
                id,
                "layer_count and hidden_size must be positive",
            ));
        }
        if t == 0 {
            return Err(Error::record(id, "no tokens"));
        }
        if self.pad_mask.len() != t {
            return Err(Error::record(
                id,
                format!(
                    "pad_mask has {} entries for {t} tokens",
                    self.pad_mask.len()
                ),
            ));
        }
        if let Some(ids) = &self.word_ids {
            if ids.len() != t {
                return Err(Error::record(
                    id,
                    format!("word_ids has {} entries for {t} tokens", ids.len()),
                ));
            }
        }
        let expected = self.layer_count * t * self.hidden_size;
        if self.layers.len() != expected {
            return Err(Error::record(
                id,
                format!(
                    "tensor holds {} values, expected {} ({} layers x {t} tokens x {} dims)",
                    self.layers.len(),
                    expected,
                    self.layer_count,
                    self.hidden_size
                ),
            ));
        }
        if let Some(pos) = self.layers.iter().position(|v| !v.is_finite()) {
            return Err(Error::record(
                id,
                format!("non-finite tensor value at index {pos}"),
            ));
        }
        for (name, span) in self.spans() {
            if span.is_empty() {
                return Err(Error::record(
                    id,
                    format!("{name} [{}, {}) is empty", span.start, span.end),
                ));
            }
            if span.end > t {
                return Err(Error::record(
                    id,
                    format!(
                        "{name} [{}, {}) exceeds token count {t}",
                        span.start, span.end
                    ),
                ));
            }
            if span.indices().any(|i| self.pad_mask[i]) {
                return Err(Error::record(
                    id,
                    format!("{name} [{}, {}) overlaps padding", span.start, span.end),
                ));
            }
        }
        if self.question_span.overlaps(&self.context_span) {
            return Err(Error::record(id, "question_span and context_span overlap"));
        }
        if let (Some(label), Some(gold)) = (self.label, self.gold_answer_span) {
            let derived = Label::from_spans(self.predicted_answer_span, gold);
            if label != derived {
                return Err(Error::record(
                    id,
                    format!(
                        "label `{}` disagrees with exact span match (`{}`)",
                        label.as_str(),
                        derived.as_str()
                    ),
                ));
            }
        }
        Ok(())
    }
}

fn is_special_token(tok: &str) -> bool {
    (tok.starts_with('[') && tok.ends_with(']') && tok.len() > 2)
        || matches!(tok, "<s>" | "</s>" | "<pad>" | "<unk>" | "<cls>" | "<sep>")
}

/// An ordered collection of dumps from one source and split.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Corpus {
    pub examples: Vec<HiddenDump>,
    pub source_tag: String,
    pub split_tag: Split,
    /// Exporter metadata carried through from the manifest header.
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Corpus {
    pub fn new(source_tag: impl Into<String>, split_tag: Split) -> Self {
        Corpus {
            source_tag: source_tag.into(),
            split_tag,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn layer_count(&self) -> Option<usize> {
        self.examples.first().map(|e| e.layer_count)
    }

    pub fn hidden_size(&self) -> Option<usize> {
        self.examples.first().map(|e| e.hidden_size)
    }

    pub fn with_examples(&self, examples: Vec<HiddenDump>) -> Corpus {
        Corpus {
            examples,
            source_tag: self.source_tag.clone(),
            split_tag: self.split_tag,
            meta: self.meta.clone(),
        }
    }

    /// Validates every record and the corpus-wide shape agreement.
    pub fn validate(&self) -> Result<()> {
        let mut shape = None;
        for ex in &self.examples {
            ex.validate()?;
            match shape {
                None => shape = Some((ex.layer_count, ex.hidden_size)),
                Some((l, d)) if (l, d) != (ex.layer_count, ex.hidden_size) => {
                    return Err(Error::record(
                        &ex.example_id,
                        format!(
                            "shape {} layers x {} dims differs from corpus shape {l} x {d}",
                            ex.layer_count, ex.hidden_size
                        ),
                    ));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    kind: String,
    format_version: u32,
    blob: String,
    #[serde(default)]
    source_tag: Option<String>,
    #[serde(default)]
    split_tag: Option<Split>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, serde_json::Value>,
}

/// One manifest line, exactly as stored on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub format_version: u32,
    pub example_id: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_ids: Option<Vec<Option<usize>>>,
    pub layer_count: usize,
    pub hidden_size: usize,
    pub question_span: Span,
    pub context_span: Span,
    pub predicted_answer_span: Span,
    pub gold_answer_span: Option<Span>,
    pub pad_mask: Vec<bool>,
    pub label: Option<Label>,
    pub answerable: bool,
    pub blob_offset: u64,
    pub blob_length: u64,
}

/// Per-record outcome from [`validate_manifest`].
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub line: usize,
    pub example_id: Option<String>,
    pub message: String,
}

/// Companion blob path used when the manifest has no header.
pub fn default_blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

struct RawManifest {
    header: Option<ManifestHeader>,
    records: Vec<(
        usize,
        std::result::Result<ManifestRecord, serde_json::Error>,
    )>,
    blob_path: PathBuf,
}

fn read_manifest(path: &Path) -> Result<RawManifest> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        if idx == 0 && line.contains("\"kind\"") {
            let value: serde_json::Value = serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{}:{lineno}", path.display()), e))?;
            if value.get("kind").and_then(|k| k.as_str()) == Some("header") {
                let h: ManifestHeader = serde_json::from_value(value)
                    .map_err(|e| Error::json(format!("{}:{lineno}", path.display()), e))?;
                if h.format_version != FORMAT_VERSION {
                    return Err(Error::InvalidInput(format!(
                        "{}: unsupported format_version {}",
                        path.display(),
                        h.format_version
                    )));
                }
                header = Some(h);
                continue;
            }
        }
        records.push((lineno, serde_json::from_str::<ManifestRecord>(&line)));
    }
    let blob_path = match &header {
        Some(h) => path.parent().unwrap_or(Path::new(".")).join(&h.blob),
        None => default_blob_path(path),
    };
    Ok(RawManifest {
        header,
        records,
        blob_path,
    })
}

fn decode_record(record: ManifestRecord, blob: &[u8]) -> Result<HiddenDump> {
    let id = record.example_id.clone();
    if record.format_version != FORMAT_VERSION {
        return Err(Error::record(
            &id,
            format!("unsupported format_version {}", record.format_version),
        ));
    }
    let values = record.layer_count as u64 * record.tokens.len() as u64 * record.hidden_size as u64;
    if record.blob_length != values * 4 {
        return Err(Error::record(
            &id,
            format!(
                "blob_length {} does not match {} floats ({} bytes)",
                record.blob_length,
                values,
                values * 4
            ),
        ));
    }
    let end = record
        .blob_offset
        .checked_add(record.blob_length)
        .filter(|&e| e <= blob.len() as u64)
        .ok_or_else(|| {
            Error::record(
                &id,
                format!(
                    "blob range [{}, +{}) exceeds blob size {}",
                    record.blob_offset,
                    record.blob_length,
                    blob.len()
                ),
            )
        })?;
    let bytes = &blob[record.blob_offset as usize..end as usize];
    let layers = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let dump = HiddenDump {
        example_id: record.example_id,
        tokens: record.tokens,
        word_ids: record.word_ids,
        layer_count: record.layer_count,
        hidden_size: record.hidden_size,
        layers,
        question_span: record.question_span,
        context_span: record.context_span,
        predicted_answer_span: record.predicted_answer_span,
        gold_answer_span: record.gold_answer_span,
        pad_mask: record.pad_mask,
        label: record.label,
        answerable: record.answerable,
    };
    dump.validate()?;
    Ok(dump)
}

fn source_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Loads and fully validates a manifest + blob pair.
///
/// Any malformed record rejects the whole corpus, naming the offending
/// example.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let raw = read_manifest(path)?;
    let blob = if raw.records.is_empty() && !raw.blob_path.exists() {
        Vec::new()
    } else {
        fs::read(&raw.blob_path).map_err(|e| Error::io(&raw.blob_path, e))?
    };
    let mut corpus = match raw.header {
        Some(h) => Corpus {
            examples: Vec::new(),
            source_tag: h.source_tag.unwrap_or_else(|| source_from_path(path)),
            split_tag: h.split_tag.unwrap_or_default(),
            meta: h.meta,
        },
        None => Corpus::new(source_from_path(path), Split::Train),
    };
    for (lineno, record) in raw.records {
        let record = record.map_err(|e| Error::json(format!("{}:{lineno}", path.display()), e))?;
        corpus.examples.push(decode_record(record, &blob)?);
    }
    corpus.validate()?;
    Ok(corpus)
}

/// Validates a manifest without stopping at the first bad record.
///
/// Returns one diagnostic per problem; an empty list means the manifest is
/// valid.
pub fn validate_manifest(path: impl AsRef<Path>) -> Result<Vec<Diagnostic>> {
    let path = path.as_ref();
    let raw = read_manifest(path)?;
    let blob = match fs::read(&raw.blob_path) {
        Ok(b) => b,
        Err(_) if raw.records.is_empty() => Vec::new(),
        Err(e) => return Err(Error::io(&raw.blob_path, e)),
    };
    let mut diagnostics = Vec::new();
    let mut shape: Option<(usize, usize, String)> = None;
    for (line, record) in raw.records {
        match record {
            Err(e) => diagnostics.push(Diagnostic {
                line,
                example_id: None,
                message: format!("malformed record: {e}"),
            }),
            Ok(record) => {
                let id = record.example_id.clone();
                match decode_record(record, &blob) {
                    Err(e) => diagnostics.push(Diagnostic {
                        line,
                        example_id: Some(id),
                        message: e.to_string(),
                    }),
                    Ok(dump) => match &shape {
                        None => shape = Some((dump.layer_count, dump.hidden_size, id)),
                        Some((l, d, first)) if (*l, *d) != (dump.layer_count, dump.hidden_size) => {
                            diagnostics.push(Diagnostic {
                                line,
                                example_id: Some(id),
                                message: format!(
                                    "shape {} x {} differs from `{first}` ({l} x {d})",
                                    dump.layer_count, dump.hidden_size
                                ),
                            })
                        }
                        Some(_) => {}
                    },
                }
            }
        }
    }
    Ok(diagnostics)
}

/// Writes `corpus` as a manifest at `manifest_path` with a header line, and
/// its blob next to it (same stem, `.bin`).
pub fn write_corpus(corpus: &Corpus, manifest_path: impl AsRef<Path>) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let blob_path = default_blob_path(manifest_path);
    let blob_name = blob_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mf = fs::File::create(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let bf = fs::File::create(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let mut manifest = BufWriter::new(mf);
    let mut blob = BufWriter::new(bf);

    let header = ManifestHeader {
        kind: "header".into(),
        format_version: FORMAT_VERSION,
        blob: blob_name,
        source_tag: Some(corpus.source_tag.clone()),
        split_tag: Some(corpus.split_tag),
        meta: corpus.meta.clone(),
    };
    let io_err = |e| Error::io(manifest_path, e);
    serde_json::to_writer(&mut manifest, &header).map_err(|e| Error::json("manifest header", e))?;
    manifest.write_all(b"\n").map_err(io_err)?;

    let mut offset = 0u64;
    for ex in &corpus.examples {
        let length = ex.layers.len() as u64 * 4;
        let record = ManifestRecord {
            format_version: FORMAT_VERSION,
            example_id: ex.example_id.clone(),
            tokens: ex.tokens.clone(),
            word_ids: ex.word_ids.clone(),
            layer_count: ex.layer_count,
            hidden_size: ex.hidden_size,
            question_span: ex.question_span,
            context_span: ex.context_span,
            predicted_answer_span: ex.predicted_answer_span,
            gold_answer_span: ex.gold_answer_span,
            pad_mask: ex.pad_mask.clone(),
            label: ex.label,
            answerable: ex.answerable,
            blob_offset: offset,
            blob_length: length,
        };
        serde_json::to_writer(&mut manifest, &record)
            .map_err(|e| Error::json(ex.example_id.clone(), e))?;
        manifest.write_all(b"\n").map_err(io_err)?;
        for v in &ex.layers {
            blob.write_all(&v.to_le_bytes())
                .map_err(|e| Error::io(&blob_path, e))?;
        }
        offset += length;
    }
    manifest.flush().map_err(io_err)?;
    blob.flush().map_err(|e| Error::io(&blob_path, e))?;
    Ok(())
}

/// Removes padding rows from every layer and re-indexes all spans.
pub fn strip_padding(dump: &HiddenDump) -> Result<HiddenDump> {
    for (name, span) in dump.spans() {
        if span.end > dump.token_count() || span.indices().any(|i| dump.pad_mask[i]) {
            return Err(Error::record(
                &dump.example_id,
                format!("{name} overlaps the padding region (corrupt export)"),
            ));
        }
    }
    if !dump.pad_mask.iter().any(|&p| p) {
        return Ok(dump.clone());
    }

    // new_index[i] = number of kept tokens before i
    let mut new_index = Vec::with_capacity(dump.token_count() + 1);
    let mut kept = 0usize;
    for &pad in &dump.pad_mask {
        new_index.push(kept);
        if !pad {
            kept += 1;
        }
    }
    new_index.push(kept);
    let remap = |s: Span| Span::new(new_index[s.start], new_index[s.start] + s.len());

    let keep: Vec<usize> = (0..dump.token_count())
        .filter(|&i| !dump.pad_mask[i])
        .collect();
    let d = dump.hidden_size;
    let mut layers = Vec::with_capacity(dump.layer_count * keep.len() * d);
    for l in 0..dump.layer_count {
        for &t in &keep {
            layers.extend_from_slice(dump.token_vector(l, t));
        }
    }
    Ok(HiddenDump {
        example_id: dump.example_id.clone(),
        tokens: keep.iter().map(|&i| dump.tokens[i].clone()).collect(),
        word_ids: dump
            .word_ids
            .as_ref()
            .map(|ids| keep.iter().map(|&i| ids[i]).collect()),
        layer_count: dump.layer_count,
        hidden_size: d,
        layers,
        question_span: remap(dump.question_span),
        context_span: remap(dump.context_span),
        predicted_answer_span: remap(dump.predicted_answer_span),
        gold_answer_span: dump.gold_answer_span.map(remap),
        pad_mask: vec![false; keep.len()],
        label: dump.label,
        answerable: dump.answerable,
    })
}

/// Applies [`strip_padding`] to every example.
pub fn strip_corpus(corpus: &Corpus) -> Result<Corpus> {
    let examples = corpus
        .examples
        .iter()
        .map(strip_padding)
        .collect::<Result<Vec<_>>>()?;
    Ok(corpus.with_examples(examples))
}

/// Output of [`partition`].
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub answerable_correct: Corpus,
    pub answerable_incorrect: Corpus,
    /// Unanswerable examples and those whose gold answer is one token.
    pub skipped: Corpus,
}

/// True when an example can contribute to the per-class similarity
/// distributions: answerable, and the gold answer spans more than one token.
pub fn distribution_eligible(dump: &HiddenDump) -> bool {
    dump.answerable && dump.gold_answer_span.is_none_or(|g| g.len() > 1)
}

/// Splits a corpus into correct, incorrect and skipped populations.
pub fn partition(corpus: &Corpus) -> Result<Partition> {
    let mut correct = Vec::new();
    let mut incorrect = Vec::new();
    let mut skipped = Vec::new();
    for ex in &corpus.examples {
        if !ex.answerable {
            skipped.push(ex.clone());
            continue;
        }
        let label = ex
            .label
            .ok_or_else(|| Error::MissingLabel(ex.example_id.clone()))?;
        if !distribution_eligible(ex) {
            skipped.push(ex.clone());
            continue;
        }
        match label {
            Label::Correct => correct.push(ex.clone()),
            Label::Incorrect => incorrect.push(ex.clone()),
        }
    }
    Ok(Partition {
        answerable_correct: corpus.with_examples(correct),
        answerable_incorrect: corpus.with_examples(incorrect),
        skipped: corpus.with_examples(skipped),
    })
}
