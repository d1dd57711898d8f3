//! End-to-end run: manifests in, metrics, tables and figures out.
//!
//! Stage outputs land in `out_dir` under fixed names. Each stage's key is a
//! SHA-256 over its parameters and the hashes of its inputs; `cache.json`
//! remembers the key that produced every artifact, and a stage whose key is
//! unchanged reloads the artifact instead of recomputing it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cdf::{Approximation, CdfBank, Combine, DistanceForm, Strategy, DEFAULT_DELTA};
use crate::classifier::{
    evaluate, majority_baseline, train_with_report, FfnnModel, Metrics, SeedResult, SeedRuns,
    TrainConfig,
};
use crate::error::{Error, Result};
use crate::features::{
    assemble, read_features, write_features, FeatureContext, FeatureSet, FeatureVector, Scheme,
};
use crate::ingest::{default_blob_path, load_corpus, partition, strip_corpus, Corpus, Label};
use crate::linalg::TsneConfig;
use crate::report::{
    class_curves, cluster_plot, error_card, render_curves_svg, Bandwidth, CurveKind,
};
use crate::similarity::{
    profile_corpus, read_profiles, write_profiles, AnswerSimilarityProfile, SpanChoice,
};
use crate::stats::{layer_analysis, render_table, LayerTestResult, TTestVariant};

pub const DEFAULT_SEEDS: [u64; 5] = [12, 34, 56, 78, 90];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub scheme: FeatureSet,
    pub strategy: Strategy,
    pub combine: Combine,
    pub distance_form: DistanceForm,
    pub delta: f64,
    pub retention: f64,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// When false, a bank must come from `bank_path`.
    pub fit_cdf: bool,
    pub bank_path: Option<PathBuf>,
    pub family: usize,
    pub variant: TTestVariant,
    pub plots: bool,
    pub tsne: TsneConfig,
    /// Number of misclassified test examples written to `cards.md`.
    pub cards: usize,
    /// Worker threads for per-example stages; `None` uses every core.
    pub jobs: Option<usize>,
    pub cache: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train_manifest: PathBuf::new(),
            test_manifest: PathBuf::new(),
            scheme: FeatureSet::single(Scheme::Raw),
            strategy: Strategy::default(),
            combine: Combine::default(),
            distance_form: DistanceForm::default(),
            delta: DEFAULT_DELTA,
            retention: 0.95,
            train: TrainConfig::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            out_dir: PathBuf::from("veridict-out"),
            fit_cdf: true,
            bank_path: None,
            family: 6,
            variant: TTestVariant::default(),
            plots: true,
            tsne: TsneConfig::default(),
            cards: 5,
            jobs: None,
            cache: true,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn approximation(&self) -> Approximation {
        Approximation {
            strategy: self.strategy,
            combine: self.combine,
            distance_form: self.distance_form,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.train_manifest, &self.test_manifest] {
            if !p.is_file() {
                return Err(Error::InvalidInput(format!(
                    "manifest {} does not exist",
                    p.display()
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        if !(self.retention > 0.0 && self.retention <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "retention {} outside (0, 1]",
                self.retention
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidInput("jobs must be at least 1".into()));
        }
        self.train.validate()?;
        if let Some(dep) = self.missing_bank() {
            return Err(dep);
        }
        Ok(())
    }

    fn missing_bank(&self) -> Option<Error> {
        let scheme = self.scheme.0.iter().find(|s| s.needs_bank())?;
        if self.fit_cdf || self.bank_path.is_some() {
            return None;
        }
        Some(Error::MissingDependency {
            stage: "features",
            dependency: format!(
                "a fitted CDF bank for scheme `{}` (CDF fitting is disabled and no bank_path is set)",
                scheme.name()
            ),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub examples: usize,
    pub answerable: usize,
    pub correct: usize,
    pub incorrect: usize,
    pub skipped: usize,
}

/// Contents of `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scheme: FeatureSet,
    pub feature_dim: usize,
    pub train: SplitSummary,
    pub test: SplitSummary,
    pub classifier: SeedRuns,
    pub majority_baseline: Metrics,
    pub stats_train: Vec<LayerTestResult>,
    pub stats_test: Vec<LayerTestResult>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub report: MetricsReport,
    pub out_dir: PathBuf,
    /// Stages whose artifacts were reused from an earlier run.
    pub reused: Vec<String>,
    pub models: Vec<FfnnModel>,
}

#[derive(Serialize)]
struct InputHash {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    format_version: u32,
    tool_version: &'static str,
    config: &'a PipelineConfig,
    inputs: BTreeMap<&'static str, InputHash>,
    artifacts: BTreeMap<String, String>,
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn sha256_parts(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("plain data serializes")
}

/// Key-to-artifact bookkeeping kept in `out_dir/cache.json`.
struct StageCache {
    path: PathBuf,
    enabled: bool,
    keys: BTreeMap<String, String>,
    reused: Vec<String>,
}

impl StageCache {
    fn open(out_dir: &Path, enabled: bool) -> Self {
        let path = out_dir.join("cache.json");
        let keys = if enabled {
            fs::read_to_string(&path)
                .ok()
                .and_then(|t| serde_json::from_str(&t).ok())
                .unwrap_or_default()
        } else {
            BTreeMap::new()
        };
        StageCache {
            path,
            enabled,
            keys,
            reused: Vec::new(),
        }
    }

    /// Loads `artifact` when it was produced under `key`, otherwise computes
    /// and stores it.
    fn stage<T>(
        &mut self,
        name: &str,
        key: &str,
        artifact: &Path,
        load: impl FnOnce(&Path) -> Result<T>,
        compute: impl FnOnce() -> Result<T>,
        store: impl FnOnce(&Path, &T) -> Result<()>,
    ) -> Result<T> {
        if self.enabled
            && self.keys.get(name).map(String::as_str) == Some(key)
            && artifact.is_file()
        {
            if let Ok(v) = load(artifact) {
                self.reused.push(name.to_string());
                return Ok(v);
            }
        }
        let v = compute()?;
        store(artifact, &v)?;
        self.keys.insert(name.to_string(), key.to_string());
        Ok(v)
    }

    fn save(&self) -> Result<()> {
        write_file(
            &self.path,
            &serde_json::to_vec_pretty(&self.keys).expect("map serializes"),
        )
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn summary(corpus: &Corpus, answerable: &Corpus) -> SplitSummary {
    let count = |l| {
        answerable
            .examples
            .iter()
            .filter(|e| e.label == Some(l))
            .count()
    };
    SplitSummary {
        examples: corpus.len(),
        answerable: answerable.len(),
        correct: count(Label::Correct),
        incorrect: count(Label::Incorrect),
        skipped: corpus.len() - answerable.len(),
    }
}

fn load_split(manifest: &Path, stage: &'static str) -> Result<(Corpus, Corpus)> {
    let corpus = load_corpus(manifest).map_err(|e| e.in_stage(stage, None))?;
    let stripped = strip_corpus(&corpus).map_err(|e| e.in_stage(stage, None))?;
    // surfaces answerable examples without a label
    partition(&stripped).map_err(|e| e.in_stage(stage, None))?;
    let answerable: Vec<_> = stripped
        .examples
        .iter()
        .filter(|e| e.answerable)
        .cloned()
        .collect();
    let answerable = stripped.with_examples(answerable);
    Ok((stripped, answerable))
}

/// `(predicted, gold)` profiles for every example, order preserved.
type ProfilePair = (Vec<AnswerSimilarityProfile>, Vec<AnswerSimilarityProfile>);

fn profile_split(corpus: &Corpus, retention: f64) -> Result<ProfilePair> {
    let both = profile_corpus(
        corpus,
        &[SpanChoice::Predicted, SpanChoice::Gold],
        retention,
    )?;
    let mut predicted = Vec::with_capacity(both.len());
    let mut gold = Vec::with_capacity(both.len());
    for mut pair in both {
        gold.push(pair.pop().expect("two spans"));
        predicted.push(pair.pop().expect("two spans"));
    }
    Ok((predicted, gold))
}

fn build_features(
    set: &FeatureSet,
    corpus: &Corpus,
    profiles: &[AnswerSimilarityProfile],
    ctx: FeatureContext<'_>,
) -> Result<Vec<FeatureVector>> {
    use rayon::prelude::*;
    corpus
        .examples
        .par_iter()
        .zip(profiles.par_iter())
        .map(|(ex, p)| {
            assemble(set, Some(ex), Some(p), ctx)
                .map_err(|e| e.in_stage("features", Some(&ex.example_id)))
        })
        .collect()
}

/// Runs every stage and writes the artifact directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(|| run_stages(config)),
        None => run_stages(config),
    }
}

fn run_stages(config: &PipelineConfig) -> Result<PipelineOutput> {
    let out = &config.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut cache = StageCache::open(out, config.cache);

    let mut inputs = BTreeMap::new();
    for (name, blob_name, manifest) in [
        ("train_manifest", "train_blob", &config.train_manifest),
        ("test_manifest", "test_blob", &config.test_manifest),
    ] {
        inputs.insert(
            name,
            InputHash {
                path: manifest.clone(),
                sha256: sha256_file(manifest).map_err(|e| e.in_stage("load", None))?,
            },
        );
        let blob = blob_path(manifest)?;
        inputs.insert(
            blob_name,
            InputHash {
                sha256: sha256_file(&blob).map_err(|e| e.in_stage("load", None))?,
                path: blob,
            },
        );
    }
    let data_key = |split: &str| {
        sha256_parts(&[
            inputs[format!("{split}_manifest").as_str()]
                .sha256
                .as_bytes(),
            inputs[format!("{split}_blob").as_str()].sha256.as_bytes(),
        ])
    };
    let (train_key, test_key) = (data_key("train"), data_key("test"));

    let (train_all, train) = load_split(&config.train_manifest, "load")?;
    let (test_all, test) = load_split(&config.test_manifest, "load")?;

    // profiles
    let retention = config.retention.to_le_bytes();
    let mut profiles = BTreeMap::new();
    for (split, corpus, key) in [("train", &train, &train_key), ("test", &test, &test_key)] {
        let stage_key = sha256_parts(&[b"profile", key.as_bytes(), &retention]);
        let pred_path = out.join(format!("profiles_{split}.jsonl"));
        let gold_path = out.join(format!("profiles_{split}_gold.jsonl"));
        let gold_for_load = gold_path.clone();
        let gold_for_store = gold_path.clone();
        let pair = cache.stage(
            &format!("profile_{split}"),
            &stage_key,
            &pred_path,
            |p| Ok((read_profiles(p)?, read_profiles(&gold_for_load)?)),
            || profile_split(corpus, config.retention),
            |p, (pred, gold)| {
                write_profiles(p, pred)?;
                write_profiles(&gold_for_store, gold)
            },
        )?;
        profiles.insert(split, (stage_key, pair));
    }
    let (train_prof_key, (train_pred, train_gold)) = &profiles["train"];
    let (test_prof_key, (test_pred, test_gold)) = &profiles["test"];

    // CDF bank
    let bank = if config.scheme.needs_bank() {
        let bank = if config.fit_cdf {
            let key = sha256_parts(&[
                b"bank",
                train_prof_key.as_bytes(),
                &config.delta.to_le_bytes(),
            ]);
            cache.stage(
                "fit_cdf",
                &key,
                &out.join("bank.json"),
                |p| CdfBank::load(p),
                || CdfBank::fit(train_pred, config.delta).map_err(|e| e.in_stage("fit-cdf", None)),
                |p, b| b.save(p),
            )?
        } else {
            let path = config.bank_path.as_ref().expect("checked in validate");
            CdfBank::load(path).map_err(|e| e.in_stage("fit-cdf", None))?
        };
        Some(bank)
    } else {
        None
    };
    let bank_hash = bank
        .as_ref()
        .map(|b| sha256_parts(&[&to_json(b)]))
        .unwrap_or_default();

    // features
    let ctx = FeatureContext {
        bank: bank.as_ref(),
        approx: config.approximation(),
    };
    let scheme_name = config.scheme.to_string();
    let mut feats = BTreeMap::new();
    for (split, corpus, data, prof_key, pred) in [
        ("train", &train, &train_key, train_prof_key, train_pred),
        ("test", &test, &test_key, test_prof_key, test_pred),
    ] {
        let key = sha256_parts(&[
            b"features",
            scheme_name.as_bytes(),
            &to_json(&ctx.approx),
            bank_hash.as_bytes(),
            prof_key.as_bytes(),
            data.as_bytes(),
        ]);
        let v = cache.stage(
            &format!("features_{split}"),
            &key,
            &out.join(format!("features_{split}.bin")),
            |p| read_features(p),
            || build_features(&config.scheme, corpus, pred, ctx),
            |p, v| write_features(p, v),
        )?;
        feats.insert(split, (key, v));
    }
    let (train_feat_key, train_feats) = &feats["train"];
    let (_, test_feats) = &feats["test"];

    // classifier, one model per seed
    let mut per_seed = Vec::with_capacity(config.seeds.len());
    let mut models = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let cfg = TrainConfig {
            seed,
            ..config.train.clone()
        };
        let key = sha256_parts(&[b"train", train_feat_key.as_bytes(), &to_json(&cfg)]);
        let epochs_path = out.join(format!("model_{seed}.epochs"));
        let (model, epochs) = cache.stage(
            &format!("train_{seed}"),
            &key,
            &out.join(format!("model_{seed}.json")),
            |p| {
                let epochs = fs::read_to_string(&epochs_path)
                    .map_err(|e| Error::io(&epochs_path, e))?
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput("bad epoch count".into()))?;
                Ok((FfnnModel::load(p)?, epochs))
            },
            || {
                let (m, r) =
                    train_with_report(train_feats, &cfg).map_err(|e| e.in_stage("train", None))?;
                Ok((m, r.epoch_losses.len()))
            },
            |p, (m, epochs)| {
                m.save(p)?;
                write_file(&epochs_path, format!("{epochs}\n").as_bytes())
            },
        )?;
        let metrics = evaluate(&model, test_feats).map_err(|e| e.in_stage("eval", None))?;
        per_seed.push(SeedResult {
            seed,
            metrics,
            epochs,
        });
        models.push(model);
    }
    let all: Vec<Metrics> = per_seed.iter().map(|r| r.metrics.clone()).collect();
    let classifier = SeedRuns {
        averaged: crate::classifier::average(&all),
        per_seed,
    };

    let labels = |c: &Corpus| -> Vec<Label> { c.examples.iter().filter_map(|e| e.label).collect() };
    let baseline =
        majority_baseline(&labels(&train), &labels(&test)).map_err(|e| e.in_stage("eval", None))?;

    // per-layer significance on gold-span profiles
    let stats_train = layer_analysis(train_gold, config.family, config.variant)
        .map_err(|e| e.in_stage("stats", None))?;
    let stats_test = layer_analysis(test_gold, config.family, config.variant)
        .map_err(|e| e.in_stage("stats", None))?;
    let table = format!(
        "{}\n{}",
        render_table("train", &stats_train),
        render_table("test", &stats_test)
    );
    write_file(&out.join("table1.md"), table.as_bytes())?;

    let report = MetricsReport {
        scheme: config.scheme.clone(),
        feature_dim: train_feats.first().map_or(0, FeatureVector::dim),
        train: summary(&train_all, &train),
        test: summary(&test_all, &test),
        classifier,
        majority_baseline: baseline,
        stats_train,
        stats_test,
    };
    let metrics_json = serde_json::to_vec_pretty(&report).expect("report serializes");
    write_file(&out.join("metrics.json"), &metrics_json)?;

    if config.plots {
        write_figures(
            config,
            &train_gold[..],
            &test,
            test_feats,
            &test_pred[..],
            &models[0],
        )
        .map_err(|e| e.in_stage("plot", None))?;
    }

    let mut artifacts = BTreeMap::new();
    for entry in fs::read_dir(out).map_err(|e| Error::io(out, e))? {
        let path = entry.map_err(|e| Error::io(out, e))?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if path.is_file() && name != "run_manifest.json" && name != "cache.json" {
            artifacts.insert(name, sha256_file(&path)?);
        }
    }
    let manifest = RunManifest {
        format_version: 1,
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
        inputs,
        artifacts,
    };
    write_file(
        &out.join("run_manifest.json"),
        &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )?;
    cache.save()?;

    Ok(PipelineOutput {
        report,
        out_dir: out.clone(),
        reused: cache.reused,
        models,
    })
}

fn blob_path(manifest: &Path) -> Result<PathBuf> {
    // the header may name the blob; otherwise it sits next to the manifest
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let first = text.lines().next().unwrap_or_default();
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(first) {
        if v.get("kind").and_then(|k| k.as_str()) == Some("header") {
            if let Some(blob) = v.get("blob").and_then(|b| b.as_str()) {
                let p = PathBuf::from(blob);
                return Ok(if p.is_absolute() {
                    p
                } else {
                    manifest.parent().unwrap_or(Path::new(".")).join(p)
                });
            }
        }
    }
    Ok(default_blob_path(manifest))
}

fn write_figures(
    config: &PipelineConfig,
    train_gold: &[AnswerSimilarityProfile],
    test: &Corpus,
    test_feats: &[FeatureVector],
    test_pred: &[AnswerSimilarityProfile],
    model: &FfnnModel,
) -> Result<()> {
    let dir = config.out_dir.join("figures");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let layers = train_gold
        .first()
        .map_or(0, AnswerSimilarityProfile::layer_count);
    for l in 0..layers {
        for (kind, tag) in [(CurveKind::Pdf, "density"), (CurveKind::Cdf, "cdf")] {
            let curves = class_curves(train_gold, l, kind, Bandwidth::Auto)?;
            let svg = render_curves_svg(&format!("layer {} mean cosine ({tag})", l + 1), &curves);
            write_file(
                &dir.join(format!("{tag}_layer{}.svg", l + 1)),
                svg.as_bytes(),
            )?;
        }
    }

    // one projection per class at the last layer
    for class in [Label::Correct, Label::Incorrect] {
        if let Some(ex) = test
            .examples
            .iter()
            .find(|e| e.label == Some(class) && e.token_count() >= 4)
        {
            let layer = ex.layer_count - 1;
            let mut tsne = config.tsne.clone();
            tsne.perplexity = tsne.perplexity.min((ex.token_count() - 1) as f64 / 3.0);
            let plot = cluster_plot(ex, layer, config.seeds[0], &tsne)?;
            let name = format!("projection_{}_layer{}.svg", class.as_str(), layer + 1);
            write_file(&dir.join(name), plot.svg.as_bytes())?;
        }
    }

    let scheme = config.scheme.to_string();
    let mut cards = String::from("# Misclassified test examples\n\n");
    let mut written = 0;
    for ((ex, feat), prof) in test.examples.iter().zip(test_feats).zip(test_pred) {
        if written == config.cards {
            break;
        }
        let pred = model.predict(&feat.values)?;
        if ex.label.is_some_and(|l| l != pred) {
            let mut by_scheme = BTreeMap::new();
            by_scheme.insert(scheme.clone(), pred);
            cards.push_str(&error_card(ex, prof, &by_scheme));
            cards.push('\n');
            written += 1;
        }
    }
    write_file(&config.out_dir.join("cards.md"), cards.as_bytes())
}
