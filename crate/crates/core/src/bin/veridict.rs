use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use veridict::cdf::{Approximation, CdfBank, Combine, DistanceForm, Strategy, DEFAULT_DELTA};
use veridict::classifier::{
    average, evaluate, train_with_report, FfnnModel, HiddenActivation, SeedResult, SeedRuns,
    TrainConfig,
};
use veridict::features::{assemble, read_features, write_features, FeatureContext, FeatureSet};
use veridict::ingest::{load_corpus, strip_corpus, validate_manifest, write_corpus};
use veridict::linalg::TsneConfig;
use veridict::pipeline::{run_pipeline, PipelineConfig};
use veridict::report::{
    class_curves, cluster_plot, error_card, render_curves_svg, Bandwidth, CurveKind,
};
use veridict::similarity::{profile_corpus, read_profiles, write_profiles, SpanChoice};
use veridict::stats::{layer_analysis, render_table, TTestVariant};
use veridict::synth::{generate, SynthConfig};
use veridict::{Error, Label, Result, Split};

/// Predict span-QA answer correctness from hidden-state geometry.
///
/// Exit codes: 0 success, 1 invalid input data, 2 runtime failure.
#[derive(Parser)]
#[command(name = "veridict", version)]
struct Cli {
    /// Worker threads for per-example work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest and its blob; prints one diagnostic per problem.
    Validate { manifest: PathBuf },
    /// Per-layer answer-span cosine profiles.
    Profile {
        manifest: PathBuf,
        #[arg(long, default_value = "predicted")]
        span: SpanChoice,
        #[arg(long, default_value_t = 0.95)]
        retention: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-layer, per-class empirical CDFs on train profiles.
    FitCdf {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build classifier inputs for a feature scheme (e.g. `raw`, `heuristic+approx_concat`).
    Features(FeaturesArgs),
    /// Train one model per seed.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// JSON training config; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "12,34,56,78,90")]
        seeds: Vec<u64>,
        /// Hidden-layer nonlinearity: identity, relu or tanh.
        #[arg(long)]
        hidden_activation: Option<HiddenActivation>,
        /// Output path; `<seed>` is replaced by each seed.
        #[arg(long, default_value = "model_<seed>.json")]
        out: String,
    },
    /// Score one or more models; several models are averaged.
    Eval {
        #[arg(long, required = true)]
        model: Vec<PathBuf>,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Per-layer t-tests with Bonferroni correction, as a Markdown table.
    Stats {
        #[arg(long)]
        profiles: PathBuf,
        /// JSON-Lines `{"example_id", "label"}` overriding the profile labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        family: usize,
        #[arg(long, default_value = "welch")]
        variant: TTestVariant,
        #[arg(long)]
        out: PathBuf,
    },
    /// Figures and error cards.
    #[command(subcommand)]
    Plot(PlotCommand),
    /// Run every stage end to end from a JSON config; flags override it.
    Pipeline(PipelineArgs),
    /// Write a synthetic labeled corpus with a planted late-layer effect.
    Synth {
        #[arg(long, default_value_t = 400)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "train", value_parser = parse_enum::<Split>)]
        split: Split,
        /// JSON generator config; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FeaturesArgs {
    manifest: PathBuf,
    #[arg(long, default_value = "raw")]
    scheme: FeatureSet,
    /// Predicted-span profiles; computed from the manifest when omitted.
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long, default_value = "distance", value_parser = parse_enum::<Strategy>)]
    strategy: Strategy,
    #[arg(long, default_value = "corrected", value_parser = parse_enum::<Combine>)]
    combine: Combine,
    #[arg(long, default_value = "symmetric", value_parser = parse_enum::<DistanceForm>)]
    distance_form: DistanceForm,
    #[arg(long, default_value_t = 0.95)]
    retention: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// Per-class density and CDF curves of mean cosine, one pair per layer.
    Curves {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// 2D projection of one example's tokens at one layer (1-based).
    Projection {
        manifest: PathBuf,
        #[arg(long)]
        example: String,
        #[arg(long)]
        layer: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Markdown error card for one example.
    Card {
        manifest: PathBuf,
        #[arg(long)]
        example: String,
        /// Profiles to read the cosine vector from.
        #[arg(long)]
        profiles: PathBuf,
        /// `scheme=label` verdicts to list, e.g. `heuristic=incorrect`.
        #[arg(long = "prediction")]
        predictions: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<FeatureSet>,
    #[arg(long, value_parser = parse_enum::<Strategy>)]
    strategy: Option<Strategy>,
    #[arg(long, value_parser = parse_enum::<Combine>)]
    combine: Option<Combine>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    retention: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Skip CDF fitting; requires `--bank` for schemes that need one.
    #[arg(long)]
    no_fit_cdf: bool,
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long)]
    family: Option<usize>,
    #[arg(long)]
    variant: Option<TTestVariant>,
    /// Hidden-layer nonlinearity: identity, relu or tanh.
    #[arg(long)]
    hidden_activation: Option<HiddenActivation>,
    #[arg(long)]
    no_plots: bool,
    #[arg(long)]
    no_cache: bool,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(
        s.replace('-', "_").to_lowercase(),
    ))
    .map_err(|e| e.to_string())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        location: path.display().to_string(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_owned(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

#[derive(Deserialize)]
struct LabelLine {
    example_id: String,
    label: Label,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { manifest } => {
            let diagnostics = validate_manifest(&manifest)?;
            for d in &diagnostics {
                let id = d.example_id.as_deref().unwrap_or("-");
                println!("{}:{}: [{id}] {}", manifest.display(), d.line, d.message);
            }
            if diagnostics.is_empty() {
                println!("{}: ok", manifest.display());
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Profile {
            manifest,
            span,
            retention,
            out,
        } => {
            let corpus = strip_corpus(&load_corpus(&manifest)?)?;
            let profiles: Vec<_> = profile_corpus(&corpus, &[span], retention)?
                .into_iter()
                .flatten()
                .collect();
            write_profiles(&out, &profiles)?;
            eprintln!("profiled {} examples", profiles.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::FitCdf {
            profiles,
            delta,
            out,
        } => {
            let bank = CdfBank::fit(&read_profiles(&profiles)?, delta)?;
            bank.save(&out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Features(args) => features(args),
        Command::Train {
            features,
            config,
            seeds,
            hidden_activation,
            out,
        } => {
            let mut base: TrainConfig = match config {
                Some(p) => read_json(&p)?,
                None => TrainConfig::default(),
            };
            if let Some(a) = hidden_activation {
                base.hidden_activation = a;
            }
            let data = read_features(&features)?;
            for seed in seeds {
                let cfg = TrainConfig {
                    seed,
                    ..base.clone()
                };
                let (model, report) = train_with_report(&data, &cfg)?;
                let path = PathBuf::from(out.replace("<seed>", &seed.to_string()));
                model.save(&path)?;
                eprintln!(
                    "seed {seed}: {} epochs, final loss {:.6} -> {}",
                    report.epoch_losses.len(),
                    report.epoch_losses.last().copied().unwrap_or(f64::NAN),
                    path.display()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            model,
            features,
            report,
        } => {
            let data = read_features(&features)?;
            let mut per_seed = Vec::new();
            for path in &model {
                let m = FfnnModel::load(path)?;
                per_seed.push(SeedResult {
                    seed: m.seed,
                    metrics: evaluate(&m, &data)?,
                    epochs: 0,
                });
            }
            let all: Vec<_> = per_seed.iter().map(|r| r.metrics.clone()).collect();
            let runs = SeedRuns {
                averaged: average(&all),
                per_seed,
            };
            let text = serde_json::to_string_pretty(&runs).expect("metrics serialize");
            write_text(&report, &text)?;
            println!(
                "macro F1 {:.4}, accuracy {:.4}",
                runs.averaged.macro_f1, runs.averaged.accuracy
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats {
            profiles,
            labels,
            family,
            variant,
            out,
        } => {
            let mut profiles = read_profiles(&profiles)?;
            if let Some(path) = labels {
                let text = fs::read_to_string(&path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                let mut map = BTreeMap::new();
                for (i, line) in text
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                {
                    let rec: LabelLine = serde_json::from_str(line).map_err(|e| Error::Json {
                        location: format!("{}:{}", path.display(), i + 1),
                        source: e,
                    })?;
                    map.insert(rec.example_id, rec.label);
                }
                for p in &mut profiles {
                    if let Some(&l) = map.get(&p.example_id) {
                        p.label = Some(l);
                    }
                }
            }
            let results = layer_analysis(&profiles, family, variant)?;
            let table = render_table("mean answer cosine, correct vs. incorrect", &results);
            write_text(&out, &table)?;
            print!("{table}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot(cmd) => plot(cmd),
        Command::Pipeline(args) => pipeline(args, cli.jobs),
        Command::Synth {
            count,
            seed,
            split,
            config,
            out,
        } => {
            let cfg: SynthConfig = match config {
                Some(p) => read_json(&p)?,
                None => SynthConfig::default(),
            };
            let corpus = generate(&cfg, count, seed, split)?;
            write_corpus(&corpus, &out)?;
            eprintln!("wrote {count} examples to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn features(args: FeaturesArgs) -> Result<ExitCode> {
    let corpus = strip_corpus(&load_corpus(&args.manifest)?)?;
    let corpus = corpus.with_examples(
        corpus
            .examples
            .iter()
            .filter(|e| e.answerable)
            .cloned()
            .collect(),
    );
    let profiles = match &args.profiles {
        Some(p) => {
            let by_id: BTreeMap<_, _> = read_profiles(p)?
                .into_iter()
                .map(|p| (p.example_id.clone(), p))
                .collect();
            corpus
                .examples
                .iter()
                .map(|e| {
                    by_id
                        .get(&e.example_id)
                        .cloned()
                        .ok_or_else(|| Error::InvalidRecord {
                            example_id: e.example_id.clone(),
                            reason: "no profile for this example".into(),
                        })
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => profile_corpus(&corpus, &[SpanChoice::Predicted], args.retention)?
            .into_iter()
            .flatten()
            .collect(),
    };
    let bank = args.bank.as_ref().map(CdfBank::load).transpose()?;
    let ctx = FeatureContext {
        bank: bank.as_ref(),
        approx: Approximation {
            strategy: args.strategy,
            combine: args.combine,
            distance_form: args.distance_form,
        },
    };
    let vectors = corpus
        .examples
        .iter()
        .zip(&profiles)
        .map(|(ex, p)| assemble(&args.scheme, Some(ex), Some(p), ctx))
        .collect::<Result<Vec<_>>>()?;
    write_features(&args.out, &vectors)?;
    eprintln!(
        "{} vectors of dimension {}",
        vectors.len(),
        vectors.first().map_or(0, |v| v.dim())
    );
    Ok(ExitCode::SUCCESS)
}

fn plot(cmd: PlotCommand) -> Result<ExitCode> {
    match cmd {
        PlotCommand::Curves { profiles, out_dir } => {
            let profiles = read_profiles(&profiles)?;
            let layers = profiles.first().map_or(0, |p| p.layer_count());
            for l in 0..layers {
                for (kind, tag) in [(CurveKind::Pdf, "density"), (CurveKind::Cdf, "cdf")] {
                    let curves = class_curves(&profiles, l, kind, Bandwidth::Auto)?;
                    for c in curves.iter().filter_map(|c| c.warning.as_ref()) {
                        eprintln!("warning: layer {}: {c}", l + 1);
                    }
                    let svg =
                        render_curves_svg(&format!("layer {} mean cosine ({tag})", l + 1), &curves);
                    write_text(&out_dir.join(format!("{tag}_layer{}.svg", l + 1)), &svg)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        PlotCommand::Projection {
            manifest,
            example,
            layer,
            seed,
            perplexity,
            out,
        } => {
            let corpus = load_corpus(&manifest)?;
            let dump = find_example(&corpus.examples, &example)?;
            let dump = veridict::ingest::strip_padding(dump)?;
            let mut cfg = TsneConfig::default();
            if let Some(p) = perplexity {
                cfg.perplexity = p;
            }
            let layer = layer
                .checked_sub(1)
                .ok_or_else(|| Error::InvalidInput("layers are numbered from 1".into()))?;
            let plot = cluster_plot(&dump, layer, seed, &cfg)?;
            write_text(&out, &plot.svg)?;
            Ok(ExitCode::SUCCESS)
        }
        PlotCommand::Card {
            manifest,
            example,
            profiles,
            predictions,
            out,
        } => {
            let corpus = load_corpus(&manifest)?;
            let dump = find_example(&corpus.examples, &example)?;
            let dump = veridict::ingest::strip_padding(dump)?;
            let profile = read_profiles(&profiles)?
                .into_iter()
                .find(|p| p.example_id == example)
                .ok_or_else(|| Error::InvalidInput(format!("no profile for `{example}`")))?;
            let mut by_scheme = BTreeMap::new();
            for p in &predictions {
                let (scheme, label) = p.split_once('=').ok_or_else(|| {
                    Error::InvalidInput(format!("expected scheme=label, got `{p}`"))
                })?;
                let label = parse_enum::<Label>(label).map_err(Error::InvalidInput)?;
                by_scheme.insert(scheme.to_string(), label);
            }
            let card = error_card(&dump, &profile, &by_scheme);
            match out {
                Some(path) => write_text(&path, &card)?,
                None => print!("{card}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn find_example<'a>(
    examples: &'a [veridict::HiddenDump],
    id: &str,
) -> Result<&'a veridict::HiddenDump> {
    examples
        .iter()
        .find(|e| e.example_id == id)
        .ok_or_else(|| Error::InvalidInput(format!("no example `{id}` in manifest")))
}

fn pipeline(args: PipelineArgs, jobs: Option<usize>) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = args.train {
        cfg.train_manifest = v;
    }
    if let Some(v) = args.test {
        cfg.test_manifest = v;
    }
    if let Some(v) = args.scheme {
        cfg.scheme = v;
    }
    if let Some(v) = args.strategy {
        cfg.strategy = v;
    }
    if let Some(v) = args.combine {
        cfg.combine = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.retention {
        cfg.retention = v;
    }
    if let Some(v) = args.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = args.out_dir {
        cfg.out_dir = v;
    }
    if args.no_fit_cdf {
        cfg.fit_cdf = false;
    }
    if let Some(v) = args.bank {
        cfg.bank_path = Some(v);
    }
    if let Some(v) = args.family {
        cfg.family = v;
    }
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(v) = args.hidden_activation {
        cfg.train.hidden_activation = v;
    }
    if args.no_plots {
        cfg.plots = false;
    }
    if args.no_cache {
        cfg.cache = false;
    }
    if jobs.is_some() {
        cfg.jobs = jobs;
    }
    let out = run_pipeline(&cfg)?;
    let m = &out.report;
    println!(
        "scheme {} (M = {}): macro F1 {:.4}, accuracy {:.4}; majority baseline macro F1 {:.4}",
        m.scheme,
        m.feature_dim,
        m.classifier.averaged.macro_f1,
        m.classifier.averaged.accuracy,
        m.majority_baseline.macro_f1
    );
    if !out.reused.is_empty() {
        eprintln!("reused: {}", out.reused.join(", "));
    }
    println!("artifacts in {}", out.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let (Some(n), false) = (cli.jobs, matches!(cli.command, Command::Pipeline(_))) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
