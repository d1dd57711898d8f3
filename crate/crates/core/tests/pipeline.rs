use std::fs;
use std::path::Path;
use std::time::Instant;

use veridict::cdf::CdfBank;
use veridict::features::{read_features, FeatureSet};
use veridict::ingest::write_corpus;
use veridict::pipeline::{run_pipeline, PipelineConfig};
use veridict::synth::{generate, SynthConfig};
use veridict::{Error, Split};

fn synth_pair(dir: &Path, count: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let cfg = SynthConfig::default();
    let train = dir.join("train.jsonl");
    let test = dir.join("test.jsonl");
    write_corpus(&generate(&cfg, count, 21, Split::Train).unwrap(), &train).unwrap();
    write_corpus(&generate(&cfg, count, 22, Split::Test).unwrap(), &test).unwrap();
    (train, test)
}

fn config(dir: &Path, count: usize) -> PipelineConfig {
    let (train_manifest, test_manifest) = synth_pair(dir, count);
    PipelineConfig {
        train_manifest,
        test_manifest,
        out_dir: dir.join("out"),
        ..PipelineConfig::default()
    }
}

#[test]
fn small_run_emits_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 200);
    let start = Instant::now();
    let out = run_pipeline(&cfg).unwrap();
    assert!(start.elapsed().as_secs() < 60);

    let o = &cfg.out_dir;
    let mut expected = vec![
        "profiles_train.jsonl".to_string(),
        "profiles_test.jsonl".into(),
        "profiles_train_gold.jsonl".into(),
        "profiles_test_gold.jsonl".into(),
        "features_train.bin".into(),
        "features_test.bin".into(),
        "table1.md".into(),
        "metrics.json".into(),
        "run_manifest.json".into(),
        "cards.md".into(),
        "figures/density_layer1.svg".into(),
        "figures/cdf_layer6.svg".into(),
    ];
    for seed in &cfg.seeds {
        expected.push(format!("model_{seed}.json"));
    }
    for name in &expected {
        assert!(o.join(name).is_file(), "missing {name}");
    }
    assert!(fs::read_dir(o.join("figures")).unwrap().any(|e| e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .starts_with("projection_")));

    let r = &out.report;
    assert_eq!(r.feature_dim, 12);
    assert_eq!(r.train.examples, 200);
    assert_eq!(r.train.answerable, r.train.correct + r.train.incorrect);
    assert_eq!(r.classifier.per_seed.len(), 5);
    assert_eq!(r.stats_train.len(), 6);
    let features = read_features(o.join("features_test.bin")).unwrap();
    assert_eq!(features.len(), r.test.answerable);

    let table = fs::read_to_string(o.join("table1.md")).unwrap();
    assert_eq!(
        table
            .lines()
            .filter(|l| l.starts_with("| ") && !l.starts_with("| layer"))
            .count(),
        12
    );

    let metrics: serde_json::Value =
        serde_json::from_slice(&fs::read(o.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["scheme"], "raw");
}

#[test]
fn rerun_reuses_stages_and_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        plots: false,
        seeds: vec![1, 2],
        ..config(dir.path(), 80)
    };
    let first = run_pipeline(&cfg).unwrap();
    let metrics = fs::read(cfg.out_dir.join("metrics.json")).unwrap();
    let manifest = fs::read(cfg.out_dir.join("run_manifest.json")).unwrap();

    let second = run_pipeline(&cfg).unwrap();
    assert!(first.reused.is_empty());
    assert!(
        second.reused.iter().any(|s| s.starts_with("profile")),
        "{:?}",
        second.reused
    );
    assert_eq!(fs::read(cfg.out_dir.join("metrics.json")).unwrap(), metrics);
    assert_eq!(
        fs::read(cfg.out_dir.join("run_manifest.json")).unwrap(),
        manifest
    );
    assert_eq!(first.report, second.report);

    // a fresh directory without the cache gives the same numbers
    let cold = PipelineConfig {
        out_dir: dir.path().join("cold"),
        cache: false,
        ..cfg.clone()
    };
    run_pipeline(&cold).unwrap();
    assert_eq!(
        fs::read(cold.out_dir.join("metrics.json")).unwrap(),
        metrics
    );
}

#[test]
fn bank_scheme_writes_and_reuses_a_bank() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        scheme: "approx_weight+heuristic".parse::<FeatureSet>().unwrap(),
        plots: false,
        seeds: vec![5],
        ..config(dir.path(), 80)
    };
    let out = run_pipeline(&cfg).unwrap();
    assert_eq!(out.report.feature_dim, 12 + 9);
    let bank_path = cfg.out_dir.join("bank.json");
    let bank = CdfBank::load(&bank_path).unwrap();
    assert_eq!(bank.layer_count(), 6);

    // a supplied bank stands in for fitting
    let supplied = PipelineConfig {
        fit_cdf: false,
        bank_path: Some(bank_path.clone()),
        out_dir: dir.path().join("supplied"),
        ..cfg.clone()
    };
    let again = run_pipeline(&supplied).unwrap();
    assert_eq!(again.report.classifier, out.report.classifier);
}

#[test]
fn missing_bank_names_the_dependency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        scheme: "approx_concat".parse().unwrap(),
        fit_cdf: false,
        ..config(dir.path(), 20)
    };
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, Error::MissingDependency { .. }), "{err}");
    let msg = err.to_string();
    assert!(
        msg.contains("CDF bank") && msg.contains("approx_concat"),
        "{msg}"
    );
    assert!(!cfg.out_dir.join("metrics.json").exists());
}

#[test]
fn config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        scheme: "cdfaware_concat".parse().unwrap(),
        seeds: vec![3, 4],
        ..PipelineConfig::default()
    };
    let path = dir.path().join("cfg.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    assert_eq!(PipelineConfig::load(&path).unwrap(), cfg);

    fs::write(&path, r#"{"sheme": "raw"}"#).unwrap();
    assert!(PipelineConfig::load(&path).is_err());
}
