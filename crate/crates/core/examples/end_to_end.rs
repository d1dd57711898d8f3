//! Generate a synthetic train/test pair with a planted late-layer effect,
//! run the whole pipeline on it and print the headline numbers.
//!
//! ```text
//! cargo run --release --example end_to_end [out_dir]
//! ```

use std::path::PathBuf;

use veridict::ingest::write_corpus;
use veridict::pipeline::{run_pipeline, PipelineConfig};
use veridict::synth::{generate, SynthConfig};
use veridict::Split;

pub fn run_example(out_dir: PathBuf, count: usize) -> veridict::Result<()> {
    let synth = SynthConfig::default();
    let data = out_dir.join("data");
    std::fs::create_dir_all(&data).map_err(|source| veridict::Error::Io {
        path: data.clone(),
        source,
    })?;
    let train = data.join("train.jsonl");
    let test = data.join("test.jsonl");
    write_corpus(&generate(&synth, count, 1, Split::Train)?, &train)?;
    write_corpus(&generate(&synth, count, 2, Split::Test)?, &test)?;

    let config = PipelineConfig {
        train_manifest: train,
        test_manifest: test,
        out_dir: out_dir.join("run"),
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&config)?;
    let m = &out.report;
    println!(
        "{} train / {} test examples, scheme {} (M = {})",
        m.train.answerable, m.test.answerable, m.scheme, m.feature_dim
    );
    println!(
        "macro F1 {:.4} (majority baseline {:.4}), accuracy {:.4}",
        m.classifier.averaged.macro_f1,
        m.majority_baseline.macro_f1,
        m.classifier.averaged.accuracy
    );
    println!("layer  diff    p(corr)   sig");
    for r in &m.stats_train {
        println!(
            "{:>5}  {:+.3}  {:.2e}  {}",
            r.layer + 1,
            r.mean_diff,
            r.p_corrected,
            r.significance_stars.stars()
        );
    }
    println!("artifacts in {}", out.out_dir.display());
    Ok(())
}

fn main() -> veridict::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("veridict-end-to-end"));
    run_example(out, 400)
}
