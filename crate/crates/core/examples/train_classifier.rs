//! Train the one-hidden-layer classifier on raw cosine features over five
//! seeds and compare it with the majority-class baseline.
//!
//! ```text
//! cargo run --release --example train_classifier
//! ```

use veridict::classifier::{majority_baseline, run_seeds, TrainConfig};
use veridict::features::{features_raw, FeatureVector};
use veridict::ingest::strip_corpus;
use veridict::pipeline::DEFAULT_SEEDS;
use veridict::similarity::profile_corpus;
use veridict::synth::{generate, SynthConfig};
use veridict::{Label, SpanChoice, Split};

fn raw_features(count: usize, seed: u64, split: Split) -> veridict::Result<Vec<FeatureVector>> {
    let corpus = strip_corpus(&generate(&SynthConfig::default(), count, seed, split)?)?;
    let corpus = corpus.with_examples(
        corpus
            .examples
            .iter()
            .filter(|e| e.answerable)
            .cloned()
            .collect(),
    );
    Ok(profile_corpus(&corpus, &[SpanChoice::Predicted], 0.95)?
        .iter()
        .map(|p| features_raw(&p[0]))
        .collect())
}

pub fn run_example(count: usize) -> veridict::Result<()> {
    let train = raw_features(count, 1, Split::Train)?;
    let test = raw_features(count, 2, Split::Test)?;
    let (runs, _) = run_seeds(&train, &test, &TrainConfig::default(), &DEFAULT_SEEDS)?;
    for r in &runs.per_seed {
        println!(
            "seed {:>2}: {:>2} epochs, macro F1 {:.4}",
            r.seed, r.epochs, r.metrics.macro_f1
        );
    }
    let labels = |v: &[FeatureVector]| v.iter().filter_map(|f| f.label).collect::<Vec<Label>>();
    let base = majority_baseline(&labels(&train), &labels(&test))?;
    println!(
        "mean macro F1 {:.4}, accuracy {:.4}; majority baseline {:.4}",
        runs.averaged.macro_f1, runs.averaged.accuracy, base.macro_f1
    );
    Ok(())
}

fn main() -> veridict::Result<()> {
    run_example(300)
}
