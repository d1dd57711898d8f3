//! Build every feature scheme, and a combined one, for a single example.
//!
//! ```text
//! cargo run --example feature_schemes
//! ```

use veridict::cdf::{CdfBank, DEFAULT_DELTA};
use veridict::features::{assemble, FeatureContext, FeatureSet, Scheme};
use veridict::ingest::strip_corpus;
use veridict::similarity::profile_corpus;
use veridict::synth::{generate, SynthConfig};
use veridict::{SpanChoice, Split};

pub fn run_example() -> veridict::Result<()> {
    let corpus = strip_corpus(&generate(&SynthConfig::default(), 60, 6, Split::Train)?)?;
    let answerable = corpus.with_examples(
        corpus
            .examples
            .iter()
            .filter(|e| e.answerable)
            .cloned()
            .collect(),
    );
    let profiles: Vec<_> = profile_corpus(&answerable, &[SpanChoice::Predicted], 0.95)?
        .into_iter()
        .map(|mut p| p.remove(0))
        .collect();
    let bank = CdfBank::fit(&profiles, DEFAULT_DELTA)?;
    let ctx = FeatureContext {
        bank: Some(&bank),
        ..FeatureContext::default()
    };

    let dump = &answerable.examples[0];
    let profile = &profiles[0];
    let mut sets: Vec<FeatureSet> = Scheme::ALL.into_iter().map(FeatureSet::single).collect();
    sets.push("raw+heuristic+single_token".parse()?);
    for set in &sets {
        let f = assemble(set, Some(dump), Some(profile), ctx)?;
        let head: Vec<String> = f.values.iter().take(4).map(|v| format!("{v:.3}")).collect();
        println!(
            "{:<28} M = {:>3}  [{}, ...]",
            set.to_string(),
            f.dim(),
            head.join(", ")
        );
    }
    Ok(())
}

fn main() -> veridict::Result<()> {
    run_example()
}
