//! Per-layer Welch t-tests of mean answer cosine, correct vs. incorrect,
//! with Bonferroni correction over the six layers.
//!
//! ```text
//! cargo run --example layer_significance
//! ```

use veridict::ingest::strip_corpus;
use veridict::similarity::profile_corpus;
use veridict::stats::{layer_analysis, render_table, TTestVariant};
use veridict::synth::{generate, SynthConfig};
use veridict::{SpanChoice, Split};

pub fn run_example(count: usize) -> veridict::Result<()> {
    let corpus = strip_corpus(&generate(&SynthConfig::default(), count, 7, Split::Train)?)?;
    let corpus = corpus.with_examples(
        corpus
            .examples
            .iter()
            .filter(|e| e.answerable)
            .cloned()
            .collect(),
    );
    let profiles: Vec<_> = profile_corpus(&corpus, &[SpanChoice::Gold], 0.95)?
        .into_iter()
        .map(|mut p| p.remove(0))
        .collect();
    let results = layer_analysis(&profiles, 6, TTestVariant::Welch)?;
    print!("{}", render_table("synthetic train split", &results));
    for r in &results {
        println!(
            "layer {}: t = {:+.2}, df = {:.1}, raw p = {:.2e} ({} vs {})",
            r.layer + 1,
            r.t,
            r.df,
            r.p_raw,
            r.n_correct,
            r.n_incorrect
        );
    }
    Ok(())
}

fn main() -> veridict::Result<()> {
    run_example(300)
}
