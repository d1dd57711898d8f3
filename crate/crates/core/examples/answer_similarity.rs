//! Per-layer answer-token cosine profiles, averaged by class. Correct
//! answers cluster more tightly from the onset layer on.
//!
//! ```text
//! cargo run --example answer_similarity
//! ```

use veridict::ingest::strip_corpus;
use veridict::similarity::profile_corpus;
use veridict::synth::{generate, SynthConfig};
use veridict::{Label, SpanChoice, Split};

pub fn run_example(count: usize) -> veridict::Result<()> {
    let corpus = strip_corpus(&generate(&SynthConfig::default(), count, 5, Split::Train)?)?;
    let profiles = profile_corpus(&corpus, &[SpanChoice::Gold], 0.95)?;

    for class in [Label::Correct, Label::Incorrect] {
        let rows: Vec<_> = profiles
            .iter()
            .map(|p| &p[0])
            .filter(|p| p.label == Some(class) && !p.single_token)
            .collect();
        let layers = rows.first().map_or(0, |p| p.layer_count());
        let means: Vec<String> = (0..layers)
            .map(|l| {
                let m = rows.iter().map(|p| p.mean_cos[l]).sum::<f64>() / rows.len() as f64;
                format!("{m:+.3}")
            })
            .collect();
        println!(
            "{:<9} n={:<4} mean cos by layer: {}",
            class.as_str(),
            rows.len(),
            means.join(" ")
        );
    }
    Ok(())
}

fn main() -> veridict::Result<()> {
    run_example(200)
}
