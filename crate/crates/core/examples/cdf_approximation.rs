//! Fit per-class CDFs on train profiles and compare the label-aware
//! interval probability with its label-free approximations on test
//! examples.
//!
//! ```text
//! cargo run --example cdf_approximation
//! ```

use veridict::cdf::{
    approx_p_cdf, p_cdf, Approximation, CdfBank, Combine, Strategy, DEFAULT_DELTA,
};
use veridict::ingest::strip_corpus;
use veridict::similarity::profile_corpus;
use veridict::synth::{generate, SynthConfig};
use veridict::{SpanChoice, Split};

pub fn run_example(count: usize) -> veridict::Result<()> {
    let synth = SynthConfig::default();
    let profile = |seed, split| -> veridict::Result<Vec<_>> {
        let corpus = strip_corpus(&generate(&synth, count, seed, split)?)?;
        Ok(profile_corpus(&corpus, &[SpanChoice::Predicted], 0.95)?
            .into_iter()
            .map(|mut p| p.remove(0))
            .filter(|p| p.label.is_some() && !p.single_token)
            .collect())
    };
    let train = profile(1, Split::Train)?;
    let test = profile(2, Split::Test)?;
    let bank = CdfBank::fit(&train, DEFAULT_DELTA)?;
    let layer = bank.layer_count() - 1;

    let modes = [
        (Strategy::Distance, Combine::Corrected),
        (Strategy::CdfProperties, Combine::Corrected),
        (Strategy::Distance, Combine::Literal),
    ];
    println!(
        "layer {}: id, mean cos, label-aware p, then approximations",
        layer + 1
    );
    for p in test.iter().take(8) {
        let x = p.mean_cos[layer];
        let label = p.label.expect("filtered to labeled profiles");
        let aware = p_cdf(bank.layer(layer, label)?, x, bank.delta);
        let approx: Vec<String> = modes
            .iter()
            .map(|&(strategy, combine)| {
                let a = Approximation {
                    strategy,
                    combine,
                    ..Approximation::default()
                };
                approx_p_cdf(&bank, layer, x, a).map(|v| format!("{v:.3}"))
            })
            .collect::<veridict::Result<_>>()?;
        println!(
            "{:<18} {x:+.3}  {aware:.3}  {}",
            p.example_id,
            approx.join("  ")
        );
    }
    Ok(())
}

fn main() -> veridict::Result<()> {
    run_example(200)
}
