//! Density and CDF curves of mean answer cosine per class, plus an error
//! card for one example.
//!
//! ```text
//! cargo run --example figures [out_dir]
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use veridict::ingest::strip_corpus;
use veridict::report::{class_curves, error_card, render_curves_svg, Bandwidth, CurveKind};
use veridict::similarity::profile_corpus;
use veridict::synth::{generate, SynthConfig};
use veridict::{Label, SpanChoice, Split};

pub fn run_example(out_dir: PathBuf) -> veridict::Result<()> {
    let io = |path: &PathBuf| {
        let path = path.clone();
        move |source| veridict::Error::Io { path, source }
    };
    std::fs::create_dir_all(&out_dir).map_err(io(&out_dir))?;
    let corpus = strip_corpus(&generate(&SynthConfig::default(), 200, 8, Split::Train)?)?;
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

    for layer in [0, 5] {
        for (kind, tag) in [(CurveKind::Pdf, "density"), (CurveKind::Cdf, "cdf")] {
            let curves = class_curves(&profiles, layer, kind, Bandwidth::Auto)?;
            let path = out_dir.join(format!("{tag}_layer{}.svg", layer + 1));
            let svg = render_curves_svg(&format!("{tag}, layer {}", layer + 1), &curves);
            std::fs::write(&path, svg).map_err(io(&path))?;
            println!("wrote {}", path.display());
        }
    }

    let ex = &corpus.examples[0];
    let verdicts = BTreeMap::from([("raw".to_string(), Label::Correct)]);
    print!("\n{}", error_card(ex, &profiles[0], &verdicts));
    Ok(())
}

fn main() -> veridict::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("veridict-figures"));
    run_example(dir)
}
