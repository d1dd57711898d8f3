//! Fit the variance-retaining PCA on one example's last layer, then project
//! its tokens to 2D with t-SNE and save the scatter plot.
//!
//! ```text
//! cargo run --example pca_and_projection [out.svg]
//! ```

use std::path::PathBuf;

use veridict::ingest::strip_padding;
use veridict::linalg::{pca_retain, TsneConfig};
use veridict::report::{cluster_plot, TokenRole};
use veridict::synth::{generate, SynthConfig};
use veridict::{Label, Split};

pub fn run_example(out: PathBuf) -> veridict::Result<()> {
    let corpus = generate(&SynthConfig::default(), 10, 4, Split::Test)?;
    let raw = corpus
        .examples
        .iter()
        .find(|e| e.label == Some(Label::Correct))
        .expect("synthetic corpus has correct examples");
    let dump = strip_padding(raw)?;
    let last = dump.layer_count - 1;

    for retention in [0.5, 0.8, 0.95, 1.0] {
        let pca = pca_retain(&dump.layer_matrix(last), retention)?;
        let kept: f64 = pca.explained_variance_ratio.iter().sum();
        println!(
            "retention {retention:.2}: {:>2} of {} components, {kept:.3} of the variance",
            pca.n_components(),
            dump.hidden_size
        );
    }

    let plot = cluster_plot(&dump, last, 0, &TsneConfig::default())?;
    let answers = plot
        .roles
        .iter()
        .filter(|r| **r == TokenRole::Answer)
        .count();
    std::fs::write(&out, &plot.svg).map_err(|source| veridict::Error::Io {
        path: out.clone(),
        source,
    })?;
    println!(
        "{}: {} tokens ({answers} answer) projected to {}",
        dump.example_id,
        plot.coords.nrows(),
        out.display()
    );
    Ok(())
}

fn main() -> veridict::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("veridict-projection.svg"));
    run_example(out)
}
