//! Write a small synthetic manifest, check it record by record, load it,
//! strip padding and split it into the three partitions.
//!
//! ```text
//! cargo run --example load_and_validate [dir]
//! ```

use std::path::PathBuf;

use veridict::ingest::{load_corpus, partition, strip_corpus, validate_manifest, write_corpus};
use veridict::synth::{generate, SynthConfig};
use veridict::Split;

pub fn run_example(dir: PathBuf) -> veridict::Result<()> {
    std::fs::create_dir_all(&dir).map_err(|source| veridict::Error::Io {
        path: dir.clone(),
        source,
    })?;
    let cfg = SynthConfig {
        unanswerable_fraction: 0.1,
        ..SynthConfig::default()
    };
    let manifest = dir.join("dumps.jsonl");
    write_corpus(&generate(&cfg, 40, 3, Split::Train)?, &manifest)?;

    let diagnostics = validate_manifest(&manifest)?;
    println!("{}: {} problems", manifest.display(), diagnostics.len());

    let corpus = load_corpus(&manifest)?;
    let padded = corpus
        .examples
        .iter()
        .filter(|e| e.pad_mask.iter().any(|&p| p))
        .count();
    println!(
        "{} examples, L = {}, D = {}, {padded} with padding",
        corpus.len(),
        corpus.layer_count().unwrap_or(0),
        corpus.hidden_size().unwrap_or(0)
    );

    let stripped = strip_corpus(&corpus)?;
    let first = &stripped.examples[0];
    println!(
        "{}: {} -> {} tokens, answer span {:?}",
        first.example_id,
        corpus.examples[0].token_count(),
        first.token_count(),
        first.predicted_answer_span
    );

    let parts = partition(&stripped)?;
    println!(
        "correct {}, incorrect {}, skipped {}",
        parts.answerable_correct.len(),
        parts.answerable_incorrect.len(),
        parts.skipped.len()
    );
    Ok(())
}

fn main() -> veridict::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("veridict-load"));
    run_example(dir)
}
