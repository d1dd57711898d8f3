//! Predict whether a span-extraction QA model's answer is correct from the
//! geometry of its hidden representations.
//!
//! The pipeline, stage by stage:
//!
//! 1. [`ingest`] reads hidden-state dumps (JSON-Lines manifest plus a
//!    little-endian `f32` blob), strips padding and partitions examples.
//! 2. [`linalg`] fits a variance-retaining PCA per example and layer, and
//!    offers an exact t-SNE for 2D token projections.
//! 3. [`similarity`] turns the PCA-transformed answer rows into per-layer
//!    mean/std pairwise cosine profiles.
//! 4. [`cdf`] builds per-layer, per-class empirical CDFs over train profiles
//!    and evaluates the windowed interval probability and its test-time
//!    approximations.
//! 5. [`features`] assembles classifier inputs for every scheme and baseline.
//! 6. [`classifier`] trains the one-hidden-layer network and scores it.
//! 7. [`stats`] runs the per-layer t-tests with Bonferroni correction.
//! 8. [`report`] renders density curves, projections and error cards as
//!    SVG/Markdown.
//!
//! [`pipeline`] wires everything together end to end and [`synth`] generates
//! labeled synthetic dumps with a planted late-layer clustering effect.
//!
//! Runnable walkthroughs for each capability live in the crate's `examples/`
//! directory (`cargo run --example <name>`).

pub mod cdf;
pub mod classifier;
pub mod error;
pub mod features;
pub mod ingest;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod similarity;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{Corpus, HiddenDump, Label, Span, Split};
pub use similarity::{AnswerSimilarityProfile, SpanChoice};
