//! Runs every example in `examples/` with small inputs.

#[allow(dead_code)]
#[path = "../examples/answer_similarity.rs"]
mod answer_similarity;
#[allow(dead_code)]
#[path = "../examples/cdf_approximation.rs"]
mod cdf_approximation;
#[allow(dead_code)]
#[path = "../examples/end_to_end.rs"]
mod end_to_end;
#[allow(dead_code)]
#[path = "../examples/feature_schemes.rs"]
mod feature_schemes;
#[allow(dead_code)]
#[path = "../examples/figures.rs"]
mod figures;
#[allow(dead_code)]
#[path = "../examples/layer_significance.rs"]
mod layer_significance;
#[allow(dead_code)]
#[path = "../examples/load_and_validate.rs"]
mod load_and_validate;
#[allow(dead_code)]
#[path = "../examples/pca_and_projection.rs"]
mod pca_and_projection;
#[allow(dead_code)]
#[path = "../examples/train_classifier.rs"]
mod train_classifier;

#[test]
fn load_and_validate_runs() {
    let dir = tempfile::tempdir().unwrap();
    load_and_validate::run_example(dir.path().join("data")).unwrap();
}

#[test]
fn pca_and_projection_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.svg");
    pca_and_projection::run_example(out.clone()).unwrap();
    assert!(out.is_file());
}

#[test]
fn answer_similarity_runs() {
    answer_similarity::run_example(40).unwrap();
}

#[test]
fn cdf_approximation_runs() {
    cdf_approximation::run_example(60).unwrap();
}

#[test]
fn feature_schemes_runs() {
    feature_schemes::run_example().unwrap();
}

#[test]
fn train_classifier_runs() {
    train_classifier::run_example(60).unwrap();
}

#[test]
fn layer_significance_runs() {
    layer_significance::run_example(60).unwrap();
}

#[test]
fn figures_runs() {
    let dir = tempfile::tempdir().unwrap();
    figures::run_example(dir.path().to_path_buf()).unwrap();
    assert!(dir.path().join("density_layer6.svg").is_file());
}

#[test]
fn end_to_end_runs() {
    let dir = tempfile::tempdir().unwrap();
    end_to_end::run_example(dir.path().to_path_buf(), 60).unwrap();
    assert!(dir.path().join("run/metrics.json").is_file());
}
