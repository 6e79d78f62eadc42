mod common;

#[test]
fn translation_equivariance() {
    common::translation_equivariance(64).unwrap();
}

#[test]
fn amplitude_scaling_keeps_argmax_classifiers() {
    common::scale_invariance(64).unwrap();
}

#[test]
fn histograms_are_normalised_and_order_free() {
    common::histogram_normalization(64).unwrap();
}

#[test]
fn raising_the_horizon_never_lowers_the_mean_exit_time() {
    common::censoring_monotonicity(256).unwrap();
}

#[test]
fn seeds_reproduce_runs_exactly() {
    common::seed_determinism(16).unwrap();
}
