//! Finite-difference checks of every layer kind and of the four systems,
//! in 64-bit precision with ε = 1e-5.

mod common;

use std::time::Instant;

use common::gradients::{layer_checks, op_checks, system_checks, Check};

fn assert_all(checks: Vec<Check>) {
    assert!(!checks.is_empty());
    for c in &checks {
        assert!(c.passed(), "{}", c.describe());
    }
}

#[test]
fn every_layer_kind_matches_finite_differences() {
    assert_all(layer_checks());
}

#[test]
fn parameter_free_ops_match_finite_differences() {
    assert_all(op_checks());
}

#[test]
fn four_systems_match_finite_differences() {
    let start = Instant::now();
    assert_all(system_checks());
    assert!(
        start.elapsed().as_secs() < 120,
        "suite took {:?}",
        start.elapsed()
    );
}
