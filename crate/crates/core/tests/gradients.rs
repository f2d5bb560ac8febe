//! Reverse-mode gradients against central differences.

mod common;

use common::{gradcheck_cases, GRADCHECK_TOLERANCE};

const SHAPES_PER_CASE: u64 = 20;

#[test]
fn every_primitive_matches_finite_differences() {
    let mut failures = Vec::new();
    for (name, case) in gradcheck_cases() {
        let mut worst = 0.0f64;
        for seed in 0..SHAPES_PER_CASE {
            let report = case(seed).unwrap_or_else(|e| panic!("{name} seed {seed}: {e}"));
            worst = worst.max(report.max_rel_error);
            if report.max_rel_error.is_nan() || report.max_rel_error > GRADCHECK_TOLERANCE {
                failures.push(format!("{name} seed {seed}: {report:?}"));
            }
        }
        eprintln!("{name:>24}: worst relative error {worst:.2e}");
    }
    assert!(failures.is_empty(), "{failures:#?}");
}
