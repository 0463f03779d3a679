//! Calibration of the 3-SE rule: with a correct target the check should
//! fail for about 0.27% of seeds.

mod common;

use cbve::verify::{check_laplace, VerifyOptions};

#[test]
fn false_failure_rate_is_small_under_the_null() {
    let env = common::fixture("feller");
    let seeds = 1000;
    let failures = (0..seeds)
        .filter(|&seed| {
            let opts = VerifyOptions::default().with_paths(200).with_seed(seed);
            !check_laplace(&env, 1.0, 1.0, &[1.0], &opts).unwrap().passed()
        })
        .count();
    assert!(failures * 100 <= seeds as usize, "{failures} of {seeds} seeds failed");
}

#[test]
fn shifted_target_is_detected() {
    let env = common::fixture("feller");
    let opts = VerifyOptions::default().with_paths(20_000).with_seed(1);
    let mut report = check_laplace(&env, 1.0, 1.0, &[1.0], &opts).unwrap();
    let target = report.items[0].target;
    report.override_target(target * 1.05);
    assert!(!report.passed());
}
