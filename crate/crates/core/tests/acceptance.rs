//! Acceptance criteria 1–8, one pass/fail line each.

use eqvidx_core::config::Config;
use eqvidx_core::verify::{verify_suite, Outcome};

#[test]
fn acceptance_criteria() {
    let cfg = Config::default();
    let summary = verify_suite(&cfg);
    for c in &summary.criteria {
        println!("{c}");
    }
    for (job, e) in &summary.errors {
        println!("error {job}: {e}");
    }
    assert_eq!(summary.criteria.len(), 8);
    let failed: Vec<u8> = summary
        .criteria
        .iter()
        .filter(|c| c.outcome != Outcome::Pass)
        .map(|c| c.id)
        .collect();
    assert!(failed.is_empty(), "criteria not passing: {failed:?}");
}
