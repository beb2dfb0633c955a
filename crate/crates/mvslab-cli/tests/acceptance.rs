//! End-to-end acceptance suite: one pass/fail line per criterion.
//! Heavy — fine meshes down to h = 0.005 are built and solved.

use mvslab_cli::acceptance::run_all;

#[test]
fn acceptance() {
    let results = run_all();
    assert_eq!(results.len(), 13);
    let mut failures = Vec::new();
    for c in &results {
        println!(
            "criterion {:02} [{}] {} -- {}",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        if !c.pass {
            failures.push(c.id);
        }
    }
    assert!(failures.is_empty(), "failing criteria: {failures:?}");
}
