//! Full verification suite: one test per criterion, each printing its
//! pass/fail line (run with `--nocapture` to see all of them).

use pbf_safety::acceptance::run_all;

#[test]
fn acceptance_suite() {
    let results = run_all();
    assert_eq!(results.len(), 8);
    let mut failed = Vec::new();
    for r in &results {
        println!("{}", r.summary_line());
        if !r.passed {
            failed.push(r.summary_line());
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
