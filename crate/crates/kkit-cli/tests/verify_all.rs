//! Acceptance suite: one PASS/FAIL line per criterion.

#[test]
fn acceptance() {
    let results = kkit::verify::verify_all(false, |r| println!("{}", r.line()));
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
