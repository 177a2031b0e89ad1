mod common;

use common::fidelity::{random_identities, worked_examples};

#[test]
fn worked_examples_hold() {
    let failures: Vec<String> = worked_examples().into_iter().filter_map(|(name, r)| r.err().map(|e| format!("{name}: {e}"))).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn relu_and_overlap_match_brute_force() {
    random_identities(1000, 17).unwrap();
}
