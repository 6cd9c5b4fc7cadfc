mod common;

use common::mutations::{sweep, CLAUSES};

#[test]
fn every_mutation_is_rejected_with_its_clause() {
    let s = sweep(7, 500);
    assert!(s.mismatches.is_empty(), "{:#?}", s.mismatches);
    assert_eq!(s.correct, 500);
    assert_eq!(s.per_clause.len(), CLAUSES.len());
    assert!(s.valid_accepted >= 500);
}

#[test]
fn other_seeds_agree() {
    for seed in [1, 2, 3] {
        let s = sweep(seed, 90);
        assert!(s.mismatches.is_empty(), "seed {seed}: {:#?}", s.mismatches);
    }
}
