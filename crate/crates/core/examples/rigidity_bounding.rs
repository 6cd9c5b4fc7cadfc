//! The bounding fusion for a tuple name on the small rigidity profile: the
//! final bound, the per-step ledgers and a sweep of the covering property.

use std::sync::Arc;

use treeforce::cli::rigidity_test_profile;
use treeforce::names::DeterminedName;
use treeforce::rigidity::{build_bounding_fusion, StepCase};
use treeforce::{Condition, GrowthProfile, NodePath};

fn main() -> treeforce::Result<()> {
    let g = Arc::new(GrowthProfile::from_config(rigidity_test_profile())?);
    let t1 = Condition::full(g.clone()).restrict(&NodePath::from([0, 1]))?;
    let name = DeterminedName::digits(g, 4, 3, vec![0, 2, 4, 5])?;
    let f = build_bounding_fusion(&t1, &name, 2)?;
    println!("levels {:?}  thresholds {:?}", f.levels, f.thresholds);
    for l in &f.ledgers {
        match (&l.case, &l.case_two) {
            (StepCase::Two, Some(c)) => println!(
                "n={}: case II at {} (m={}), {} successors in {} classes, kept {}",
                l.n,
                c.t,
                c.m,
                c.successors,
                c.classes,
                c.selected
            ),
            _ => println!("n={}: case I", l.n),
        }
        println!("   ledger holds: {}", l.all_hold());
    }
    println!("bound {:?}", f.bound);
    let sweep = f.verify_branches()?;
    println!("covering checked on {} branches, {} failures", sweep.branches, sweep.failures.len());
    println!("decisions verified: {}", f.verify_decisions()?);
    Ok(())
}
