//! Runs the splitting fusion for the identity name on the scaled tree and
//! decodes branches back from the name's value.

use std::sync::Arc;

use treeforce::minimality::build_splitting_fusion;
use treeforce::names::DeterminedName;
use treeforce::{Condition, GrowthProfile, NodePath};

fn main() -> treeforce::Result<()> {
    let g = Arc::new(GrowthProfile::scaled_default());
    let t = Condition::full(g);
    let name = DeterminedName::identity(&t, 4)?;
    let f = build_splitting_fusion(&t, &name, 2)?;
    println!("levels {:?}", f.levels);
    for (n, u) in f.level_sets.iter().enumerate() {
        println!("U_{n}: {} nodes, {} splits", u.len(), f.splits[n].len());
    }
    let summary = f.verify()?;
    println!("verified {} split decisions", summary.pairs_checked);

    let g0 = NodePath::from([0, 1, 3, 0]);
    if f.condition.contains(&g0)? {
        let x = f.name.value_on_branch(&g0)?;
        println!("branch {g0} has value {x:?}, decodes to {:?}", f.decode_branch(&x)?);
    }
    let rt = f.round_trip()?;
    println!("round trip over {} branches, {} failures", rt.branches, rt.failures.len());
    Ok(())
}
