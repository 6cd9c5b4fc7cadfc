//! Builds conditions, restricts them, reads level sets and checks richness.

use std::sync::Arc;

use treeforce::{Condition, GrowthProfile, NodePath};

fn main() -> treeforce::Result<()> {
    let g = Arc::new(GrowthProfile::canonical());
    let full = Condition::full(g.clone());
    println!("trunk of the full tree: {}", full.trunk()?);
    for l in 0..=3 {
        println!("level {l}: {} nodes", full.level_set(l)?.len());
    }
    match full.level_set(4) {
        Ok(v) => println!("level 4: {} nodes", v.len()),
        Err(e) => println!("level 4: {e}"),
    }

    let t = Condition::from_tail_paths(g.clone(), &[NodePath::from([0, 1, 0]), NodePath::from([0, 1, 7])])?;
    println!("two-tail condition, trunk {}", t.trunk()?);
    println!("stronger than the full tree: {}", t.is_stronger_than(&full));
    println!("successors of <0,1,7>: {}", t.successor_count(&NodePath::from([0, 1, 7]))?.brief(40));
    println!("{}", t.to_json());

    let cert = full.check_richness(5)?;
    for ob in &cert.obligations {
        match &ob.witness {
            Some(w) => println!("n={} s_n={} witness {} via {:?}", ob.n, ob.node, w.node, w.via),
            None => println!("n={} s_n={} not in the tree", ob.n, ob.node),
        }
    }
    let check = cert.recheck_definition(&full)?;
    println!("rechecked {} obligations, {} failures", check.checked, check.failures.len());

    let scaled = Condition::full(Arc::new(GrowthProfile::scaled_default()));
    match scaled.check_richness(4) {
        Ok(_) => println!("scaled tree rich up to 4"),
        Err(e) => println!("scaled tree: {e}"),
    }
    Ok(())
}
