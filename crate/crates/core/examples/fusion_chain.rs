//! A hand-driven fusion chain: each step thins the tree above the current
//! level, the chain checks the step, and the log replays.

use std::collections::BTreeMap;
use std::sync::Arc;

use treeforce::fusion::{ChainLog, FusionChain};
use treeforce::{Condition, GrowthProfile, NodePath};

fn main() -> treeforce::Result<()> {
    let g = Arc::new(GrowthProfile::canonical());
    let t0 = Condition::full(g.clone());
    let mut chain = FusionChain::new(t0.clone(), 0, 1);

    // Above level 3, thin one node down to a single child.
    let mut parts = BTreeMap::new();
    for a in t0.level_set(3)? {
        let sub = t0.restrict(&a)?;
        let sub = if a == NodePath::from([0, 1, 5]) { sub.restrict(&a.child(0))? } else { sub };
        parts.insert(a, sub);
    }
    let t1 = t0.amalgamate(3, &parts)?;
    let n = chain.current_index();
    let w = t1.find_rich_extension(&g.path_of(n)?, n, 1, 4)?.expect("witness");
    let rec = chain.push_step(t1, 3, Some(w.node.clone()))?;
    println!("step n={} s_n={} witness={:?} successors={:?}", rec.n, rec.s_n, rec.witness, rec.successors);

    // A step that changes the protected level is refused.
    let bad = chain.last().prune_at_depth(2, |p| p.as_slice()[1] == 0)?;
    match chain.push_step(bad, 4, None) {
        Ok(_) => println!("unexpected acceptance"),
        Err(e) => println!("rejected: {e}"),
    }

    let (limit, cert) = chain.intersect()?;
    println!("limit has {} explicit nodes, certified up to {}", limit.explicit_nodes().len(), cert.level);

    let log = chain.to_log();
    let text = log.to_json();
    let again = ChainLog::from_json(&text)?.replay()?;
    println!("replayed {} steps", again.records().len());
    Ok(())
}
