//! Given a candidate bound, finds a strengthening that forces the counter
//! name outside it at some coordinate.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use treeforce::rigidity::escape_witness;
use treeforce::{Condition, GrowthProfile};

fn main() -> treeforce::Result<()> {
    let g = Arc::new(GrowthProfile::scaled_default());
    let p = Condition::full(g);
    let a = [1, 2, 3];
    let u = BTreeMap::from([(1, BTreeSet::from([0])), (2, BTreeSet::from([0, 1])), (3, BTreeSet::from([0, 1, 2, 3]))]);
    let e = escape_witness(&p, &a, &u)?;
    println!("escape at k={} through s_k={} child {}", e.k, e.s_k, e.i);
    println!("p_3 trunk {}  decision {:?}", e.p3.trunk()?, e.decision);

    match escape_witness(&p, &[3], &BTreeMap::new()) {
        Ok(e) => println!("unexpected escape at {}", e.k),
        Err(err) => println!("A = {{3}}: {err}"),
    }
    Ok(())
}
