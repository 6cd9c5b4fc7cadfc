//! Names decided at a fixed depth: values on branches, decisions below a
//! node, freshness, and the JSON form.

use std::sync::Arc;

use treeforce::names::{DeterminedName, Query};
use treeforce::{Condition, GrowthProfile, NodePath};

fn main() -> treeforce::Result<()> {
    let g = Arc::new(GrowthProfile::scaled_default());
    let t = Condition::full(g.clone());
    let x = DeterminedName::last_child(g.clone(), 3, 16)?;
    let b = NodePath::from([0, 1, 9]);
    println!("last-child on {b}: {:?}", x.value_on_branch(&b)?);
    for a in [NodePath::from([0, 1]), NodePath::from([0, 1, 9])] {
        println!("below {a}: 9 in X? {:?}", x.decide_below(&t, &a, &Query::Contains(9))?);
    }
    println!("fresh on the full tree: {}", x.is_fresh(&t)?);

    let thin = t.restrict(&NodePath::from([0, 1, 9]))?;
    println!("fresh below <0,1,9>: {}  stale at {:?}", x.is_fresh(&thin)?, x.first_stale_node(&thin)?);

    let d = DeterminedName::digits(g.clone(), 4, 3, vec![1, 2])?;
    println!("digits name on <0,1,5,3>: {:?}", d.value_on_branch(&NodePath::from([0, 1, 5, 3]))?);
    let text = d.to_json();
    println!("{text}");
    let back = DeterminedName::from_json(g, &text)?;
    assert_eq!(back.to_json(), text);
    Ok(())
}
