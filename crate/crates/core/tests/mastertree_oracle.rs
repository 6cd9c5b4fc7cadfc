use std::collections::VecDeque;

use proptest::prelude::*;
use treeforce::{GrowthProfile, NodePath};

/// Breadth-first enumeration where the node found `k`-th gets `N_k` children,
/// listed in increasing order.
fn bfs(g: &GrowthProfile, count: usize) -> Vec<NodePath> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([NodePath::root()]);
    while out.len() < count {
        let node = queue.pop_front().unwrap();
        let k = out.len() as u64;
        if out.len() + 1 + queue.len() < count {
            let n = g.seq_n(k).unwrap().to_u64().unwrap();
            for c in 0..n {
                queue.push_back(node.child(c));
            }
        }
        out.push(node);
    }
    out
}

#[test]
fn canonical_first_four_levels() {
    let g = GrowthProfile::canonical();
    let nodes = bfs(&g, 264);
    assert_eq!(nodes.iter().filter(|p| p.len() == 3).count(), 260);
    for (k, p) in nodes.iter().enumerate() {
        assert_eq!(g.path_of(k as u64).unwrap(), *p, "path_of({k})");
        assert_eq!(g.ind_u64(p).unwrap(), k as u64, "ind({p})");
    }
    for w in nodes.windows(2) {
        assert!(w[0] < w[1] || w[0].len() < w[1].len());
        assert!(g.ind(&w[0]).unwrap() < g.ind(&w[1]).unwrap());
    }
    assert_eq!(g.level_offset(4).unwrap().to_u64(), Some(264));
}

#[test]
fn scaled_levels_against_bfs() {
    let g = GrowthProfile::scaled_default();
    let total = 1 + 1 + 2 + 20 + 320;
    let nodes = bfs(&g, total);
    for (k, p) in nodes.iter().enumerate() {
        assert_eq!(g.path_of(k as u64).unwrap(), *p);
        assert_eq!(g.ind_u64(p).unwrap(), k as u64);
    }
    for l in 0..=4 {
        let width = nodes.iter().filter(|p| p.len() == l).count() as u64;
        assert_eq!(g.level_width(l).unwrap().to_u64(), Some(width), "level {l}");
    }
}

#[test]
fn out_of_range_children_are_rejected() {
    let g = GrowthProfile::canonical();
    assert!(!g.child_in_range(&NodePath::from([0]), 2).unwrap());
    assert!(g.child_in_range(&NodePath::from([0, 1]), 255).unwrap());
    assert!(g.ind(&NodePath::from([0, 2])).is_err());
}

fn valid_path(g: &GrowthProfile, picks: &[u64]) -> NodePath {
    let mut p = NodePath::root();
    for &c in picks {
        let n = g.branching(&p).unwrap().to_u64().unwrap();
        p = p.child(c % n);
    }
    p
}

proptest! {
    #[test]
    fn ind_order_is_level_then_lex(a in prop::collection::vec(any::<u64>(), 0..6), b in prop::collection::vec(any::<u64>(), 0..6)) {
        let g = GrowthProfile::scaled_default();
        let (pa, pb) = (valid_path(&g, &a), valid_path(&g, &b));
        let by_ind = g.ind(&pa).unwrap().cmp(&g.ind(&pb).unwrap());
        let by_shape = pa.len().cmp(&pb.len()).then_with(|| pa.as_slice().cmp(pb.as_slice()));
        prop_assert_eq!(by_ind, by_shape);
        if let Ok(k) = g.ind_u64(&pa) {
            prop_assert_eq!(g.path_of(k).unwrap(), pa);
        }
    }
}
