//! Independent reference computations shared by the acceptance suite.

use std::collections::VecDeque;

use num_bigint::BigUint;
use treeforce::{GrowthProfile, HyperInt, NodePath};

pub fn big(limbs: &[u64]) -> BigUint {
    limbs.iter().rev().fold(BigUint::default(), |acc, &l| (acc << 64u32) + BigUint::from(l))
}

pub fn to_big(h: &HyperInt) -> BigUint {
    big(&h.to_u64_limbs(1 << 16).expect("fits"))
}

/// Breadth-first enumeration in which the `k`-th node found has `N_k`
/// children, listed in increasing order.
pub fn bfs(g: &GrowthProfile, count: usize) -> Vec<NodePath> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([NodePath::root()]);
    while out.len() < count {
        let node = queue.pop_front().unwrap();
        if out.len() + 1 + queue.len() < count {
            let n = g.seq_n(out.len() as u64).unwrap().to_u64().unwrap();
            queue.extend((0..n).map(|c| node.child(c)));
        }
        out.push(node);
    }
    out
}

/// Offset that pushes a value past the dense fast path.
pub const FAR: u64 = (1 << 16) + 7;

/// `h / 2^FAR` for an `h` built by shifting a small value up by `FAR`.
pub fn unshift(h: &HyperInt) -> BigUint {
    h.exponents().iter().fold(BigUint::default(), |acc, e| {
        let e = e.to_u64().expect("machine-range exponent") - FAR;
        acc + (BigUint::from(1u32) << e)
    })
}
