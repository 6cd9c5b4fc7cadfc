//! Random fusion steps on the canonical tree, valid by construction, and
//! mutations of them that break exactly one clause.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use treeforce::conditions::Children;
use treeforce::fusion::{FusionChain, FusionClause};
use treeforce::{Condition, Error, GrowthProfile, NodePath};

pub const CLAUSES: [FusionClause; 9] = [
    FusionClause::LevelNotIncreasing,
    FusionClause::NotStronger,
    FusionClause::LevelSetChanged,
    FusionClause::ObligationUnresolvable,
    FusionClause::MissingWitness,
    FusionClause::WitnessNotExtending,
    FusionClause::WitnessTooDeep,
    FusionClause::WitnessNotInCondition,
    FusionClause::TooFewSuccessors,
];

/// Deepest level at which nodes are enumerated.
const MAX_EDIT_DEPTH: usize = 3;

pub struct Step {
    pub next: Condition,
    pub level: usize,
    pub witness: Option<NodePath>,
}

fn child_list(t: &Condition, v: &NodePath, cap: u64) -> Vec<u64> {
    match t.children(v).unwrap() {
        Children::Listed(c) => c,
        Children::Full(n) => (0..n.to_u64().map_or(cap, |n| n.min(cap))).collect(),
    }
}

fn first_extension(t: &Condition, s: &NodePath, len: usize) -> NodePath {
    let mut p = s.clone();
    while p.len() < len {
        // Past the index cap the branching is unknown; child 0 always exists.
        let c = match t.children(&p) {
            Ok(Children::Listed(c)) => c[0],
            _ => 0,
        };
        p = p.child(c);
    }
    p
}

/// `T` with the children of `v` cut down to `keep`.
pub fn thin(t: &Condition, v: &NodePath, keep: &[u64]) -> Condition {
    let l = v.len();
    let mut parts = BTreeMap::new();
    for a in t.level_set(l).unwrap() {
        let sub = if a == *v {
            let pieces: Vec<_> = keep.iter().map(|c| t.restrict(&v.child(*c)).unwrap()).collect();
            Condition::union(&pieces).unwrap()
        } else {
            t.restrict(&a).unwrap()
        };
        parts.insert(a, sub);
    }
    t.amalgamate(l, &parts).unwrap()
}

fn random_thinning(rng: &mut ChaCha8Rng, t: &Condition, min_depth: usize, protect: Option<&NodePath>) -> Condition {
    if min_depth > MAX_EDIT_DEPTH {
        return t.clone();
    }
    let depth = rng.gen_range(min_depth..=MAX_EDIT_DEPTH);
    let nodes = t.level_set(depth).unwrap();
    let v = nodes.choose(rng).unwrap().clone();
    let kids = child_list(t, &v, 8);
    let mut keep: Vec<u64> = kids.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    if let Some(s) = protect {
        if s.len() > v.len() && v.is_prefix_of(s) && !keep.contains(&s.as_slice()[v.len()]) {
            keep.push(s.as_slice()[v.len()]);
        }
    }
    if keep.is_empty() {
        keep.push(kids[0]);
    }
    keep.sort_unstable();
    thin(t, &v, &keep)
}

/// Shared so sequence values and thresholds are computed once.
fn canonical() -> Arc<GrowthProfile> {
    static G: OnceLock<Arc<GrowthProfile>> = OnceLock::new();
    G.get_or_init(|| Arc::new(GrowthProfile::canonical())).clone()
}

pub fn random_chain(rng: &mut ChaCha8Rng) -> FusionChain {
    let g = canonical();
    let n0 = rng.gen_range(0..6);
    let l0 = rng.gen_range(0..=2);
    let mut start = Condition::full(g);
    for _ in 0..rng.gen_range(0..3) {
        start = random_thinning(rng, &start, 1, None);
    }
    let mut chain = FusionChain::new(start, n0, l0);
    if rng.gen_bool(0.4) {
        if let Some(step) = valid_step(rng, &chain) {
            push_valid(&mut chain, step);
        }
    }
    chain
}

pub fn push_valid(chain: &mut FusionChain, step: Step) {
    if let Err(e) = chain.push_step(step.next, step.level, step.witness) {
        panic!("valid step rejected: {e}");
    }
}

/// A step the chain must accept, when one is cheap to find.
pub fn valid_step(rng: &mut ChaCha8Rng, chain: &FusionChain) -> Option<Step> {
    let cur = chain.last();
    let n = chain.current_index();
    let l_n = chain.last_level();
    let g = chain.profile().clone();
    let s_n = g.path_of(n).ok()?;
    let present = cur.contains(&s_n).unwrap();
    for _ in 0..4 {
        let next = if rng.gen_bool(0.7) {
            random_thinning(rng, cur, l_n, present.then_some(&s_n))
        } else {
            cur.clone()
        };
        if !present {
            return Some(Step { next, level: l_n + rng.gen_range(1..3), witness: None });
        }
        if let Some(w) = next.find_rich_extension(&s_n, n, s_n.len(), 4).unwrap() {
            let level = (l_n + 1).max(w.node.len() + 1) + rng.gen_range(0..2);
            return Some(Step { next, level, witness: Some(w.node) });
        }
    }
    None
}

/// Rewrites a chain and step so the step breaks `clause`, or `None` when the
/// state does not support that mutation.
pub fn mutate(rng: &mut ChaCha8Rng, clause: FusionClause, chain: &FusionChain, step: Step) -> Option<(FusionChain, Step)> {
    use FusionClause::*;
    let cur = chain.last();
    let n = chain.current_index();
    let l_n = chain.last_level();
    let g = chain.profile().clone();
    let s_n = g.path_of(n).ok()?;
    let present = cur.contains(&s_n).unwrap();
    let chain = chain.clone();
    let out = match clause {
        LevelNotIncreasing => Step { level: rng.gen_range(0..=l_n), ..step },
        NotStronger => {
            let full = Condition::full(g.clone());
            let next = if *cur != full && rng.gen_bool(0.5) {
                full
            } else {
                Condition::full(Arc::new(GrowthProfile::scaled_default()))
            };
            Step { next, ..step }
        }
        LevelSetChanged => {
            let mut cands = Vec::new();
            for d in 0..l_n.min(MAX_EDIT_DEPTH + 1) {
                for v in step.next.level_set(d).unwrap() {
                    if child_list(&step.next, &v, 2).len() >= 2 {
                        cands.push(v);
                    }
                }
            }
            let v = cands.choose(rng)?.clone();
            let keep = child_list(&step.next, &v, 1);
            Step { next: thin(&step.next, &v, &keep[..1]), ..step }
        }
        ObligationUnresolvable => {
            let start = chain.last().clone();
            let fresh = FusionChain::new(start.clone(), rng.gen_range(264..10_000), l_n);
            return Some((fresh, Step { next: start, level: l_n + 1, witness: None }));
        }
        MissingWitness if present => Step { witness: None, ..step },
        WitnessNotExtending if present && !s_n.is_empty() => {
            let w = if rng.gen_bool(0.5) { s_n.parent().unwrap() } else { NodePath::root() };
            Step { witness: Some(w), ..step }
        }
        WitnessTooDeep if present => {
            let w = first_extension(&step.next, &s_n, step.level + rng.gen_range(0..2));
            Step { witness: Some(w), ..step }
        }
        WitnessNotInCondition if present => {
            let d = l_n.max(s_n.len());
            if d > MAX_EDIT_DEPTH {
                return None;
            }
            let v = first_extension(&step.next, &s_n, d);
            let kids = child_list(&step.next, &v, 4);
            if kids.len() < 2 {
                return None;
            }
            let next = thin(&step.next, &v, &kids[..1]);
            Step { next, level: d + 2, witness: Some(v.child(kids[1])) }
        }
        TooFewSuccessors if present && n >= 1 => {
            let d = l_n.max(s_n.len()).max(2);
            if d > MAX_EDIT_DEPTH {
                return None;
            }
            let v = first_extension(&step.next, &s_n, d);
            let kids = child_list(&step.next, &v, 1);
            let next = thin(&step.next, &v, &kids[..1]);
            Step { next, level: d + 1, witness: Some(v) }
        }
        _ => return None,
    };
    Some((chain, out))
}

pub struct Sweep {
    pub total: usize,
    pub correct: usize,
    pub per_clause: BTreeMap<String, (usize, usize)>,
    pub mismatches: Vec<String>,
    pub valid_accepted: usize,
}

/// Runs `count` mutation tests cycling through the clauses.
pub fn sweep(seed: u64, count: usize) -> Sweep {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Sweep { total: 0, correct: 0, per_clause: BTreeMap::new(), mismatches: Vec::new(), valid_accepted: 0 };
    for i in 0..count {
        let clause = CLAUSES[i % CLAUSES.len()];
        let (chain, step) = loop {
            let chain = random_chain(&mut rng);
            let Some(step) = valid_step(&mut rng, &chain) else { continue };
            let mut check = chain.clone();
            push_valid(&mut check, Step { next: step.next.clone(), level: step.level, witness: step.witness.clone() });
            out.valid_accepted += 1;
            if let Some(m) = mutate(&mut rng, clause, &chain, step) {
                break m;
            }
        };
        let mut chain = chain;
        let got = chain.push_step(step.next, step.level, step.witness);
        let entry = out.per_clause.entry(clause.to_string()).or_default();
        entry.0 += 1;
        out.total += 1;
        match got {
            Err(Error::Fusion { clause: c, .. }) if c == clause => {
                entry.1 += 1;
                out.correct += 1;
            }
            Err(e) => out.mismatches.push(format!("{clause}: got {e}")),
            Ok(_) => out.mismatches.push(format!("{clause}: accepted")),
        }
    }
    out
}
