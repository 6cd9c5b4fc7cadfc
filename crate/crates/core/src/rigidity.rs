//! The bounding fusion for a tuple name: Case I/II steps, pigeonhole
//! selection, the counting invariants, the resulting bound map, and the
//! escape construction for the counter name.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conditions::{Children, Condition, DEFAULT_ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::fusion::FusionChain;
use crate::growth::GrowthProfile;
use crate::hyperint::HyperInt;
use crate::mastertree::NodePath;
use crate::names::{Decision, DeterminedName, NameKind, Query, Value};

/// Levels below `v_n` searched for the Case II witness.
pub const WITNESS_SEARCH_DEPTH: usize = 4;
const WITNESS_SEARCH_BUDGET: usize = 1 << 18;

/// A decided restriction of the tuple name.
pub type Tuple = BTreeMap<u64, u64>;

/// `k ↦ u(k)`; missing keys stand for the empty set.
pub type BoundMap = BTreeMap<u64, BTreeSet<u64>>;

/// One inequality of the counting argument, evaluated exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub claim: String,
    pub lhs: HyperInt,
    pub rhs: HyperInt,
    pub strict: bool,
    pub holds: bool,
}

impl Link {
    fn le(claim: impl Into<String>, lhs: HyperInt, rhs: HyperInt) -> Self {
        let holds = lhs <= rhs;
        Link { claim: claim.into(), lhs, rhs, strict: false, holds }
    }

    fn lt(claim: impl Into<String>, lhs: HyperInt, rhs: HyperInt) -> Self {
        let holds = lhs < rhs;
        Link { claim: claim.into(), lhs, rhs, strict: true, holds }
    }

    fn eq(claim: impl Into<String>, lhs: HyperInt, rhs: HyperInt) -> Self {
        let holds = lhs == rhs;
        Link { claim: claim.into(), lhs, rhs, strict: false, holds }
    }
}

/// `∏_{i∈A∩m} N_i ≤ P_{K+1} ≤ P_m` with `K = max(A∩m)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingChain {
    pub a: Vec<u64>,
    pub m: u64,
    pub k: Option<u64>,
    pub product: HyperInt,
    pub links: Vec<Link>,
}

impl CountingChain {
    pub fn holds(&self) -> bool {
        self.links.iter().all(|l| l.holds)
    }
}

fn pow2_product(profile: &GrowthProfile, ks: impl IntoIterator<Item = u64>) -> Result<HyperInt> {
    let mut e = HyperInt::ZERO;
    for k in ks {
        let log = profile.seq_n(k)?.log2_exact().expect("N_k is a power of two");
        e = e.add(&log);
    }
    Ok(HyperInt::pow2(&e))
}

fn times_n(profile: &GrowthProfile, x: &HyperInt, k: u64) -> Result<HyperInt> {
    x.mul_pow2(&profile.seq_n(k)?)
}

pub fn counting_chain(profile: &GrowthProfile, a: &[u64], m: u64) -> Result<CountingChain> {
    let below: Vec<u64> = a.iter().copied().filter(|&i| i < m).collect::<BTreeSet<_>>().into_iter().collect();
    let product = pow2_product(profile, below.iter().copied())?;
    let p_m = profile.seq_p(m)?;
    let k = below.last().copied();
    let links = match k {
        Some(k) => {
            let p_k1 = profile.seq_p(k + 1)?;
            vec![
                Link::le(format!("prod N_i over A∩{m} <= P_{}", k + 1), product.clone(), p_k1.clone()),
                Link::le(format!("P_{} <= P_{m}", k + 1), p_k1, p_m),
            ]
        }
        None => vec![Link::le(format!("empty product <= P_{m}"), product.clone(), p_m)],
    };
    Ok(CountingChain {
        a: a.to_vec(),
        m,
        k,
        product,
        links,
    })
}

/// Groups `s` by `z` and returns the largest class, ties going to the class
/// whose least member comes first. Fails if that class is smaller than `target`.
pub fn pigeonhole_select(s: &[NodePath], z: &[Tuple], target: &HyperInt) -> Result<Vec<NodePath>> {
    if s.len() != z.len() {
        return Err(Error::Invariant("one decided tuple per successor".into()));
    }
    let mut classes: Vec<(&Tuple, Vec<NodePath>)> = Vec::new();
    let mut by_value: BTreeMap<&Tuple, usize> = BTreeMap::new();
    for (a, za) in s.iter().zip(z) {
        let idx = *by_value.entry(za).or_insert_with(|| {
            classes.push((za, Vec::new()));
            classes.len() - 1
        });
        classes[idx].1.push(a.clone());
    }
    let best = classes
        .into_iter()
        .enumerate()
        .max_by(|(i, x), (j, y)| x.1.len().cmp(&y.1.len()).then(j.cmp(i)))
        .map(|(_, c)| c.1)
        .unwrap_or_default();
    if HyperInt::from(best.len()) < *target {
        return Err(Error::Invariant(format!(
            "largest class has {} members, needs {target}",
            best.len()
        )));
    }
    Ok(best)
}

pub fn verify_phi(u: &BoundMap, a: &[u64], x: &Value) -> bool {
    let Value::Tuple(x) = x else { return false };
    a.iter().all(|k| match (x.get(k), u.get(k)) {
        (Some(v), Some(set)) => set.contains(v),
        _ => false,
    })
}

/// `u(k) ⊆ N_k` and `|u(k)| ≤ P_k` for every `k ∈ A`, and no keys outside `A`.
pub fn check_admissible(profile: &GrowthProfile, a: &[u64], u: &BoundMap) -> Result<()> {
    if let Some(k) = u.keys().find(|k| !a.contains(k)) {
        return Err(Error::InadmissibleBound(format!("{k} is not in A")));
    }
    for &k in a {
        let Some(set) = u.get(&k) else { continue };
        let n_k = profile.seq_n(k)?;
        if let Some(v) = set.iter().find(|&&v| HyperInt::small(v) >= n_k) {
            return Err(Error::InadmissibleBound(format!("u({k}) contains {v}, not below N_{k} = {n_k}")));
        }
        if HyperInt::from(set.len()) > profile.seq_p(k)? {
            return Err(Error::InadmissibleBound(format!("|u({k})| = {} exceeds P_{k}", set.len())));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepCase {
    /// `s_n ∉ T_n`.
    One,
    /// `s_n ∈ T_n`.
    Two,
}

/// How (viii) at `n+1` was obtained for one `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViiiSource {
    /// Counted directly on the new level.
    Direct,
    /// Case I, `k < j_n`: inherited from (viii) at `n`.
    FromViii,
    /// Case I, `k = j_n ∈ A`: from `|U_n| < P_k`.
    FromVii,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViiiEntry {
    pub k: u64,
    pub distinct: usize,
    pub bound: HyperInt,
    pub source: ViiiSource,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViiEntry {
    pub k: u64,
    pub level_size: usize,
    pub bound: HyperInt,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseTwo {
    pub v_n: NodePath,
    pub t: NodePath,
    pub m: u64,
    /// The least `k ∈ A` with `j_n ≤ k < m`.
    pub side_k: u64,
    pub successors: usize,
    pub classes: usize,
    pub selected: usize,
    pub counting: CountingChain,
    /// `|U_{n+1}| < |U_n|+|U| < P_K+N_m < P_m·N_m = P_{m+1} ≤ P_k`.
    pub vii_links: Vec<Link>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepLedger {
    pub n: u64,
    pub case: StepCase,
    pub l_next: usize,
    pub j_next: u64,
    pub level_size: usize,
    pub case_two: Option<CaseTwo>,
    pub vii: Vec<ViiEntry>,
    pub viii: Vec<ViiiEntry>,
}

impl StepLedger {
    pub fn all_hold(&self) -> bool {
        self.vii.iter().all(|e| e.holds)
            && self.viii.iter().all(|e| e.holds)
            && self.case_two.as_ref().is_none_or(|c| {
                c.counting.holds() && c.vii_links.iter().all(|l| l.holds) && c.side_k < c.m
            })
    }
}

#[derive(Clone, Debug)]
pub struct BoundingFusion {
    pub name: DeterminedName,
    pub a: Vec<u64>,
    pub chain: FusionChain,
    /// `l_1, ..., l_{n_max+1}`.
    pub levels: Vec<usize>,
    /// `j_1, ..., j_{n_max+1}`.
    pub thresholds: Vec<u64>,
    /// `U_1, ...`.
    pub level_sets: Vec<Vec<NodePath>>,
    /// `z_a` for `a ∈ U_n`, restricted to `A ∩ j_n`.
    pub decided: Vec<BTreeMap<NodePath, Tuple>>,
    pub ledgers: Vec<StepLedger>,
    pub condition: Condition,
    pub bound: BoundMap,
    /// Members of `A` at or beyond the last threshold, not covered by the bound.
    pub uncovered: Vec<u64>,
}

fn restricted(v: &Value, keys: &BTreeSet<u64>) -> Result<Tuple> {
    match v {
        Value::Tuple(t) => Ok(t.iter().filter(|(k, _)| keys.contains(k)).map(|(k, v)| (*k, *v)).collect()),
        Value::Set(_) => Err(Error::Name("the bounding fusion needs a tuple name".into())),
    }
}

/// Strengthens `(cond)_a` so it decides the name on `keys`: keeps the depth-d
/// nodes whose restricted tuple matches that of the least one.
fn decide_by_pruning(cond: &Condition, a: &NodePath, name: &DeterminedName, keys: &BTreeSet<u64>) -> Result<(Condition, Tuple)> {
    let sub = cond.restrict(a)?;
    let d = name.depth();
    if a.len() >= d {
        let z = restricted(&name.value_on_branch(a)?, keys)?;
        return Ok((sub, z));
    }
    let mut values = BTreeMap::new();
    let mut failure = None;
    sub.for_each_at_depth(a, d, DEFAULT_ENUMERATION_LIMIT, |p, _| {
        match name.value_on_branch(p).and_then(|v| restricted(&v, keys)) {
            Ok(z) => {
                values.insert(p.clone(), z);
                ControlFlow::Continue(())
            }
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let z0 = values.values().next().cloned().ok_or_else(|| Error::NotInCondition(a.clone()))?;
    let pruned = sub.prune_at_depth(d, |p| values.get(p) == Some(&z0))?;
    Ok((pruned, z0))
}

fn keys_below(a: &[u64], j: u64) -> BTreeSet<u64> {
    a.iter().copied().filter(|&k| k < j).collect()
}

fn vii_entries(profile: &GrowthProfile, a: &[u64], j: u64, level_size: usize) -> Result<Vec<ViiEntry>> {
    let mut out = Vec::new();
    for &k in a.iter().filter(|&&k| k >= j) {
        let bound = profile.seq_p(k)?;
        out.push(ViiEntry {
            k,
            level_size,
            holds: HyperInt::from(level_size) < bound,
            bound,
        });
    }
    Ok(out)
}

fn distinct_at(z: &BTreeMap<NodePath, Tuple>, k: u64) -> usize {
    z.values().filter_map(|t| t.get(&k)).collect::<BTreeSet<_>>().len()
}

fn viii_direct(profile: &GrowthProfile, a: &[u64], j: u64, z: &BTreeMap<NodePath, Tuple>) -> Result<Vec<ViiiEntry>> {
    let mut out = Vec::new();
    for &k in a.iter().filter(|&&k| k < j) {
        let bound = profile.seq_p(k)?;
        let distinct = distinct_at(z, k);
        out.push(ViiiEntry {
            k,
            distinct,
            holds: HyperInt::from(distinct) <= bound,
            bound,
            source: ViiiSource::Direct,
        });
    }
    Ok(out)
}

/// (viii) at `n+1` after a Case I step, derived from the state at `n` and
/// confirmed by a direct count on the new level.
fn viii_case_one(
    profile: &GrowthProfile,
    a: &[u64],
    j_n: u64,
    prev_size: usize,
    z_prev: &BTreeMap<NodePath, Tuple>,
    z_next: &BTreeMap<NodePath, Tuple>,
) -> Result<Vec<ViiiEntry>> {
    let mut out = Vec::new();
    for &k in a.iter().filter(|&&k| k <= j_n) {
        let bound = profile.seq_p(k)?;
        let distinct = distinct_at(z_next, k);
        let (source, premise) = if k < j_n {
            (ViiiSource::FromViii, HyperInt::from(distinct_at(z_prev, k)) <= bound && distinct <= distinct_at(z_prev, k))
        } else {
            (ViiiSource::FromVii, HyperInt::from(prev_size) < bound && distinct <= prev_size)
        };
        out.push(ViiiEntry {
            k,
            distinct,
            holds: premise && HyperInt::from(distinct) <= bound,
            bound,
            source,
        });
    }
    Ok(out)
}

struct CaseTwoWitness {
    t: NodePath,
    m: u64,
    side_k: u64,
}

/// The least `t ⊋ v` in (length, lexicographic) order with at least
/// `P_m^{n+1}` successors, `m = ind(t) ∉ A`, and some `k ∈ A` in `[j_n, m)`.
fn find_case_two_witness(cond: &Condition, v: &NodePath, n: u64, j_n: u64, a: &[u64]) -> Result<Option<CaseTwoWitness>> {
    let profile = cond.profile();
    let mut found = None;
    let mut failure = None;
    for depth in v.len() + 1..=v.len() + WITNESS_SEARCH_DEPTH {
        let r = cond.for_each_at_depth(v, depth, WITNESS_SEARCH_BUDGET, |t, _| {
            let check = || -> Result<Option<CaseTwoWitness>> {
                let m = match profile.ind_u64(t) {
                    Ok(m) => m,
                    Err(Error::IndexBeyondCap { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                if a.contains(&m) {
                    return Ok(None);
                }
                let Some(side_k) = a.iter().copied().find(|&k| j_n <= k && k < m) else {
                    return Ok(None);
                };
                let need = profile.seq_p(m)?.pow_of_pow2(n + 1)?;
                Ok((cond.successor_count(t)? >= need).then(|| CaseTwoWitness { t: t.clone(), m, side_k }))
            };
            match check() {
                Ok(Some(w)) => {
                    found = Some(w);
                    ControlFlow::Break(())
                }
                Ok(None) => ControlFlow::Continue(()),
                Err(e) => {
                    failure = Some(e);
                    ControlFlow::Break(())
                }
            }
        });
        match r {
            Ok(()) => {}
            Err(Error::NotEnumerable { .. }) => break,
            Err(e) => return Err(e),
        }
        if let Some(e) = failure {
            return Err(e);
        }
        if found.is_some() {
            break;
        }
    }
    Ok(found)
}

fn lex_least_at(cond: &Condition, u: &NodePath, depth: usize) -> Result<NodePath> {
    let mut out = None;
    cond.for_each_at_depth(u, depth, DEFAULT_ENUMERATION_LIMIT, |p, _| {
        out = Some(p.clone());
        ControlFlow::Break(())
    })?;
    out.ok_or_else(|| Error::NotInCondition(u.clone()))
}

fn children_of(cond: &Condition, t: &NodePath) -> Result<Vec<NodePath>> {
    Ok(match cond.children(t)? {
        Children::Listed(v) => v.into_iter().map(|c| t.child(c)).collect(),
        Children::Full(w) => {
            let w = w
                .to_u64()
                .filter(|&w| w as usize <= DEFAULT_ENUMERATION_LIMIT)
                .ok_or(Error::NotEnumerable {
                    level: t.len() + 1,
                    limit: DEFAULT_ENUMERATION_LIMIT,
                })?;
            (0..w).map(|c| t.child(c)).collect()
        }
    })
}

fn domain(name: &DeterminedName) -> Result<Vec<u64>> {
    match name.kind() {
        NameKind::Tuple { domain } => Ok(domain.clone()),
        NameKind::Set { .. } => Err(Error::Name("the bounding fusion needs a tuple name".into())),
    }
}

/// Runs the construction from `T_1` for `steps` steps (`n = 1..=steps`) with
/// `A` the domain of `name`.
pub fn build_bounding_fusion(t1: &Condition, name: &DeterminedName, steps: u64) -> Result<BoundingFusion> {
    let profile = t1.profile().clone();
    let a = domain(name)?;
    let s = t1.trunk()?;
    if s.len() < 2 {
        return Err(Error::MalformedCondition {
            path: s,
            reason: "the trunk of T_1 must have length at least 2".into(),
        });
    }
    let l1 = s.len();
    let j1 = s.len() as u64;
    let (start, z_s) = decide_by_pruning(t1, &s, name, &keys_below(&a, j1))?;
    let mut chain = FusionChain::new(start, 1, l1);
    let mut levels = vec![l1];
    let mut thresholds = vec![j1];
    let mut level_sets = vec![vec![s.clone()]];
    let mut decided = vec![BTreeMap::from([(s.clone(), z_s)])];
    let mut ledgers = Vec::new();
    let init_vii = vii_entries(&profile, &a, j1, 1)?;
    if let Some(bad) = init_vii.iter().find(|e| !e.holds) {
        return Err(Error::Invariant(format!("(vii) fails at n = 1 for k = {}", bad.k)));
    }
    for n in 1..=steps {
        let cur = chain.last().clone();
        let l_n = *levels.last().unwrap();
        let j_n = *thresholds.last().unwrap();
        let u_n = level_sets.last().unwrap().clone();
        let z_n = decided.last().unwrap().clone();
        let s_n = profile.path_of(n)?;
        let mut parts = Vec::new();
        let mut z_next = BTreeMap::new();
        let mut u_next = Vec::new();
        let ledger = if !cur.contains(&s_n)? {
            let (l_next, j_next) = (l_n + 1, j_n + 1);
            let keys = keys_below(&a, j_next);
            for u in &u_n {
                let child = lex_least_at(&cur, u, l_next)?;
                let (t_a, z) = decide_by_pruning(&cur, &child, name, &keys)?;
                parts.push(t_a);
                z_next.insert(child.clone(), z);
                u_next.push(child);
            }
            chain.push_step(Condition::union(&parts)?, l_next, None)?;
            StepLedger {
                n,
                case: StepCase::One,
                l_next,
                j_next,
                level_size: u_next.len(),
                case_two: None,
                vii: vii_entries(&profile, &a, j_next, u_next.len())?,
                viii: viii_case_one(&profile, &a, j_n, u_n.len(), &z_n, &z_next)?,
            }
        } else {
            let v_n = u_n
                .iter()
                .find(|u| s_n.is_prefix_of(u))
                .cloned()
                .ok_or_else(|| Error::Invariant(format!("no member of U_{n} extends s_{n} = {s_n}")))?;
            let w = find_case_two_witness(&cur, &v_n, n, j_n, &a)?.ok_or_else(|| {
                Error::NoWitness(format!(
                    "obligation (s_{n} = {s_n}, {n}): no t above {v_n} with P_m^{} successors and some k in A with {j_n} <= k < m",
                    n + 1
                ))
            })?;
            let (m, l_next) = (w.m, w.t.len() + 1);
            let keys = keys_below(&a, m);
            for u in u_n.iter().filter(|u| **u != v_n) {
                let au = lex_least_at(&cur, u, l_next)?;
                let (t_a, z) = decide_by_pruning(&cur, &au, name, &keys)?;
                parts.push(t_a);
                z_next.insert(au.clone(), z);
                u_next.push(au);
            }
            let succ = children_of(&cur, &w.t)?;
            let mut s_parts = BTreeMap::new();
            let mut s_z = Vec::with_capacity(succ.len());
            for b in &succ {
                let (t_b, z) = decide_by_pruning(&cur, b, name, &keys)?;
                s_parts.insert(b.clone(), t_b);
                s_z.push(z);
            }
            let counting = counting_chain(&profile, &a, m)?;
            if !counting.holds() {
                return Err(Error::Invariant(format!("counting chain fails for A = {a:?}, m = {m}")));
            }
            let classes = s_z.iter().collect::<BTreeSet<_>>().len();
            if HyperInt::from(classes) > counting.product {
                return Err(Error::Invariant(format!("{classes} decided tuples exceed the product bound")));
            }
            let target = profile.seq_p(m)?.pow_of_pow2(n)?;
            let selected = pigeonhole_select(&succ, &s_z, &target)?;
            for b in &selected {
                let i = succ.iter().position(|x| x == b).unwrap();
                parts.push(s_parts.remove(b).unwrap());
                z_next.insert(b.clone(), s_z[i].clone());
                u_next.push(b.clone());
            }
            u_next.sort();
            chain.push_step(Condition::union(&parts)?, l_next, Some(w.t.clone()))?;
            let vii_links = vii_chain(&profile, &a, u_n.len(), selected.len(), u_next.len(), w.side_k, m)?;
            StepLedger {
                n,
                case: StepCase::Two,
                l_next,
                j_next: m,
                level_size: u_next.len(),
                case_two: Some(CaseTwo {
                    v_n,
                    t: w.t,
                    m,
                    side_k: w.side_k,
                    successors: succ.len(),
                    classes,
                    selected: selected.len(),
                    counting,
                    vii_links,
                }),
                vii: vii_entries(&profile, &a, m, u_next.len())?,
                viii: viii_direct(&profile, &a, m, &z_next)?,
            }
        };
        if !ledger.all_hold() {
            return Err(Error::Invariant(format!("step {n} ledger: {ledger:?}")));
        }
        let l_next = ledger.l_next;
        if chain.last().level_set(l_next)? != u_next {
            return Err(Error::Invariant(format!("U_{} is not level {l_next} of T_{}", n + 1, n + 1)));
        }
        levels.push(l_next);
        thresholds.push(ledger.j_next);
        level_sets.push(u_next);
        decided.push(z_next);
        ledgers.push(ledger);
    }
    let (condition, _) = chain.intersect()?;
    let j_final = *thresholds.last().unwrap();
    let z_final = decided.last().unwrap();
    let mut bound = BoundMap::new();
    let mut uncovered = Vec::new();
    for &k in &a {
        if k < j_final {
            bound.insert(k, z_final.values().filter_map(|t| t.get(&k).copied()).collect());
        } else {
            uncovered.push(k);
        }
    }
    check_admissible(&profile, &a, &bound)?;
    Ok(BoundingFusion {
        name: name.clone(),
        a,
        chain,
        levels,
        thresholds,
        level_sets,
        decided,
        ledgers,
        condition,
        bound,
        uncovered,
    })
}

fn vii_chain(
    profile: &GrowthProfile,
    a: &[u64],
    prev: usize,
    selected: usize,
    next: usize,
    side_k: u64,
    m: u64,
) -> Result<Vec<Link>> {
    let p_side = profile.seq_p(side_k)?;
    let p_m = profile.seq_p(m)?;
    let n_m = profile.seq_n(m)?;
    let p_m1 = profile.seq_p(m + 1)?;
    let sum = HyperInt::from(prev).add(&HyperInt::from(selected));
    let mut links = vec![
        Link::lt("|U_{n+1}| < |U_n| + |U|", HyperInt::from(next), sum.clone()),
        Link::lt(format!("|U_n| + |U| < P_{side_k} + N_{m}"), sum, p_side.add(&n_m)),
        Link::lt(format!("P_{side_k} + N_{m} < P_{m}·N_{m}"), p_side.add(&n_m), times_n(profile, &p_m, m)?),
        Link::eq(format!("P_{m}·N_{m} = P_{}", m + 1), times_n(profile, &p_m, m)?, p_m1.clone()),
    ];
    for &k in a.iter().filter(|&&k| k >= m) {
        links.push(Link::le(format!("P_{} <= P_{k}", m + 1), p_m1.clone(), profile.seq_p(k)?));
    }
    Ok(links)
}

impl BoundingFusion {
    /// Every branch of the final condition at the name's depth (or the last
    /// level, if deeper) satisfies the bound on the covered part of `A`.
    pub fn verify_branches(&self) -> Result<PhiSweep> {
        let depth = self.name.depth().max(*self.levels.last().unwrap());
        let covered: Vec<u64> = self.bound.keys().copied().collect();
        let mut sweep = PhiSweep::default();
        let mut failure = None;
        self.condition
            .for_each_at_depth(&NodePath::root(), depth, DEFAULT_ENUMERATION_LIMIT, |g, _| {
                match self.name.value_on_branch(g) {
                    Ok(x) => {
                        sweep.branches += 1;
                        if !verify_phi(&self.bound, &covered, &x) {
                            sweep.failures.push(g.clone());
                        }
                        ControlFlow::Continue(())
                    }
                    Err(e) => {
                        failure = Some(e);
                        ControlFlow::Break(())
                    }
                }
            })?;
        match failure {
            Some(e) => Err(e),
            None => Ok(sweep),
        }
    }

    /// `{z_a(k) : a ∈ U_n}` for every `n` with `k < j_n`; all agree.
    pub fn bound_history(&self, k: u64) -> Vec<BTreeSet<u64>> {
        self.decided
            .iter()
            .zip(&self.thresholds)
            .filter(|(_, &j)| k < j)
            .map(|(z, _)| z.values().filter_map(|t| t.get(&k).copied()).collect())
            .collect()
    }

    /// Re-checks (vi): each `(T)_a` with `a ∈ U_n` decides `z_a`.
    pub fn verify_decisions(&self) -> Result<usize> {
        let mut checked = 0;
        for z in &self.decided {
            for (a, za) in z {
                for (&k, &v) in za {
                    let q = Query::ComponentIn { k, values: BTreeSet::from([v]) };
                    if self.name.decide_below(&self.condition, a, &q)? != Decision::Yes {
                        return Err(Error::Invariant(format!("(T)_{a} does not decide x({k}) = {v}")));
                    }
                    checked += 1;
                }
            }
        }
        Ok(checked)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiSweep {
    pub branches: usize,
    pub failures: Vec<NodePath>,
}

/// A finite witness that `p` has an extension forcing the counter name out
/// of the bound.
#[derive(Clone, Debug)]
pub struct Escape {
    pub k: u64,
    pub s_k: NodePath,
    pub i: u64,
    pub p2: Condition,
    pub p3: Condition,
    pub decision: Decision,
}

pub fn escape_witness(p: &Condition, a: &[u64], u: &BoundMap) -> Result<Escape> {
    let profile: &Arc<GrowthProfile> = p.profile();
    check_admissible(profile, a, u)?;
    p.check_richness(2)?;
    let mut sorted = a.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &k in &sorted {
        let p_k = profile.seq_p(k)?;
        if p_k < HyperInt::small(2) {
            continue;
        }
        let s_k = profile.path_of(k)?;
        if !p.contains(&s_k)? || p.successor_count(&s_k)? < p_k.pow_of_pow2(2)? {
            continue;
        }
        let empty = BTreeSet::new();
        let avoid = u.get(&k).unwrap_or(&empty);
        let i = match p.children(&s_k)? {
            Children::Listed(v) => v.into_iter().find(|c| !avoid.contains(c)),
            Children::Full(_) => (0u64..).find(|c| !avoid.contains(c)),
        }
        .ok_or_else(|| Error::Invariant(format!("every child of {s_k} is in u({k})")))?;
        let p2 = p.restrict(&s_k)?;
        let p3 = p2.restrict(&s_k.child(i))?;
        if !s_k.child(i).is_prefix_of(&p3.trunk()?) {
            return Err(Error::Invariant(format!("{} is not on the trunk of p_3", s_k.child(i))));
        }
        let counter = DeterminedName::counter(profile.clone(), sorted.clone())?;
        let decision = counter.decide(&p3, &Query::ComponentIn { k, values: avoid.clone() })?;
        if decision != Decision::No {
            return Err(Error::Invariant(format!("p_3 does not force x({k}) outside u({k})")));
        }
        return Ok(Escape { k, s_k, i, p2, p3, decision });
    }
    Err(Error::NoWitness(format!(
        "no k in A with P_k >= 2 and s_k in p having P_k^2 successors (A = {sorted:?})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_one_viii_from_vii() {
        // Hand-built: j_n = 4 ∈ A, one node going to one child.
        let g = GrowthProfile::from_config(crate::growth::ProfileConfig::explicit(vec![1, 2, 2, 2, 2, 2, 1024])).unwrap();
        let a = [0, 2, 4];
        let u = NodePath::from([0, 1, 0, 5]);
        let child = u.child(0);
        let z_prev = BTreeMap::from([(u, Tuple::from([(0, 0), (2, 1)]))]);
        let z_next = BTreeMap::from([(child, Tuple::from([(0, 0), (2, 1), (4, 0)]))]);
        let entries = viii_case_one(&g, &a, 4, 1, &z_prev, &z_next).unwrap();
        let sources: Vec<_> = entries.iter().map(|e| (e.k, e.source)).collect();
        assert_eq!(
            sources,
            vec![(0, ViiiSource::FromViii), (2, ViiiSource::FromViii), (4, ViiiSource::FromVii)]
        );
        assert!(entries.iter().all(|e| e.holds));
    }

    #[test]
    fn pigeonhole_all_equal_returns_everything() {
        let s: Vec<_> = (0..8).map(|i| NodePath::from([0, i])).collect();
        let z = vec![Tuple::from([(1, 0)]); 8];
        assert_eq!(pigeonhole_select(&s, &z, &HyperInt::small(4)).unwrap(), s);
        assert!(pigeonhole_select(&s, &z, &HyperInt::small(9)).is_err());
    }

    #[test]
    fn counting_example() {
        let g = GrowthProfile::canonical();
        let c = counting_chain(&g, &[2, 3], 4).unwrap();
        assert_eq!(c.product, HyperInt::small(1024));
        assert_eq!(c.links[0].rhs, HyperInt::small(2048));
        assert!(c.holds());
    }

    fn test_setup() -> (Condition, DeterminedName) {
        let g = Arc::new(
            GrowthProfile::from_config(crate::growth::ProfileConfig::explicit(vec![1, 2, 2, 2, 2, 2, 1024])).unwrap(),
        );
        let t1 = Condition::full(g.clone()).restrict(&NodePath::from([0, 1])).unwrap();
        let name = DeterminedName::digits(g, 4, 3, vec![0, 2, 4, 5]).unwrap();
        (t1, name)
    }

    #[test]
    fn two_step_run() {
        let (t1, name) = test_setup();
        let f = build_bounding_fusion(&t1, &name, 2).unwrap();
        assert_eq!(f.levels, vec![2, 4, 5]);
        assert_eq!(f.thresholds, vec![2, 6, 7]);
        let two = f.ledgers[0].case_two.as_ref().unwrap();
        assert_eq!((two.t.clone(), two.m, two.classes, two.selected), (NodePath::from([0, 1, 0]), 6, 8, 128));
        assert_eq!(f.ledgers[1].case, StepCase::One);
        assert!(f.uncovered.is_empty());
        let sweep = f.verify_branches().unwrap();
        assert!(sweep.failures.is_empty() && sweep.branches == 128);
        assert!(f.verify_decisions().unwrap() > 0);
    }

    #[test]
    fn zero_steps_is_initial_state() {
        let (t1, name) = test_setup();
        let f = build_bounding_fusion(&t1, &name, 0).unwrap();
        assert_eq!(f.level_sets, vec![vec![NodePath::from([0, 1])]]);
        assert_eq!(f.uncovered, vec![2, 4, 5]);
    }
}
