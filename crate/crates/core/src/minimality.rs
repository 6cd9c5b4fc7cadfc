//! The pairwise-splitting fusion for a set name and the decoding of a branch
//! from the name's value.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::conditions::{Condition, DEFAULT_ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::fusion::FusionChain;
use crate::mastertree::NodePath;
use crate::names::{Decision, DeterminedName, NameKind, Query, Value};

/// How far below the first admissible level the witness search looks.
pub const WITNESS_SEARCH_DEPTH: usize = 6;

/// `α(a,b)` for a pair `a < b` of one level, and which side forces it in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub a: NodePath,
    pub b: NodePath,
    pub alpha: u64,
    /// `(T)_a ⊩ α ∈ Ẋ`; `(T)_b` forces the opposite.
    pub a_forces_in: bool,
}

#[derive(Clone, Debug)]
pub struct SplittingFusion {
    pub name: DeterminedName,
    pub chain: FusionChain,
    pub condition: Condition,
    /// `l_0, ..., l_{n_max}`.
    pub levels: Vec<usize>,
    /// `U_0, ..., U_{n_max}`.
    pub level_sets: Vec<Vec<NodePath>>,
    /// Splits among the pairs of `U_n`, indexed by `n`.
    pub splits: Vec<Vec<Split>>,
}

fn theta(name: &DeterminedName) -> Result<u64> {
    match name.kind() {
        NameKind::Set { theta } => Ok(*theta),
        NameKind::Tuple { .. } => Err(Error::Name("splitting needs a set name".into())),
    }
}

fn contains_alpha(name: &DeterminedName, alpha: u64) -> impl Fn(&NodePath) -> bool + '_ {
    move |p| matches!(name.value_on_branch(p), Ok(Value::Set(s)) if s.contains(&alpha))
}

/// Runs the construction for `steps` steps from `start`.
pub fn build_splitting_fusion(start: &Condition, name: &DeterminedName, steps: u64) -> Result<SplittingFusion> {
    let theta = theta(name)?;
    name.check_total_on(start)?;
    if let Some(stale) = name.first_stale_node(start)? {
        return Err(Error::NotFresh(stale));
    }
    let profile = start.profile().clone();
    let d = name.depth();
    let mut chain = FusionChain::new(start.clone(), 0, 0);
    let mut levels = vec![0usize];
    let mut level_sets = vec![vec![NodePath::root()]];
    let mut splits = vec![Vec::new()];
    for n in 0..steps {
        let cur = chain.last().clone();
        let l_n = chain.last_level();
        let s_n = profile.path_of(n)?;
        let (l_next, witness) = if cur.contains(&s_n)? {
            let w = cur
                .find_rich_extension(&s_n, n, l_n, WITNESS_SEARCH_DEPTH)?
                .ok_or_else(|| Error::NoWitness(format!("no rich extension of s_{n} = {s_n} at or past level {l_n}")))?;
            (w.node.len() + 1, Some(w.node))
        } else {
            (l_n + 1, None)
        };
        let level = cur.level_set(l_next)?;
        let mut sub: BTreeMap<NodePath, Condition> = BTreeMap::new();
        for a in &level {
            sub.insert(a.clone(), cur.restrict(a)?);
        }
        let mut found = Vec::new();
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                let split = split_pair(name, theta, d, &sub[a], &sub[b], a, b)?;
                let (ta, tb) = split.1;
                sub.insert(a.clone(), ta);
                sub.insert(b.clone(), tb);
                found.push(split.0);
            }
        }
        let next = cur.amalgamate(l_next, &sub)?;
        chain.push_step(next, l_next, witness)?;
        levels.push(l_next);
        level_sets.push(level);
        splits.push(found);
    }
    let (condition, _) = chain.intersect()?;
    Ok(SplittingFusion {
        name: name.clone(),
        chain,
        condition,
        levels,
        level_sets,
        splits,
    })
}

type SplitOutcome = (Split, (Condition, Condition));

fn split_pair(
    name: &DeterminedName,
    theta: u64,
    d: usize,
    ta: &Condition,
    tb: &Condition,
    a: &NodePath,
    b: &NodePath,
) -> Result<SplitOutcome> {
    for alpha in 0..theta {
        let q = Query::Contains(alpha);
        let da = name.decide_below(ta, a, &q)?;
        let db = name.decide_below(tb, b, &q)?;
        for a_in in [true, false] {
            let want_a = if a_in { Decision::Yes } else { Decision::No };
            let want_b = if a_in { Decision::No } else { Decision::Yes };
            // A side already decided the wrong way cannot be refined.
            if da == want_b || db == want_a {
                continue;
            }
            let has = contains_alpha(name, alpha);
            let ra = ta.prune_at_depth(d, |p| !a.comparable(p) || has(p) == a_in);
            let rb = tb.prune_at_depth(d, |p| !b.comparable(p) || has(p) != a_in);
            let (Ok(ra), Ok(rb)) = (ra, rb) else { continue };
            if !ra.contains(a)? || !rb.contains(b)? {
                continue;
            }
            let split = Split {
                a: a.clone(),
                b: b.clone(),
                alpha,
                a_forces_in: a_in,
            };
            return Ok((split, (ra, rb)));
        }
    }
    Err(Error::SplitFailed(a.clone(), b.clone()))
}

impl SplittingFusion {
    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    /// The unique `a ∈ U_n` agreeing with `x` on every split it takes part in.
    pub fn decode_level(&self, n: usize, x: &Value) -> Result<NodePath> {
        let Value::Set(x) = x else {
            return Err(Error::Name("decoding needs a set value".into()));
        };
        let mut agrees: BTreeMap<&NodePath, bool> = self.level_sets[n].iter().map(|a| (a, true)).collect();
        for s in &self.splits[n] {
            let inside = x.contains(&s.alpha);
            if inside != s.a_forces_in {
                agrees.insert(&s.a, false);
            }
            if inside == s.a_forces_in {
                agrees.insert(&s.b, false);
            }
        }
        let candidates: Vec<_> = agrees.into_iter().filter(|(_, ok)| *ok).map(|(a, _)| a).collect();
        match candidates.as_slice() {
            [a] => Ok((*a).clone()),
            _ => Err(Error::Decode {
                level: n,
                candidates: candidates.len(),
            }),
        }
    }

    /// Decodes every level; the results are nested and the last has length
    /// `l_{n_max}`.
    pub fn decode_branch(&self, x: &Value) -> Result<Vec<NodePath>> {
        let mut out: Vec<NodePath> = Vec::new();
        for n in 0..self.level_sets.len() {
            let a = self.decode_level(n, x)?;
            if let Some(prev) = out.last() {
                if !prev.is_prefix_of(&a) {
                    return Err(Error::Invariant(format!("decoded {a} at level {n} does not extend {prev}")));
                }
            }
            out.push(a);
        }
        Ok(out)
    }

    /// Depth of the branches used for round trips: enough for both the last
    /// level and the name.
    pub fn branch_depth(&self) -> usize {
        self.levels.last().copied().unwrap_or(0).max(self.name.depth())
    }

    /// Re-checks every split decision in the final condition and that each
    /// `U_n` is its level `l_n`.
    pub fn verify(&self) -> Result<VerificationSummary> {
        let t = &self.condition;
        let mut summary = VerificationSummary::default();
        for (n, u) in self.level_sets.iter().enumerate() {
            if t.level_set(self.levels[n])? != *u {
                return Err(Error::Invariant(format!("U_{n} is not level {} of T", self.levels[n])));
            }
            for s in &self.splits[n] {
                let q = Query::Contains(s.alpha);
                let da = self.name.decide_below(t, &s.a, &q)?;
                let db = self.name.decide_below(t, &s.b, &q)?;
                let (wa, wb) = if s.a_forces_in {
                    (Decision::Yes, Decision::No)
                } else {
                    (Decision::No, Decision::Yes)
                };
                if da != wa || db != wb {
                    return Err(Error::Invariant(format!(
                        "split of {} and {} at {} is {da:?}/{db:?}",
                        s.a, s.b, s.alpha
                    )));
                }
                summary.pairs_checked += 1;
            }
        }
        Ok(summary)
    }

    /// Decodes the value along every branch of the final condition at
    /// [`branch_depth`](Self::branch_depth) and compares with the prefixes.
    pub fn round_trip(&self) -> Result<RoundTrip> {
        let depth = self.branch_depth();
        let mut branches = Vec::new();
        self.condition
            .for_each_at_depth(&NodePath::root(), depth, DEFAULT_ENUMERATION_LIMIT, |p, _| {
                branches.push(p.clone());
                ControlFlow::Continue(())
            })?;
        let mut rt = RoundTrip::default();
        for g in branches {
            let x = self.name.value_on_branch(&g)?;
            let ok = match self.decode_branch(&x) {
                Ok(decoded) => decoded
                    .iter()
                    .zip(&self.levels)
                    .all(|(a, &l)| *a == g.prefix(l)),
                Err(_) => false,
            };
            rt.branches += 1;
            if !ok {
                rt.failures.push(g);
            }
        }
        Ok(rt)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub pairs_checked: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub branches: usize,
    pub failures: Vec<NodePath>,
}
