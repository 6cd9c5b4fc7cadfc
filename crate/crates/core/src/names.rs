//! Names decided at a fixed branch depth: the value along a branch depends
//! only on its first `d` entries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conditions::{Condition, DEFAULT_ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::growth::GrowthProfile;
use crate::mastertree::NodePath;

/// A value of a name: a finite set of ordinals below `theta`, or a finite
/// function from the domain into the naturals.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Value {
    Set(BTreeSet<u64>),
    Tuple(BTreeMap<u64, u64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Set(s) => {
                let items: Vec<_> = s.iter().map(u64::to_string).collect();
                write!(f, "{{{}}}", items.join(","))
            }
            Value::Tuple(t) => {
                let items: Vec<_> = t.iter().map(|(k, v)| format!("{k}:{v}")).collect();
                write!(f, "({})", items.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum NameKind {
    /// A subset of `{0, ..., theta-1}`.
    Set { theta: u64 },
    /// A function on `domain`.
    Tuple { domain: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum NameRule {
    /// Explicit values for every depth-`d` node of the ambient condition.
    Table { entries: BTreeMap<NodePath, Value> },
    Constant { value: Value },
    /// Set names: `{branch[d-1]}`.
    LastChild,
    /// Tuple names: `x(k) = (branch[position] >> off(k)) mod N_k`, where
    /// `off(k)` sums `log2 N_i` over the domain entries `i < k`. Set names:
    /// the bits of `branch[position]` below `theta`.
    Digits { position: usize },
    /// Tuple names: `x(k) = branch[len(s_k)]` when `s_k` is an initial
    /// segment of the branch, else `0`.
    ChildAfter,
}

/// A question put to a name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Query {
    /// `α ∈ Ẋ`.
    Contains(u64),
    /// The full value equals the given one.
    Equals(Value),
    /// `ẋ(k)` lies in the given set.
    ComponentIn { k: u64, values: BTreeSet<u64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Yes,
    No,
    Undecided,
}

#[derive(Clone, Debug)]
pub struct DeterminedName {
    profile: Arc<GrowthProfile>,
    depth: usize,
    kind: NameKind,
    rule: NameRule,
}

impl PartialEq for DeterminedName {
    fn eq(&self, other: &Self) -> bool {
        self.profile.id() == other.profile.id()
            && self.depth == other.depth
            && self.kind == other.kind
            && self.rule == other.rule
    }
}

fn name_err(msg: impl Into<String>) -> Error {
    Error::Name(msg.into())
}

impl DeterminedName {
    pub fn new(profile: Arc<GrowthProfile>, depth: usize, kind: NameKind, rule: NameRule) -> Result<Self> {
        let name = DeterminedName { profile, depth, kind, rule };
        name.check_shape()?;
        Ok(name)
    }

    fn check_shape(&self) -> Result<()> {
        let kind_ok = |v: &Value| match (&self.kind, v) {
            (NameKind::Set { theta }, Value::Set(s)) => s.iter().all(|a| a < theta),
            (NameKind::Tuple { domain }, Value::Tuple(t)) => t.keys().eq(domain.iter()),
            _ => false,
        };
        if let NameKind::Tuple { domain } = &self.kind {
            if domain.windows(2).any(|w| w[0] >= w[1]) {
                return Err(name_err("tuple domain must be strictly increasing"));
            }
        }
        match &self.rule {
            NameRule::Table { entries } => {
                for (p, v) in entries {
                    if p.len() != self.depth {
                        return Err(name_err(format!("table key {p} is not at depth {}", self.depth)));
                    }
                    if !kind_ok(v) {
                        return Err(name_err(format!("value {v} at {p} does not match the name kind")));
                    }
                }
            }
            NameRule::Constant { value } if !kind_ok(value) => {
                return Err(name_err(format!("constant {value} does not match the name kind")));
            }
            NameRule::LastChild if self.depth == 0 || !matches!(self.kind, NameKind::Set { .. }) => {
                return Err(name_err("last-child names are set names of positive depth"));
            }
            NameRule::Digits { position } if *position >= self.depth => {
                return Err(name_err("digit position must lie below the depth"));
            }
            NameRule::ChildAfter => {
                let NameKind::Tuple { domain } = &self.kind else {
                    return Err(name_err("child-after names are tuple names"));
                };
                for &k in domain {
                    let s = self.profile.path_of(k)?;
                    if s.len() >= self.depth {
                        return Err(name_err(format!("depth {} does not reach below s_{k} = {s}", self.depth)));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The value `{rank of the node within level d of ambient}` on each
    /// depth-`d` node; `theta` is the size of that level.
    pub fn identity(ambient: &Condition, depth: usize) -> Result<Self> {
        let level = ambient.level_set(depth)?;
        let entries = level
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), Value::Set(BTreeSet::from([i as u64]))))
            .collect();
        Self::new(
            ambient.profile().clone(),
            depth,
            NameKind::Set { theta: level.len() as u64 },
            NameRule::Table { entries },
        )
    }

    pub fn constant(profile: Arc<GrowthProfile>, depth: usize, kind: NameKind, value: Value) -> Result<Self> {
        Self::new(profile, depth, kind, NameRule::Constant { value })
    }

    pub fn last_child(profile: Arc<GrowthProfile>, depth: usize, theta: u64) -> Result<Self> {
        Self::new(profile, depth, NameKind::Set { theta }, NameRule::LastChild)
    }

    pub fn digits(profile: Arc<GrowthProfile>, depth: usize, position: usize, domain: Vec<u64>) -> Result<Self> {
        Self::new(profile, depth, NameKind::Tuple { domain }, NameRule::Digits { position })
    }

    /// The counter name on `domain`, decided at the least depth that reaches
    /// one level below every `s_k`.
    pub fn counter(profile: Arc<GrowthProfile>, domain: Vec<u64>) -> Result<Self> {
        let mut depth = 1;
        for &k in &domain {
            depth = depth.max(profile.path_of(k)?.len() + 1);
        }
        Self::new(profile, depth, NameKind::Tuple { domain }, NameRule::ChildAfter)
    }

    pub fn profile(&self) -> &Arc<GrowthProfile> {
        &self.profile
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn kind(&self) -> &NameKind {
        &self.kind
    }

    pub fn rule(&self) -> &NameRule {
        &self.rule
    }

    /// Errors unless the name has a value on every depth-`d` node of `ambient`.
    pub fn check_total_on(&self, ambient: &Condition) -> Result<()> {
        if let NameRule::Table { entries } = &self.rule {
            let mut missing = None;
            ambient.for_each_at_depth(&NodePath::root(), self.depth, DEFAULT_ENUMERATION_LIMIT, |p, _| {
                if entries.contains_key(p) {
                    ControlFlow::Continue(())
                } else {
                    missing = Some(p.clone());
                    ControlFlow::Break(())
                }
            })?;
            if let Some(p) = missing {
                return Err(name_err(format!("table has no entry for {p}")));
            }
        }
        Ok(())
    }

    /// The value along a branch of length at least `d`.
    pub fn value_on_branch(&self, branch: &NodePath) -> Result<Value> {
        if branch.len() < self.depth {
            return Err(name_err(format!("branch {branch} is shorter than the depth {}", self.depth)));
        }
        self.profile.ind(&branch.prefix(self.depth))?;
        self.value_on_prefix(branch)
    }

    fn value_on_prefix(&self, branch: &NodePath) -> Result<Value> {
        let b = branch.as_slice();
        match &self.rule {
            NameRule::Table { entries } => entries
                .get(&branch.prefix(self.depth))
                .cloned()
                .ok_or_else(|| name_err(format!("table has no entry for {}", branch.prefix(self.depth)))),
            NameRule::Constant { value } => Ok(value.clone()),
            NameRule::LastChild => {
                let v = b[self.depth - 1];
                Ok(Value::Set(match self.kind {
                    NameKind::Set { theta } if v < theta => BTreeSet::from([v]),
                    _ => BTreeSet::new(),
                }))
            }
            NameRule::Digits { position } => {
                let word = b[*position];
                match &self.kind {
                    NameKind::Set { theta } => Ok(Value::Set(
                        (0..(*theta).min(64)).filter(|&a| word >> a & 1 == 1).collect(),
                    )),
                    NameKind::Tuple { domain } => {
                        let mut off = 0u64;
                        let mut out = BTreeMap::new();
                        for &k in domain {
                            let bits = self.profile.seq_n(k)?.log2_exact().expect("N_k is a power of two");
                            let bits = bits.to_u64().filter(|&b| b < 64).ok_or_else(|| {
                                name_err(format!("N_{k} is too large for a digit name"))
                            })?;
                            let x = if off >= 64 { 0 } else { (word >> off) & ((1u64 << bits) - 1) };
                            out.insert(k, x);
                            off += bits;
                        }
                        Ok(Value::Tuple(out))
                    }
                }
            }
            NameRule::ChildAfter => {
                let NameKind::Tuple { domain } = &self.kind else { unreachable!("checked") };
                let mut out = BTreeMap::new();
                for &k in domain {
                    out.insert(k, self.component_child_after(k, branch)?);
                }
                Ok(Value::Tuple(out))
            }
        }
    }

    fn component_child_after(&self, k: u64, branch: &NodePath) -> Result<u64> {
        let s = self.profile.path_of(k)?;
        Ok(if s.len() < branch.len() && s.is_prefix_of(branch) {
            branch.as_slice()[s.len()]
        } else {
            0
        })
    }

    /// The depth at which `query` is settled.
    pub fn query_depth(&self, query: &Query) -> Result<usize> {
        Ok(match (&self.rule, query) {
            (NameRule::ChildAfter, Query::ComponentIn { k, .. }) => self.profile.path_of(*k)?.len() + 1,
            _ => self.depth,
        })
    }

    fn answer(&self, query: &Query, node: &NodePath) -> Result<bool> {
        if let (NameRule::ChildAfter, Query::ComponentIn { k, values }) = (&self.rule, query) {
            return Ok(values.contains(&self.component_child_after(*k, node)?));
        }
        let v = self.value_on_prefix(node)?;
        match (query, &v) {
            (Query::Contains(a), Value::Set(s)) => Ok(s.contains(a)),
            (Query::Equals(w), _) => Ok(*w == v),
            (Query::ComponentIn { k, values }, Value::Tuple(t)) => t
                .get(k)
                .map(|x| values.contains(x))
                .ok_or_else(|| name_err(format!("{k} is not in the domain"))),
            _ => Err(name_err("query does not match the name kind")),
        }
    }

    /// Yes if every relevant node of `cond` answers yes, No if none does.
    pub fn decide(&self, cond: &Condition, query: &Query) -> Result<Decision> {
        self.decide_below(cond, &NodePath::root(), query)
    }

    /// [`decide`](Self::decide) for `(cond)_a`.
    pub fn decide_below(&self, cond: &Condition, a: &NodePath, query: &Query) -> Result<Decision> {
        let depth = self.query_depth(query)?;
        let start = if a.len() > depth { a.prefix(depth) } else { a.clone() };
        if !cond.contains(a)? {
            return Err(Error::NotInCondition(a.clone()));
        }
        let (mut yes, mut no) = (false, false);
        let mut failure = None;
        cond.for_each_at_depth(&start, depth, DEFAULT_ENUMERATION_LIMIT, |p, _| {
            match self.answer(query, p) {
                Ok(true) => yes = true,
                Ok(false) => no = true,
                Err(e) => failure = Some(e),
            }
            if failure.is_some() || (yes && no) {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(match (yes, no) {
            (true, false) => Decision::Yes,
            (false, true) => Decision::No,
            _ => Decision::Undecided,
        })
    }

    /// The value taken on all depth-`d` nodes of `(cond)_a`, if it is unique.
    pub fn decided_value(&self, cond: &Condition, a: &NodePath) -> Result<Option<Value>> {
        let start = if a.len() > self.depth { a.prefix(self.depth) } else { a.clone() };
        let mut seen: Option<Value> = None;
        let mut split = false;
        let mut failure = None;
        cond.for_each_at_depth(&start, self.depth, DEFAULT_ENUMERATION_LIMIT, |p, _| {
            match self.value_on_prefix(p) {
                Ok(v) => match &seen {
                    None => seen = Some(v),
                    Some(w) if *w == v => {}
                    Some(_) => split = true,
                },
                Err(e) => failure = Some(e),
            }
            if split || failure.is_some() {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(if split { None } else { seen })
    }

    /// Every node of `cond` above depth `d` sees at least two values below it.
    pub fn is_fresh(&self, cond: &Condition) -> Result<bool> {
        Ok(self.first_stale_node(cond)?.is_none())
    }

    /// The least node (in length-lex order) of depth below `d` under which the
    /// name is constant.
    pub fn first_stale_node(&self, cond: &Condition) -> Result<Option<NodePath>> {
        let mut rows = Vec::new();
        let mut failure = None;
        cond.for_each_at_depth(&NodePath::root(), self.depth, DEFAULT_ENUMERATION_LIMIT, |p, _| {
            match self.value_on_prefix(p) {
                Ok(v) => rows.push((p.clone(), v)),
                Err(e) => failure = Some(e),
            }
            if failure.is_some() {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        for j in 0..self.depth {
            let mut i = 0;
            while i < rows.len() {
                let head = rows[i].0.prefix(j);
                let mut e = i;
                let mut varies = false;
                while e < rows.len() && rows[e].0.as_slice().starts_with(head.as_slice()) {
                    varies |= rows[e].1 != rows[i].1;
                    e += 1;
                }
                if !varies {
                    return Ok(Some(head));
                }
                i = e;
            }
        }
        Ok(None)
    }

    pub fn to_doc(&self) -> NameDoc {
        NameDoc {
            profile: self.profile.id().to_string(),
            depth: self.depth,
            kind: self.kind.clone(),
            rule: self.rule.clone(),
        }
    }

    pub fn from_doc(profile: Arc<GrowthProfile>, doc: NameDoc) -> Result<Self> {
        if doc.profile != profile.id() {
            return Err(name_err(format!(
                "name is for profile `{}`, not `{}`",
                doc.profile,
                profile.id()
            )));
        }
        Self::new(profile, doc.depth, doc.kind, doc.rule)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("name serializes")
    }

    pub fn from_json(profile: Arc<GrowthProfile>, text: &str) -> Result<Self> {
        Self::from_doc(profile, serde_json::from_str(text)?)
    }
}

/// JSON form of a name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NameDoc {
    pub profile: String,
    pub depth: usize,
    pub kind: NameKind,
    pub rule: NameRule,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[u64]) -> NodePath {
        NodePath(v.to_vec())
    }

    fn scaled() -> Arc<GrowthProfile> {
        Arc::new(GrowthProfile::scaled_default())
    }

    #[test]
    fn constant_decides_everything() {
        let g = scaled();
        let t = Condition::full(g.clone());
        let n = DeterminedName::constant(g, 3, NameKind::Set { theta: 8 }, Value::Set(BTreeSet::from([2]))).unwrap();
        assert_eq!(n.decide(&t, &Query::Contains(2)).unwrap(), Decision::Yes);
        assert_eq!(n.decide(&t, &Query::Contains(3)).unwrap(), Decision::No);
        assert!(!n.is_fresh(&t).unwrap());
    }

    #[test]
    fn last_child_singleton_below_depth() {
        let g = scaled();
        let t = Condition::full(g.clone());
        let n = DeterminedName::last_child(g, 3, 4).unwrap();
        let r = t.restrict(&p(&[0, 1, 2])).unwrap();
        assert_eq!(n.decided_value(&r, &NodePath::root()).unwrap(), Some(Value::Set(BTreeSet::from([2]))));
        assert_eq!(n.decide(&t, &Query::Contains(2)).unwrap(), Decision::Undecided);
    }

    #[test]
    fn identity_is_fresh_where_branching() {
        let g = scaled();
        let t = Condition::full(g.clone());
        let n = DeterminedName::identity(&t, 3).unwrap();
        assert_eq!(n.kind(), &NameKind::Set { theta: 20 });
        // The root and <0> have a single child but still see many values.
        assert!(n.is_fresh(&t).unwrap());
        let thin = t.restrict(&p(&[0, 1, 3])).unwrap();
        assert_eq!(n.first_stale_node(&thin).unwrap(), Some(NodePath::root()));
    }

    #[test]
    fn counter_component_depth() {
        let g = scaled();
        let n = DeterminedName::counter(g.clone(), vec![1, 2, 3]).unwrap();
        assert_eq!(n.depth(), 3);
        let q = Query::ComponentIn { k: 3, values: BTreeSet::from([2]) };
        assert_eq!(n.query_depth(&q).unwrap(), 3);
        let t = Condition::full(g);
        assert_eq!(n.decide_below(&t, &p(&[0, 1, 2]), &q).unwrap(), Decision::Yes);
        assert_eq!(n.decide_below(&t, &p(&[0, 0]), &q).unwrap(), Decision::No);
        assert_eq!(n.decide_below(&t, &p(&[0, 1]), &q).unwrap(), Decision::Undecided);
    }

    #[test]
    fn json_round_trip() {
        let g = scaled();
        let t = Condition::full(g.clone());
        let n = DeterminedName::identity(&t, 2).unwrap();
        let back = DeterminedName::from_json(g.clone(), &n.to_json()).unwrap();
        assert_eq!(back, n);
        let bad = r#"{"profile":"scaled-c4","depth":2,"kind":{"type":"set","theta":1},"rule":{"rule":"table","entries":{"<0,0>":{"set":[5]}}}}"#;
        assert!(DeterminedName::from_json(g, bad).is_err());
    }

    #[test]
    fn table_must_be_total() {
        let g = scaled();
        let t = Condition::full(g.clone());
        let entries = BTreeMap::from([(p(&[0, 0]), Value::Set(BTreeSet::new()))]);
        let n = DeterminedName::new(g, 2, NameKind::Set { theta: 1 }, NameRule::Table { entries }).unwrap();
        assert!(n.check_total_on(&t).is_err());
        assert!(n.value_on_branch(&p(&[0, 1, 0])).is_err());
    }
}
