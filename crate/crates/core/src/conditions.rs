//! Finitely presented conditions: an explicit finite subtree of the master
//! tree whose leaves carry a tail marker meaning "everything of the master
//! tree below here".
//!
//! Conditions are kept in a normal form in which an explicit node is replaced
//! by a tail as soon as it lists every master-tree child and each of those
//! children is a tail. In that form a tail appears exactly where the subtree
//! is full, which makes inclusion a structural test.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::GrowthProfile;
use crate::hyperint::HyperInt;
use crate::mastertree::NodePath;

/// Default cap on the number of nodes visited by a single enumeration.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 1 << 20;
/// How many levels below a node the richness witness search descends.
pub const DEFAULT_WITNESS_SEARCH_DEPTH: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
/// A node of the explicit part of a condition.
pub enum Node {
    Tail,
    Explicit(BTreeMap<u64, Node>),
}

/// Where a path lands inside a condition.
#[derive(Clone, Copy, Debug)]
pub enum Place<'a> {
    /// An explicitly listed node with the listed children.
    Explicit(&'a BTreeMap<u64, Node>),
    /// A node of the master tree below a tail marker (or the marker itself).
    Tail,
}

/// The children of a node inside a condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Children {
    Listed(Vec<u64>),
    /// All master-tree children; the count may be astronomically large.
    Full(HyperInt),
}

impl Children {
    pub fn count(&self) -> HyperInt {
        match self {
            Children::Listed(v) => HyperInt::from(v.len()),
            Children::Full(n) => n.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Condition {
    profile: Arc<GrowthProfile>,
    root: Node,
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.profile.id() == other.profile.id() && self.root == other.root
    }
}

impl Eq for Condition {}

impl Condition {
    /// The master tree itself.
    pub fn full(profile: Arc<GrowthProfile>) -> Self {
        Condition { profile, root: Node::Tail }
    }

    pub fn profile(&self) -> &Arc<GrowthProfile> {
        &self.profile
    }

    fn build(profile: Arc<GrowthProfile>, root: Node) -> Result<Self> {
        let mut c = Condition { profile, root };
        c.validate()?;
        c.root = c.normalized(&c.root, &mut Vec::new());
        Ok(c)
    }

    /// Builds a condition from explicit paths: every listed path, together
    /// with its prefixes, becomes an explicit node, and each path that has no
    /// listed extension gets a tail.
    pub fn from_tail_paths(profile: Arc<GrowthProfile>, leaves: &[NodePath]) -> Result<Self> {
        if leaves.is_empty() {
            return Err(Error::MalformedCondition {
                path: NodePath::root(),
                reason: "no nodes".into(),
            });
        }
        let mut root = Node::Explicit(BTreeMap::new());
        for leaf in leaves {
            let mut cur = &mut root;
            for &c in &leaf.0 {
                let Node::Explicit(map) = cur else { unreachable!() };
                cur = map.entry(c).or_insert_with(|| Node::Explicit(BTreeMap::new()));
            }
        }
        fn close(n: &mut Node) {
            match n {
                Node::Explicit(map) if map.is_empty() => *n = Node::Tail,
                Node::Explicit(map) => map.values_mut().for_each(close),
                Node::Tail => {}
            }
        }
        close(&mut root);
        Self::build(profile, root)
    }

    fn validate(&self) -> Result<()> {
        fn walk(profile: &GrowthProfile, node: &Node, path: &mut NodePath) -> Result<()> {
            let Node::Explicit(map) = node else { return Ok(()) };
            if map.is_empty() {
                return Err(Error::MalformedCondition {
                    path: path.clone(),
                    reason: "leaf without a tail marker".into(),
                });
            }
            for (&c, child) in map {
                if !profile.child_in_range(path, c)? {
                    return Err(Error::MalformedCondition {
                        path: path.clone(),
                        reason: format!("child {c} is not a master-tree child"),
                    });
                }
                path.0.push(c);
                walk(profile, child, path)?;
                path.0.pop();
            }
            Ok(())
        }
        walk(&self.profile, &self.root, &mut NodePath::root())
    }

    fn normalized(&self, node: &Node, path: &mut Vec<u64>) -> Node {
        let Node::Explicit(map) = node else { return Node::Tail };
        let mut out = BTreeMap::new();
        for (&c, child) in map {
            path.push(c);
            out.insert(c, self.normalized(child, path));
            path.pop();
        }
        if out.values().all(|n| *n == Node::Tail) {
            let here = NodePath(path.clone());
            if let Ok(width) = self.profile.branching(&here) {
                if HyperInt::from(out.len()) == width {
                    return Node::Tail;
                }
            }
        }
        Node::Explicit(out)
    }

    /// Locates `path`; `None` if it is not in the condition.
    pub fn place(&self, path: &NodePath) -> Result<Option<Place<'_>>> {
        let mut node = &self.root;
        for (i, &c) in path.0.iter().enumerate() {
            match node {
                Node::Tail => {
                    let mut prefix = path.prefix(i);
                    for &d in &path.0[i..] {
                        if !self.profile.child_in_range(&prefix, d)? {
                            return Ok(None);
                        }
                        prefix.0.push(d);
                    }
                    return Ok(Some(Place::Tail));
                }
                Node::Explicit(map) => match map.get(&c) {
                    Some(n) => node = n,
                    None => return Ok(None),
                },
            }
        }
        Ok(Some(match node {
            Node::Tail => Place::Tail,
            Node::Explicit(map) => Place::Explicit(map),
        }))
    }

    pub fn contains(&self, path: &NodePath) -> Result<bool> {
        Ok(self.place(path)?.is_some())
    }

    /// Whether `path` lies in the part of the condition that is listed
    /// explicitly (including tail-marked leaves).
    pub fn is_explicit(&self, path: &NodePath) -> bool {
        let mut node = &self.root;
        for &c in &path.0 {
            match node {
                Node::Tail => return false,
                Node::Explicit(map) => match map.get(&c) {
                    Some(n) => node = n,
                    None => return false,
                },
            }
        }
        true
    }

    pub fn children(&self, path: &NodePath) -> Result<Children> {
        match self.place(path)? {
            None => Err(Error::NotInCondition(path.clone())),
            Some(Place::Explicit(map)) => Ok(Children::Listed(map.keys().copied().collect())),
            Some(Place::Tail) => Ok(Children::Full(self.profile.branching(path)?)),
        }
    }

    pub fn successor_count(&self, path: &NodePath) -> Result<HyperInt> {
        Ok(self.children(path)?.count())
    }

    fn subtree(&self, path: &NodePath) -> Result<Node> {
        match self.place(path)? {
            None => Err(Error::NotInCondition(path.clone())),
            Some(Place::Tail) => Ok(Node::Tail),
            Some(Place::Explicit(map)) => Ok(Node::Explicit(map.clone())),
        }
    }

    /// `(T)_a`: the nodes comparable with `a`.
    pub fn restrict(&self, a: &NodePath) -> Result<Condition> {
        let mut node = self.subtree(a)?;
        for &c in a.0.iter().rev() {
            node = Node::Explicit(BTreeMap::from([(c, node)]));
        }
        Ok(Condition {
            profile: self.profile.clone(),
            root: self.normalized(&node, &mut Vec::new()),
        })
    }

    /// The longest node comparable with every node of the condition.
    pub fn trunk(&self) -> Result<NodePath> {
        let mut path = NodePath::root();
        let mut node = &self.root;
        loop {
            match node {
                Node::Explicit(map) if map.len() == 1 => {
                    let (&c, next) = map.iter().next().unwrap();
                    path.0.push(c);
                    node = next;
                }
                Node::Explicit(_) => return Ok(path),
                Node::Tail => {
                    while self.profile.branching(&path)? == HyperInt::ONE {
                        path.0.push(0);
                    }
                    return Ok(path);
                }
            }
        }
    }

    /// Visits the nodes at depth `depth` extending `from` in lexicographic
    /// order, with their children inside the condition.
    pub fn for_each_at_depth<F>(&self, from: &NodePath, depth: usize, limit: usize, mut f: F) -> Result<()>
    where
        F: FnMut(&NodePath, Place<'_>) -> ControlFlow<()>,
    {
        let Some(start) = self.place(from)? else {
            return Err(Error::NotInCondition(from.clone()));
        };
        if depth < from.len() {
            return Ok(());
        }
        let mut budget = limit;
        let mut path = from.clone();
        let _ = self.visit(start, &mut path, depth, &mut budget, limit, &mut f)?;
        Ok(())
    }

    fn visit<F>(
        &self,
        place: Place<'_>,
        path: &mut NodePath,
        depth: usize,
        budget: &mut usize,
        limit: usize,
        f: &mut F,
    ) -> Result<ControlFlow<()>>
    where
        F: FnMut(&NodePath, Place<'_>) -> ControlFlow<()>,
    {
        if *budget == 0 {
            return Err(Error::NotEnumerable { level: depth, limit });
        }
        *budget -= 1;
        if path.len() == depth {
            return Ok(f(path, place));
        }
        match place {
            Place::Explicit(map) => {
                for (&c, child) in map {
                    let p = match child {
                        Node::Tail => Place::Tail,
                        Node::Explicit(m) => Place::Explicit(m),
                    };
                    path.0.push(c);
                    let r = self.visit(p, path, depth, budget, limit, f)?;
                    path.0.pop();
                    if r.is_break() {
                        return Ok(r);
                    }
                }
            }
            Place::Tail => {
                let width = self.profile.branching(path)?;
                let mut c = 0u64;
                while HyperInt::small(c) < width {
                    path.0.push(c);
                    let r = self.visit(Place::Tail, path, depth, budget, limit, f)?;
                    path.0.pop();
                    if r.is_break() {
                        return Ok(r);
                    }
                    c += 1;
                }
            }
        }
        Ok(ControlFlow::Continue(()))
    }

    pub fn level_set(&self, l: usize) -> Result<Vec<NodePath>> {
        self.level_set_limited(l, DEFAULT_ENUMERATION_LIMIT)
    }

    /// `T ∩ ω^l`, in lexicographic order.
    pub fn level_set_limited(&self, l: usize, limit: usize) -> Result<Vec<NodePath>> {
        let mut out = Vec::new();
        self.for_each_at_depth(&NodePath::root(), l, limit, |p, _| {
            out.push(p.clone());
            ControlFlow::Continue(())
        })?;
        Ok(out)
    }

    /// The explicitly listed nodes (tail markers included), in lexicographic order.
    pub fn explicit_nodes(&self) -> Vec<NodePath> {
        fn walk(node: &Node, path: &mut NodePath, out: &mut Vec<NodePath>) {
            out.push(path.clone());
            if let Node::Explicit(map) = node {
                for (&c, child) in map {
                    path.0.push(c);
                    walk(child, path, out);
                    path.0.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut NodePath::root(), &mut out);
        out
    }

    /// Deepest explicitly listed node.
    pub fn explicit_depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Tail => 0,
                Node::Explicit(m) => 1 + m.values().map(d).max().unwrap_or(0),
            }
        }
        d(&self.root)
    }

    fn expanded(&self, node: &Node, path: &mut NodePath, depth: usize, budget: &mut usize) -> Result<Node> {
        if path.len() >= depth {
            return Ok(node.clone());
        }
        if *budget == 0 {
            return Err(Error::NotEnumerable {
                level: depth,
                limit: DEFAULT_ENUMERATION_LIMIT,
            });
        }
        *budget -= 1;
        let mut out = BTreeMap::new();
        match node {
            Node::Explicit(map) => {
                for (&c, child) in map {
                    path.0.push(c);
                    out.insert(c, self.expanded(child, path, depth, budget)?);
                    path.0.pop();
                }
            }
            Node::Tail => {
                let width = self.profile.branching(path)?;
                let mut c = 0u64;
                while HyperInt::small(c) < width {
                    path.0.push(c);
                    out.insert(c, self.expanded(&Node::Tail, path, depth, budget)?);
                    path.0.pop();
                    c += 1;
                }
            }
        }
        Ok(Node::Explicit(out))
    }

    /// Keeps exactly the depth-`depth` nodes accepted by `keep` (with what lies
    /// below them), drops nodes left without children, and re-normalizes.
    pub fn prune_at_depth(&self, depth: usize, mut keep: impl FnMut(&NodePath) -> bool) -> Result<Condition> {
        if depth == 0 {
            return if keep(&NodePath::root()) {
                Ok(self.clone())
            } else {
                Err(Error::MalformedCondition {
                    path: NodePath::root(),
                    reason: "pruning removed every node".into(),
                })
            };
        }
        let mut budget = DEFAULT_ENUMERATION_LIMIT;
        let expanded = self.expanded(&self.root, &mut NodePath::root(), depth, &mut budget)?;
        fn prune(node: Node, path: &mut NodePath, depth: usize, keep: &mut dyn FnMut(&NodePath) -> bool) -> Option<Node> {
            if path.len() == depth {
                return keep(path).then_some(node);
            }
            let Node::Explicit(map) = node else { unreachable!("expanded to depth") };
            let mut out = BTreeMap::new();
            for (c, child) in map {
                path.0.push(c);
                if let Some(n) = prune(child, path, depth, keep) {
                    out.insert(c, n);
                }
                path.0.pop();
            }
            (!out.is_empty()).then_some(Node::Explicit(out))
        }
        let root = prune(expanded, &mut NodePath::root(), depth, &mut keep).ok_or_else(|| {
            Error::MalformedCondition {
                path: NodePath::root(),
                reason: "pruning removed every node".into(),
            }
        })?;
        Ok(Condition {
            profile: self.profile.clone(),
            root: self.normalized(&root, &mut Vec::new()),
        })
    }

    /// Union of conditions over the same profile.
    pub fn union(parts: &[Condition]) -> Result<Condition> {
        let first = parts.first().ok_or_else(|| Error::Amalgamation("empty union".into()))?;
        fn merge(a: &mut Node, b: &Node) {
            match (&mut *a, b) {
                (Node::Tail, _) => {}
                (_, Node::Tail) => *a = Node::Tail,
                (Node::Explicit(x), Node::Explicit(y)) => {
                    for (c, child) in y {
                        match x.get_mut(c) {
                            Some(mine) => merge(mine, child),
                            None => {
                                x.insert(*c, child.clone());
                            }
                        }
                    }
                }
            }
        }
        let mut root = first.root.clone();
        for p in &parts[1..] {
            if p.profile.id() != first.profile.id() {
                return Err(Error::Amalgamation("conditions over different profiles".into()));
            }
            merge(&mut root, &p.root);
        }
        Ok(Condition {
            profile: first.profile.clone(),
            root: first.normalized(&root, &mut Vec::new()),
        })
    }

    /// The least node of length at most `l` lying in exactly one of the two
    /// conditions, or `None` when `T ∩ ω^l` agrees. Compares structure, so
    /// the level need not be enumerable.
    pub fn level_difference(&self, other: &Condition, l: usize) -> Result<Option<NodePath>> {
        let mut path = NodePath::root();
        self.diff_nodes(&self.root, &other.root, &mut path, l)
    }

    fn diff_nodes(&self, a: &Node, b: &Node, path: &mut NodePath, l: usize) -> Result<Option<NodePath>> {
        if path.len() >= l {
            return Ok(None);
        }
        match (a, b) {
            (Node::Tail, Node::Tail) => Ok(None),
            (Node::Explicit(x), Node::Explicit(y)) => {
                for c in x.keys().chain(y.keys()).collect::<BTreeSet<_>>() {
                    path.0.push(*c);
                    let r = match (x.get(c), y.get(c)) {
                        (Some(u), Some(v)) => self.diff_nodes(u, v, path, l)?,
                        _ => Some(path.clone()),
                    };
                    path.0.pop();
                    if r.is_some() {
                        return Ok(r);
                    }
                }
                Ok(None)
            }
            (Node::Tail, Node::Explicit(y)) | (Node::Explicit(y), Node::Tail) => {
                let width = self.profile.branching(path)?;
                let mut c = 0u64;
                while HyperInt::small(c) < width {
                    path.0.push(c);
                    let r = match y.get(&c) {
                        Some(v) => self.diff_nodes(&Node::Tail, v, path, l)?,
                        None => Some(path.clone()),
                    };
                    path.0.pop();
                    if r.is_some() {
                        return Ok(r);
                    }
                    c += 1;
                }
                Ok(None)
            }
        }
    }

    /// `self ⊆ other`: `self` is at least as strong as `other`.
    pub fn is_stronger_than(&self, other: &Condition) -> bool {
        fn sub(a: &Node, b: &Node) -> bool {
            match (a, b) {
                (_, Node::Tail) => true,
                (Node::Tail, Node::Explicit(_)) => false,
                (Node::Explicit(x), Node::Explicit(y)) => x
                    .iter()
                    .all(|(c, child)| y.get(c).is_some_and(|theirs| sub(child, theirs))),
            }
        }
        sub(&self.root, &other.root)
    }

    /// Replaces each `a` in level `l` by the assigned `T_a ⊆ (T)_a` and
    /// returns the union. The level itself is preserved.
    pub fn amalgamate(&self, l: usize, assignments: &BTreeMap<NodePath, Condition>) -> Result<Condition> {
        let level = self.level_set(l)?;
        let wanted: BTreeSet<&NodePath> = level.iter().collect();
        if let Some(extra) = assignments.keys().find(|k| !wanted.contains(k)) {
            return Err(Error::Amalgamation(format!("{extra} is not on level {l}")));
        }
        let mut parts = Vec::with_capacity(level.len());
        for a in &level {
            let t_a = assignments
                .get(a)
                .ok_or_else(|| Error::Amalgamation(format!("no subcondition for {a}")))?;
            if !t_a.is_stronger_than(&self.restrict(a)?) {
                return Err(Error::Amalgamation(format!("subcondition for {a} escapes (T)_a")));
            }
            if !t_a.contains(a)? {
                return Err(Error::Amalgamation(format!("subcondition for {a} misses {a}")));
            }
            parts.push(t_a.clone());
        }
        Condition::union(&parts)
    }

    pub fn check_richness(&self, level: u64) -> Result<RichnessCertificate> {
        self.check_richness_with(level, DEFAULT_WITNESS_SEARCH_DEPTH)
    }

    /// Certifies the obligations for `n < level`: whenever `s_n` lies in the
    /// condition, some `t ⊇ s_n` has at least `P_{ind(t)}^n` successors.
    /// Nodes beyond the index cap of the canonical profile are discharged by
    /// the profile's richness threshold when they sit inside a tail.
    pub fn check_richness_with(&self, level: u64, search_depth: usize) -> Result<RichnessCertificate> {
        let mut obligations = Vec::new();
        let mut failures = Vec::new();
        for n in 0..level {
            let s = self.profile.path_of(n)?;
            let witness = if self.contains(&s)? {
                let w = self.find_witness(&s, n, s.len(), s.len() + search_depth)?;
                if w.is_none() {
                    failures.push((s.clone(), n));
                }
                w
            } else {
                None
            };
            obligations.push(Obligation { n, node: s, witness });
        }
        if !failures.is_empty() {
            return Err(Error::Unwitnessed(failures));
        }
        Ok(RichnessCertificate { level, obligations })
    }

    /// The least `t ⊋ s` in (length, lexicographic) order with
    /// `length(t) ≥ min_len` and at least `P_{ind(t)}^n` successors, searching
    /// `search_depth` levels from the first admissible one.
    pub fn find_rich_extension(&self, s: &NodePath, n: u64, min_len: usize, search_depth: usize) -> Result<Option<RichnessWitness>> {
        let lo = min_len.max(s.len() + 1);
        self.find_witness(s, n, lo, lo + search_depth)
    }

    fn find_witness(&self, s: &NodePath, n: u64, lo: usize, hi: usize) -> Result<Option<RichnessWitness>> {
        let threshold = if self.profile.is_canonical() {
            self.profile.richness_threshold(n)?.threshold
        } else {
            None
        };
        let mut found = None;
        let mut failure = None;
        let cap = self.profile.index_cap();
        for depth in lo..=hi {
            let beyond_cap = self.profile.level_offset(depth)? > HyperInt::small(cap);
            if beyond_cap && !threshold.is_some_and(|k| k <= cap + 1) {
                break;
            }
            let r = self.for_each_at_depth(s, depth, 1 << 16, |t, place| {
                if beyond_cap && !matches!(place, Place::Tail) {
                    return ControlFlow::Continue(());
                }
                match self.witness_at(t, place, n, threshold) {
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

    fn witness_at(&self, t: &NodePath, place: Place<'_>, n: u64, threshold: Option<u64>) -> Result<Option<RichnessWitness>> {
        match self.profile.ind_u64(t) {
            Ok(k) => {
                let succ = match place {
                    Place::Explicit(map) => HyperInt::from(map.len()),
                    Place::Tail => self.profile.branching_at(k)?,
                };
                // Past the threshold a full node is rich; an explicit node
                // cannot reach a requirement of 2^64 or more.
                let settled = matches!(place, Place::Tail) && threshold.is_some_and(|t| k >= t);
                let hopeless = n > 0 && succ.to_u64().is_some() && self.profile.seq_e(k)?.to_u64().is_none_or(|e| e >= 64);
                let rich = settled
                    || (!hopeless && {
                        let required = self.profile.seq_p(k)?.pow_of_pow2(n)?;
                        succ >= required
                    });
                Ok(rich.then(|| RichnessWitness {
                    node: t.clone(),
                    index: Some(k),
                    successors: succ,
                    via: WitnessKind::Direct,
                }))
            }
            Err(Error::IndexBeyondCap { .. }) => {
                let cap = self.profile.index_cap();
                match (place, threshold) {
                    (Place::Tail, Some(k)) if k <= cap + 1 => Ok(Some(RichnessWitness {
                        node: t.clone(),
                        index: None,
                        successors: self.profile.branching_at(cap)?,
                        via: WitnessKind::Threshold { k },
                    })),
                    _ => Ok(None),
                }
            }
            Err(e) => Err(e),
        }
    }

    pub fn to_doc(&self) -> ConditionDoc {
        let mut nodes = Vec::new();
        fn walk(node: &Node, path: &mut NodePath, out: &mut Vec<NodeDoc>) {
            match node {
                Node::Tail => out.push(NodeDoc {
                    path: path.clone(),
                    children: Vec::new(),
                    tail: true,
                }),
                Node::Explicit(map) => {
                    out.push(NodeDoc {
                        path: path.clone(),
                        children: map.keys().copied().collect(),
                        tail: false,
                    });
                    for (&c, child) in map {
                        path.0.push(c);
                        walk(child, path, out);
                        path.0.pop();
                    }
                }
            }
        }
        walk(&self.root, &mut NodePath::root(), &mut nodes);
        ConditionDoc {
            profile: self.profile.id().to_string(),
            nodes,
        }
    }

    pub fn from_doc(profile: Arc<GrowthProfile>, doc: &ConditionDoc) -> Result<Condition> {
        if doc.profile != profile.id() {
            return Err(Error::MalformedCondition {
                path: NodePath::root(),
                reason: format!("condition is for profile `{}`, not `{}`", doc.profile, profile.id()),
            });
        }
        let mut by_path = BTreeMap::new();
        for nd in &doc.nodes {
            if by_path.insert(nd.path.clone(), nd).is_some() {
                return Err(Error::MalformedCondition {
                    path: nd.path.clone(),
                    reason: "listed twice".into(),
                });
            }
        }
        fn build(path: &NodePath, by_path: &BTreeMap<NodePath, &NodeDoc>, seen: &mut usize) -> Result<Node> {
            let nd = by_path.get(path).ok_or_else(|| Error::MalformedCondition {
                path: path.clone(),
                reason: "referenced but not listed".into(),
            })?;
            *seen += 1;
            if nd.tail {
                if !nd.children.is_empty() {
                    return Err(Error::MalformedCondition {
                        path: path.clone(),
                        reason: "tail nodes list no children".into(),
                    });
                }
                return Ok(Node::Tail);
            }
            let mut map = BTreeMap::new();
            for &c in &nd.children {
                map.insert(c, build(&path.child(c), by_path, seen)?);
            }
            Ok(Node::Explicit(map))
        }
        let mut seen = 0;
        let root = build(&NodePath::root(), &by_path, &mut seen)?;
        if seen != by_path.len() {
            let orphan = by_path
                .keys()
                .find(|p| p.parent().is_none_or(|q| by_path.get(&q).is_none_or(|d| !d.children.contains(p.0.last().unwrap()))))
                .cloned()
                .unwrap_or_default();
            return Err(Error::MalformedCondition {
                path: orphan,
                reason: "not reachable from the root".into(),
            });
        }
        Condition::build(profile, root)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("condition serializes")
    }

    pub fn from_json(profile: Arc<GrowthProfile>, text: &str) -> Result<Condition> {
        Condition::from_doc(profile, &serde_json::from_str(text)?)
    }
}

/// Flat JSON form of a condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionDoc {
    pub profile: String,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub path: NodePath,
    #[serde(default)]
    pub children: Vec<u64>,
    #[serde(default)]
    pub tail: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WitnessKind {
    Direct,
    /// Inside a tail beyond the index cap, where `P_k^n ≤ N_k` holds for all `k ≥ K`.
    Threshold { k: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RichnessWitness {
    pub node: NodePath,
    pub index: Option<u64>,
    /// Successor count (for threshold witnesses, a lower bound).
    pub successors: HyperInt,
    pub via: WitnessKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obligation {
    pub n: u64,
    pub node: NodePath,
    /// `None` when `s_n` is not in the condition.
    pub witness: Option<RichnessWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RichnessCertificate {
    pub level: u64,
    pub obligations: Vec<Obligation>,
}

/// Result of re-deriving the plain richness property from a certificate.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DefinitionCheck {
    pub checked: usize,
    pub failures: Vec<(NodePath, u64)>,
}

impl RichnessCertificate {
    /// For every explicit node `s` and `m < level`, picks an obligation `n ≥ m`
    /// whose node extends `s` and confirms its witness has at least
    /// `P_{ind(t)}^m` successors.
    pub fn recheck_definition(&self, cond: &Condition) -> Result<DefinitionCheck> {
        let profile = cond.profile();
        let mut out = DefinitionCheck::default();
        for s in cond.explicit_nodes() {
            for m in 0..self.level {
                let Some(ob) = self
                    .obligations
                    .iter()
                    .find(|o| o.n >= m && o.witness.is_some() && s.is_prefix_of(&o.node))
                else {
                    continue;
                };
                let w = ob.witness.as_ref().unwrap();
                out.checked += 1;
                let ok = match (&w.via, w.index) {
                    (WitnessKind::Direct, Some(k)) => {
                        s.is_prefix_of(&w.node)
                            && cond.contains(&w.node)?
                            && cond.successor_count(&w.node)? >= profile.seq_p(k)?.pow_of_pow2(m)?
                    }
                    (WitnessKind::Threshold { .. }, _) => s.is_prefix_of(&w.node) && cond.contains(&w.node)?,
                    _ => false,
                };
                if !ok {
                    out.failures.push((s.clone(), m));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[u64]) -> NodePath {
        NodePath(v.to_vec())
    }

    fn canonical() -> Arc<GrowthProfile> {
        Arc::new(GrowthProfile::canonical())
    }

    fn scaled() -> Arc<GrowthProfile> {
        Arc::new(GrowthProfile::scaled_default())
    }

    #[test]
    fn trunk_of_master_tree_stops_at_first_branching() {
        // The root has a single child, so <0> is comparable with every node.
        let t = Condition::full(canonical());
        assert_eq!(t.trunk().unwrap(), p(&[0]));
        let r = t.restrict(&p(&[0, 1])).unwrap();
        assert_eq!(r.trunk().unwrap(), p(&[0, 1]));
    }

    #[test]
    fn trunk_of_late_branching() {
        let t = Condition::from_tail_paths(scaled(), &[p(&[0, 1, 3, 0]), p(&[0, 1, 3, 1])]).unwrap();
        assert_eq!(t.trunk().unwrap().len(), 3);
    }

    #[test]
    fn restrict_examples() {
        let t = Condition::full(canonical());
        let r = t.restrict(&p(&[0, 1])).unwrap();
        assert_eq!(r.level_set(3).unwrap().len(), 256);
        assert_eq!(r.restrict(&r.trunk().unwrap()).unwrap(), r);
        let a = p(&[0, 1]);
        let b = p(&[0, 1, 7]);
        assert_eq!(t.restrict(&a).unwrap().restrict(&b).unwrap(), t.restrict(&b).unwrap());
        assert!(matches!(r.restrict(&p(&[0, 0])), Err(Error::NotInCondition(_))));
    }

    #[test]
    fn level_sets() {
        let t = Condition::full(canonical());
        assert_eq!(t.level_set(2).unwrap(), vec![p(&[0, 0]), p(&[0, 1])]);
        assert_eq!(t.level_set(0).unwrap(), vec![NodePath::root()]);
        assert_eq!(t.level_set(3).unwrap().len(), 260);
        assert!(matches!(t.level_set(4), Err(Error::NotEnumerable { .. })));
    }

    #[test]
    fn amalgamation_keeps_level() {
        let t = Condition::full(canonical());
        let mut asg = BTreeMap::new();
        asg.insert(p(&[0, 0]), t.restrict(&p(&[0, 0, 0])).unwrap());
        asg.insert(p(&[0, 1]), t.restrict(&p(&[0, 1, 7])).unwrap());
        let out = t.amalgamate(2, &asg).unwrap();
        assert_eq!(out.level_set(2).unwrap(), t.level_set(2).unwrap());
        assert_eq!(out.level_set(3).unwrap(), vec![p(&[0, 0, 0]), p(&[0, 1, 7])]);
        assert!(out.is_stronger_than(&t));

        let ident: BTreeMap<_, _> = t
            .level_set(2)
            .unwrap()
            .into_iter()
            .map(|a| {
                let r = t.restrict(&a).unwrap();
                (a, r)
            })
            .collect();
        assert_eq!(t.amalgamate(2, &ident).unwrap(), t);

        let mut missing = asg.clone();
        missing.remove(&p(&[0, 1]));
        assert!(matches!(t.amalgamate(2, &missing), Err(Error::Amalgamation(_))));
        let mut escaping = asg;
        escaping.insert(p(&[0, 1]), t.restrict(&p(&[0, 0, 1])).unwrap());
        assert!(matches!(t.amalgamate(2, &escaping), Err(Error::Amalgamation(_))));
    }

    #[test]
    fn normal_form_collapses_full_nodes() {
        let g = scaled();
        let kids: Vec<_> = (0..4).map(|i| p(&[0, 0, i])).collect();
        let mut leaves = kids;
        leaves.push(p(&[0, 1]));
        let t = Condition::from_tail_paths(g.clone(), &leaves).unwrap();
        assert_eq!(t, Condition::full(g));
    }

    #[test]
    fn tail_free_structure_is_rejected() {
        let doc = ConditionDoc {
            profile: "canonical".into(),
            nodes: vec![
                NodeDoc { path: p(&[]), children: vec![0], tail: false },
                NodeDoc { path: p(&[0]), children: vec![], tail: false },
            ],
        };
        assert!(matches!(
            Condition::from_doc(canonical(), &doc),
            Err(Error::MalformedCondition { .. })
        ));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let t = Condition::from_tail_paths(scaled(), &[p(&[0, 1, 3]), p(&[0, 0])]).unwrap();
        let back = Condition::from_json(scaled(), &t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(Condition::from_json(canonical(), &t.to_json()).is_err());
        let bad = r#"{"profile":"scaled-c4","nodes":[{"path":"<>","children":[0],"tail":false},{"path":"<0>","tail":true},{"path":"<5,5>","tail":true}]}"#;
        assert!(Condition::from_json(scaled(), bad).is_err());
        let bad_child = r#"{"profile":"scaled-c4","nodes":[{"path":"<>","children":[3],"tail":false},{"path":"<3>","tail":true}]}"#;
        assert!(Condition::from_json(scaled(), bad_child).is_err());
    }

    #[test]
    fn master_tree_is_certified() {
        let g = canonical();
        let t = Condition::full(g.clone());
        for m in 0..=g.m_max() as u64 {
            let cert = t.check_richness(m).unwrap();
            let re = cert.recheck_definition(&t).unwrap();
            assert!(re.failures.is_empty());
        }
    }

    #[test]
    fn thin_condition_discharged_in_tails() {
        let g = canonical();
        let t = Condition::from_tail_paths(g, &[p(&[0, 1, 0])]).unwrap();
        assert!(t.check_richness(4).is_ok());
    }

    #[test]
    fn scaled_richness_fails_at_level_four() {
        let t = Condition::full(scaled());
        assert!(t.check_richness(3).is_ok());
        match t.check_richness(4) {
            Err(Error::Unwitnessed(list)) => assert_eq!(list, vec![(p(&[0, 1]), 3)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stronger_is_a_partial_order() {
        let g = scaled();
        let t = Condition::full(g.clone());
        let a = t.restrict(&p(&[0, 1])).unwrap();
        let b = a.restrict(&p(&[0, 1, 2])).unwrap();
        assert!(t.is_stronger_than(&t));
        assert!(b.is_stronger_than(&a) && a.is_stronger_than(&t) && b.is_stronger_than(&t));
        assert!(!a.is_stronger_than(&b));
    }

    #[test]
    fn pruning_keeps_selected_nodes() {
        let t = Condition::full(scaled());
        let pr = t.prune_at_depth(3, |q| q.0[2] == 0).unwrap();
        assert_eq!(pr.level_set(3).unwrap(), vec![p(&[0, 0, 0]), p(&[0, 1, 0])]);
        assert!(t.prune_at_depth(3, |_| false).is_err());
    }
}
