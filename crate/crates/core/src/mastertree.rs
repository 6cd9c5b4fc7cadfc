//! The master tree: nodes as child-index paths and the breadth-first,
//! lexicographic-within-level index function.
//!
//! Breadth-first numbering with lexicographic order inside each level puts
//! the children of node `k` at the consecutive indices
//! `1 + (N_0 + ... + N_{k-1}) + j`, `j < N_k`. Both `ind` and its inverse are
//! computed from those prefix sums.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::growth::GrowthProfile;
use crate::hyperint::HyperInt;

/// A node of the master tree as the sequence of child indices from the root.
///
/// Child indices stay in machine range; conditions only ever select a few
/// children of nodes whose branching may be astronomically large.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath(pub Vec<u64>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: u64) -> NodePath {
        let mut v = self.0.clone();
        v.push(i);
        NodePath(v)
    }

    pub fn parent(&self) -> Option<NodePath> {
        let (_, init) = self.0.split_last()?;
        Some(NodePath(init.to_vec()))
    }

    pub fn prefix(&self, len: usize) -> NodePath {
        NodePath(self.0[..len.min(self.0.len())].to_vec())
    }

    /// `self ⊆ other` as sequences.
    pub fn is_prefix_of(&self, other: &NodePath) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn comparable(&self, other: &NodePath) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

impl From<Vec<u64>> for NodePath {
    fn from(v: Vec<u64>) -> Self {
        NodePath(v)
    }
}

impl<const N: usize> From<[u64; N]> for NodePath {
    fn from(v: [u64; N]) -> Self {
        NodePath(v.to_vec())
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ">")
    }
}

impl fmt::Debug for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for NodePath {
    type Err = Error;

    /// Parses `<i,j,...>`; `<>` is the root.
    fn from_str(s: &str) -> Result<Self> {
        let err = |position, reason| Error::Parse {
            input: s.to_string(),
            position,
            reason,
        };
        let t = s.trim();
        let inner = t
            .strip_prefix('<')
            .and_then(|r| r.strip_suffix('>'))
            .ok_or_else(|| err(0, "paths are written `<i,j,...>`"))?;
        if inner.trim().is_empty() {
            return Ok(NodePath::root());
        }
        let mut out = Vec::new();
        let mut offset = s.find('<').unwrap_or(0) + 1;
        for part in inner.split(',') {
            let v = part
                .trim()
                .parse::<u64>()
                .map_err(|_| err(offset, "child index must be a natural number"))?;
            out.push(v);
            offset += part.len() + 1;
        }
        Ok(NodePath(out))
    }
}

impl serde::Serialize for NodePath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for NodePath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The value `ind(s)` of a node.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct NodeIndex(pub HyperInt);

impl NodeIndex {
    pub fn value(&self) -> &HyperInt {
        &self.0
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
}

impl fmt::Display for NodeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

fn beyond(index: &HyperInt, profile: &GrowthProfile) -> Error {
    Error::IndexBeyondCap {
        index: index.to_string(),
        cap: profile.index_cap(),
    }
}

impl GrowthProfile {
    /// `ind(path)`. Fails when an intermediate index exceeds the index cap or
    /// when a child index is out of range.
    pub fn ind(&self, path: &NodePath) -> Result<NodeIndex> {
        let mut k = HyperInt::ZERO;
        for (pos, &c) in path.0.iter().enumerate() {
            let parent = k.to_u64().filter(|&v| v <= self.index_cap()).ok_or_else(|| beyond(&k, self))?;
            let width = self.branching_at(parent)?;
            if HyperInt::small(c) >= width {
                return Err(Error::InvalidPath {
                    path: path.clone(),
                    reason: format!("child {c} at depth {pos} but node {parent} has {width} children"),
                });
            }
            k = self.prefix_sum(parent)?.add(&HyperInt::small(c + 1));
        }
        Ok(NodeIndex(k))
    }

    /// `ind(path)` as a machine index within the cap.
    pub fn ind_u64(&self, path: &NodePath) -> Result<u64> {
        let k = self.ind(path)?;
        k.to_u64()
            .filter(|&v| v <= self.index_cap())
            .ok_or_else(|| beyond(k.value(), self))
    }

    /// Number of children of `path` in the master tree.
    pub fn branching(&self, path: &NodePath) -> Result<HyperInt> {
        let k = self.ind_u64(path)?;
        self.branching_at(k)
    }

    /// Whether `c` is a valid child index below `path`. Beyond the index cap
    /// the answer is settled through monotonicity of `N` when possible.
    pub fn child_in_range(&self, path: &NodePath, c: u64) -> Result<bool> {
        match self.branching(path) {
            Ok(w) => Ok(HyperInt::small(c) < w),
            Err(Error::IndexBeyondCap { .. }) => {
                let floor = self.branching_at(self.index_cap())?;
                if HyperInt::small(c) < floor {
                    Ok(true)
                } else {
                    Err(beyond(&HyperInt::small(self.index_cap() + 1), self))
                }
            }
            Err(e) => Err(e),
        }
    }

    /// `s_k`: the node with index `k`.
    pub fn path_of(&self, k: u64) -> Result<NodePath> {
        if k > self.index_cap() {
            return Err(beyond(&HyperInt::small(k), self));
        }
        let mut rev = Vec::new();
        let mut k = k;
        while k > 0 {
            // Largest parent p with prefix_sum(p) ≤ k - 1.
            let target = HyperInt::small(k - 1);
            let (mut lo, mut hi) = (0u64, k - 1);
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                if self.prefix_sum(mid)? <= target {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            let base = self.prefix_sum(lo)?.to_u64().expect("bounded by k");
            rev.push(k - 1 - base);
            k = lo;
        }
        rev.reverse();
        Ok(NodePath(rev))
    }

    /// Index of the first node at level `l`.
    pub fn level_offset(&self, l: usize) -> Result<HyperInt> {
        let mut o = HyperInt::ZERO;
        for _ in 0..l {
            let k = o.to_u64().filter(|&v| v <= self.index_cap()).ok_or_else(|| beyond(&o, self))?;
            o = self.prefix_sum(k)?.succ();
        }
        Ok(o)
    }

    /// Number of master-tree nodes at level `l`.
    pub fn level_width(&self, l: usize) -> Result<HyperInt> {
        if l == 0 {
            return Ok(HyperInt::ONE);
        }
        let start = self.level_offset(l - 1)?;
        let end = self.level_offset(l)?;
        let start = start.to_u64().ok_or_else(|| beyond(&start, self))?;
        let end = end
            .to_u64()
            .filter(|&e| e >= 1 && e - 1 <= self.index_cap())
            .ok_or_else(|| beyond(&end, self))?;
        let mut w = HyperInt::ZERO;
        for k in start..end {
            w = w.add(&self.branching_at(k)?);
        }
        Ok(w)
    }
}
