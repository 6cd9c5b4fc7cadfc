//! The growth sequences `P_k`, `N_k` and `E_k = log2 P_k`.
//!
//! The canonical profile has `P_0 = N_0 = 1`, `P_k = N_0 ··· N_{k-1}` and
//! `N_k = 2^{P_k}` for `k ≥ 1`. Scaled profiles keep the product recurrence but
//! use small power-of-two branching so trees stay enumerable.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperint::HyperInt;

pub const DEFAULT_DEPTH_CAP: usize = 512;
pub const DEFAULT_CANONICAL_INDEX_CAP: u64 = 263;
pub const DEFAULT_CANONICAL_HORIZON: u64 = 24;
pub const DEFAULT_CANONICAL_M_MAX: u32 = 6;
pub const DEFAULT_SCALED_CAP: u64 = 4;
pub const DEFAULT_SCALED_K_MAX: u64 = 1 << 16;
/// Largest richness exponent probed when a scaled profile does not declare `m_max`.
const M_MAX_PROBE: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Canonical,
    Scaled,
}

/// On-disk profile description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: ProfileKind,
    /// Scaled only: `N_k = 2^{min(P_k, cap)}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    /// Scaled only: explicit `N_0, N_1, ...`; the last entry repeats up to `k_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_cap: Option<usize>,
}

impl ProfileConfig {
    pub fn canonical() -> Self {
        ProfileConfig {
            id: None,
            kind: ProfileKind::Canonical,
            cap: None,
            n: None,
            k_max: None,
            m_max: None,
            index_cap: None,
            depth_cap: None,
        }
    }

    pub fn scaled(cap: u64) -> Self {
        ProfileConfig {
            kind: ProfileKind::Scaled,
            cap: Some(cap),
            ..Self::canonical()
        }
    }

    pub fn explicit(n: Vec<u64>) -> Self {
        ProfileConfig {
            kind: ProfileKind::Scaled,
            n: Some(n),
            ..Self::canonical()
        }
    }
}

#[derive(Debug, Clone)]
enum Branching {
    Canonical,
    Capped(u64),
    /// `log2 N_k`; the last entry repeats.
    Explicit(Vec<u64>),
}

#[derive(Debug, Default)]
struct Memo {
    p: Vec<HyperInt>,
    n: Vec<HyperInt>,
    e: Vec<HyperInt>,
    /// `prefix[k] = N_0 + ... + N_{k-1}`.
    prefix: Vec<HyperInt>,
    thresholds: BTreeMap<u64, RichnessThreshold>,
}

/// A growth profile with memoized sequence values.
#[derive(Debug)]
pub struct GrowthProfile {
    id: String,
    config: ProfileConfig,
    branching: Branching,
    k_max: u64,
    index_cap: u64,
    depth_cap: usize,
    declared_m_max: Option<u32>,
    m_max: OnceLock<u32>,
    memo: Mutex<Memo>,
}

/// Outcome of the richness-threshold search for one exponent `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RichnessThreshold {
    pub m: u64,
    /// Least `K` with `P_k^m ≤ N_k` for every `k` in `[K, horizon]`.
    pub threshold: Option<u64>,
    /// Canonical only: least index from which the inductive-step certificate
    /// holds at every index up to the horizon.
    pub certified_from: Option<u64>,
    pub horizon: u64,
}

impl RichnessThreshold {
    /// Whether the search licenses the inequality for every `k ≥ threshold`.
    pub fn holds(&self) -> bool {
        self.threshold.is_some()
    }
}

impl GrowthProfile {
    pub fn canonical() -> Self {
        Self::from_config(ProfileConfig::canonical()).expect("canonical config is valid")
    }

    pub fn scaled_default() -> Self {
        Self::from_config(ProfileConfig::scaled(DEFAULT_SCALED_CAP)).expect("default scaled config is valid")
    }

    pub fn from_config(config: ProfileConfig) -> Result<Self> {
        let depth_cap = config.depth_cap.unwrap_or(DEFAULT_DEPTH_CAP);
        let (branching, k_max, index_cap, id) = match config.kind {
            ProfileKind::Canonical => {
                if config.cap.is_some() || config.n.is_some() {
                    return Err(Error::InvalidProfile(
                        "canonical profiles take no `cap` or `n`".into(),
                    ));
                }
                let k_max = config.k_max.unwrap_or(DEFAULT_CANONICAL_HORIZON);
                if k_max as usize > depth_cap {
                    return Err(Error::InvalidProfile(format!(
                        "k_max {k_max} exceeds depth cap {depth_cap}"
                    )));
                }
                let index_cap = config.index_cap.unwrap_or(DEFAULT_CANONICAL_INDEX_CAP);
                if index_cap as usize > depth_cap {
                    return Err(Error::InvalidProfile(format!(
                        "index_cap {index_cap} exceeds depth cap {depth_cap}"
                    )));
                }
                (Branching::Canonical, k_max, index_cap, "canonical".to_string())
            }
            ProfileKind::Scaled => {
                let k_max = config.k_max.unwrap_or(DEFAULT_SCALED_K_MAX);
                let branching = match (&config.cap, &config.n) {
                    (Some(_), Some(_)) => {
                        return Err(Error::InvalidProfile("give either `cap` or `n`, not both".into()))
                    }
                    (None, Some(n)) => Branching::Explicit(explicit_logs(n)?),
                    (cap, None) => {
                        let cap = cap.unwrap_or(DEFAULT_SCALED_CAP);
                        if cap == 0 || cap > 62 {
                            return Err(Error::InvalidProfile(format!("cap {cap} outside 1..=62")));
                        }
                        Branching::Capped(cap)
                    }
                };
                let index_cap = config.index_cap.unwrap_or(k_max).min(k_max);
                let id = match &branching {
                    Branching::Capped(c) => format!("scaled-c{c}"),
                    _ => "scaled".to_string(),
                };
                (branching, k_max, index_cap, id)
            }
        };
        Ok(GrowthProfile {
            id: config.id.clone().unwrap_or(id),
            declared_m_max: config.m_max,
            config,
            branching,
            k_max,
            index_cap,
            depth_cap,
            m_max: OnceLock::new(),
            memo: Mutex::new(Memo::default()),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_config(serde_json::from_str(text)?)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &ProfileConfig {
        &self.config
    }

    pub fn kind(&self) -> ProfileKind {
        self.config.kind
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self.branching, Branching::Canonical)
    }

    pub fn k_max(&self) -> u64 {
        self.k_max
    }

    /// Largest node index whose branching the master tree may evaluate.
    pub fn index_cap(&self) -> u64 {
        self.index_cap
    }

    fn seq_cap(&self) -> u64 {
        match self.branching {
            Branching::Canonical => self.depth_cap as u64,
            _ => self.k_max,
        }
    }

    fn check_index(&self, k: u64, cap: u64) -> Result<usize> {
        if k > cap {
            return Err(Error::IndexBeyondCap {
                index: k.to_string(),
                cap,
            });
        }
        Ok(k as usize)
    }

    fn log2_n(&self, k: usize, p_k: &HyperInt) -> HyperInt {
        if k == 0 {
            return HyperInt::ZERO;
        }
        match &self.branching {
            Branching::Canonical => p_k.clone(),
            Branching::Capped(c) => {
                let c = HyperInt::small(*c);
                if *p_k < c {
                    p_k.clone()
                } else {
                    c
                }
            }
            Branching::Explicit(logs) => HyperInt::small(*logs.get(k).or(logs.last()).unwrap()),
        }
    }

    fn extend(&self, memo: &mut Memo, k: usize) -> Result<()> {
        while memo.p.len() <= k {
            let i = memo.p.len();
            let e = if i == 0 {
                HyperInt::ZERO
            } else {
                let prev = self.log2_n(i - 1, &memo.p[i - 1]);
                memo.e[i - 1].add(&prev)
            };
            let p = HyperInt::pow2(&e);
            let n = HyperInt::pow2(&self.log2_n(i, &p));
            let height = n.height();
            if height > self.depth_cap {
                return Err(Error::DepthExceeded {
                    height,
                    limit: self.depth_cap,
                });
            }
            memo.e.push(e);
            memo.p.push(p);
            memo.n.push(n);
        }
        Ok(())
    }

    fn with_memo<T>(&self, k: usize, f: impl FnOnce(&Memo) -> T) -> Result<T> {
        let mut memo = self.memo.lock().unwrap_or_else(|e| e.into_inner());
        self.extend(&mut memo, k)?;
        Ok(f(&memo))
    }

    pub fn seq_p(&self, k: u64) -> Result<HyperInt> {
        let k = self.check_index(k, self.seq_cap())?;
        self.with_memo(k, |m| m.p[k].clone())
    }

    pub fn seq_n(&self, k: u64) -> Result<HyperInt> {
        let k = self.check_index(k, self.seq_cap())?;
        self.with_memo(k, |m| m.n[k].clone())
    }

    /// `E_k` with `P_k = 2^{E_k}`.
    pub fn seq_e(&self, k: u64) -> Result<HyperInt> {
        let k = self.check_index(k, self.seq_cap())?;
        self.with_memo(k, |m| m.e[k].clone())
    }

    /// `N_k` for a node index, limited by the master-tree index cap.
    pub fn branching_at(&self, k: u64) -> Result<HyperInt> {
        self.check_index(k, self.index_cap)?;
        self.seq_n(k)
    }

    /// `N_0 + ... + N_{k-1}`, for `k ≤ index_cap + 1`.
    pub fn prefix_sum(&self, k: u64) -> Result<HyperInt> {
        let k = self.check_index(k, self.index_cap + 1)?;
        let mut memo = self.memo.lock().unwrap_or_else(|e| e.into_inner());
        if k > 0 {
            self.extend(&mut memo, k - 1)?;
        }
        if memo.prefix.is_empty() {
            memo.prefix.push(HyperInt::ZERO);
        }
        while memo.prefix.len() <= k {
            let i = memo.prefix.len();
            let next = memo.prefix[i - 1].add(&memo.n[i - 1]);
            memo.prefix.push(next);
        }
        Ok(memo.prefix[k].clone())
    }

    /// `P_k^m ≤ N_k`, evaluated exactly.
    pub fn rich_at(&self, m: u64, k: u64) -> Result<bool> {
        let pm = self.seq_p(k)?.pow_of_pow2(m)?;
        Ok(pm <= self.seq_n(k)?)
    }

    /// Checks `m·E_k ≤ P_k` and `N_k ≥ m+1`, which carry `P_k^m ≤ N_k` from
    /// `k` to `k+1`. At `k = 0` the second clause is vacuous since
    /// `E_1 = E_0 = 0`.
    pub fn check_inductive_step(&self, m: u64, k: u64) -> Result<bool> {
        if !self.is_canonical() {
            return Err(Error::NotCanonical);
        }
        let lhs = self.seq_e(k)?.mul_small(m);
        if lhs > self.seq_p(k)? {
            return Ok(false);
        }
        Ok(k == 0 || self.seq_n(k)? >= HyperInt::small(m + 1))
    }

    pub fn richness_threshold(&self, m: u64) -> Result<RichnessThreshold> {
        let known = self.memo.lock().unwrap_or_else(|e| e.into_inner()).thresholds.get(&m).cloned();
        if let Some(t) = known {
            return Ok(t);
        }
        let t = self.compute_threshold(m)?;
        self.memo.lock().unwrap_or_else(|e| e.into_inner()).thresholds.insert(m, t.clone());
        Ok(t)
    }

    fn compute_threshold(&self, m: u64) -> Result<RichnessThreshold> {
        let horizon = self.k_max;
        let mut threshold = Some(0);
        for k in (0..=horizon).rev() {
            if !self.rich_at(m, k)? {
                threshold = (k < horizon).then_some(k + 1);
                break;
            }
        }
        let mut certified_from = None;
        if self.is_canonical() {
            for k in (0..=horizon).rev() {
                if self.check_inductive_step(m, k)? {
                    certified_from = Some(k);
                } else {
                    break;
                }
            }
            if certified_from.is_none() {
                threshold = None;
            }
        }
        Ok(RichnessThreshold {
            m,
            threshold,
            certified_from,
            horizon,
        })
    }

    /// Largest richness exponent the profile supports over its declared range.
    pub fn m_max(&self) -> u32 {
        *self.m_max.get_or_init(|| {
            if let Some(m) = self.declared_m_max {
                return m;
            }
            if self.is_canonical() {
                return DEFAULT_CANONICAL_M_MAX;
            }
            let mut best = 0;
            for m in 0..=M_MAX_PROBE {
                match self.richness_threshold(m as u64) {
                    Ok(t) if t.holds() => best = m,
                    _ => break,
                }
            }
            best
        })
    }
}

fn explicit_logs(n: &[u64]) -> Result<Vec<u64>> {
    if n.first() != Some(&1) {
        return Err(Error::InvalidProfile("explicit sequences start with N_0 = 1".into()));
    }
    let mut logs = Vec::with_capacity(n.len());
    for (k, &v) in n.iter().enumerate() {
        if !v.is_power_of_two() {
            return Err(Error::InvalidProfile(format!("N_{k} = {v} is not a power of two")));
        }
        if k >= 1 && v < 2 {
            return Err(Error::InvalidProfile(format!("N_{k} = {v} must be at least 2")));
        }
        if k >= 1 && v < n[k - 1] {
            return Err(Error::InvalidProfile(format!("N_{k} = {v} decreases")));
        }
        logs.push(v.trailing_zeros() as u64);
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: u64) -> HyperInt {
        HyperInt::small(v)
    }

    #[test]
    fn canonical_first_values() {
        let g = GrowthProfile::canonical();
        let n: Vec<_> = (0..5).map(|k| g.seq_n(k).unwrap()).collect();
        assert_eq!(n[..4], [h(1), h(2), h(4), h(256)]);
        assert_eq!(n[4].to_string(), "2^(2^11)");
        let p: Vec<_> = (0..5).map(|k| g.seq_p(k).unwrap()).collect();
        assert_eq!(p, [h(1), h(1), h(2), h(8), h(2048)]);
        assert_eq!(g.seq_e(4).unwrap(), h(11));
    }

    #[test]
    fn canonical_p5_is_p4_shifted_by_p4() {
        let g = GrowthProfile::canonical();
        let p4 = g.seq_p(4).unwrap();
        assert_eq!(p4.shift(&p4), g.seq_p(5).unwrap());
    }

    #[test]
    fn thresholds_for_small_m() {
        let g = GrowthProfile::canonical();
        assert_eq!(g.richness_threshold(1).unwrap().threshold, Some(0));
        assert_eq!(g.richness_threshold(2).unwrap().threshold, Some(0));
        assert_eq!(g.richness_threshold(3).unwrap().threshold, Some(4));
    }

    #[test]
    fn inductive_step_examples() {
        let g = GrowthProfile::canonical();
        assert!(g.check_inductive_step(3, 4).unwrap());
        assert!(g.check_inductive_step(1, 0).unwrap());
        assert!(!g.check_inductive_step(3, 2).unwrap());
        assert!(matches!(
            GrowthProfile::scaled_default().check_inductive_step(1, 1),
            Err(Error::NotCanonical)
        ));
    }

    #[test]
    fn scaled_default_values() {
        let g = GrowthProfile::scaled_default();
        let n: Vec<_> = (0..6).map(|k| g.seq_n(k).unwrap()).collect();
        assert_eq!(n, [h(1), h(2), h(4), h(16), h(16), h(16)]);
        assert_eq!(g.seq_p(5).unwrap(), h(2048));
        assert_eq!(g.richness_threshold(1).unwrap().threshold, None);
        assert_eq!(g.m_max(), 0);
    }

    #[test]
    fn explicit_profile_validation() {
        assert!(GrowthProfile::from_config(ProfileConfig::explicit(vec![1, 2, 3])).is_err());
        assert!(GrowthProfile::from_config(ProfileConfig::explicit(vec![2, 2])).is_err());
        assert!(GrowthProfile::from_config(ProfileConfig::explicit(vec![1, 4, 2])).is_err());
        let g = GrowthProfile::from_config(ProfileConfig::explicit(vec![1, 2, 2, 1024])).unwrap();
        assert_eq!(g.seq_n(10).unwrap(), h(1024));
        assert_eq!(g.seq_p(4).unwrap(), h(4096));
    }

    #[test]
    fn index_beyond_cap() {
        let g = GrowthProfile::canonical();
        assert!(matches!(g.seq_p(513), Err(Error::IndexBeyondCap { .. })));
        assert!(matches!(g.branching_at(264), Err(Error::IndexBeyondCap { .. })));
    }

    #[test]
    fn prefix_sums() {
        let g = GrowthProfile::canonical();
        assert_eq!(g.prefix_sum(0).unwrap(), h(0));
        assert_eq!(g.prefix_sum(4).unwrap(), h(263));
    }

    #[test]
    fn config_json() {
        let g = GrowthProfile::from_json(r#"{"kind":"scaled","cap":3,"k_max":100}"#).unwrap();
        assert_eq!(g.id(), "scaled-c3");
        assert!(GrowthProfile::from_json(r#"{"kind":"canonical","cap":3}"#).is_err());
        assert!(GrowthProfile::from_json(r#"{"kind":"scaled","bogus":1}"#).is_err());
    }
}
