//! Checked fusion chains: decreasing conditions with frozen levels and the
//! per-step richness obligation on `s_n`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conditions::{Condition, ConditionDoc, Place, RichnessCertificate, DEFAULT_WITNESS_SEARCH_DEPTH};
use crate::error::{Error, Result};
use crate::growth::{GrowthProfile, ProfileConfig};
use crate::hyperint::HyperInt;
use crate::mastertree::NodePath;

/// The hypothesis a rejected step violates, in the order they are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionClause {
    LevelNotIncreasing,
    NotStronger,
    LevelSetChanged,
    ObligationUnresolvable,
    MissingWitness,
    WitnessNotExtending,
    WitnessTooDeep,
    WitnessNotInCondition,
    TooFewSuccessors,
}

impl fmt::Display for FusionClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FusionClause::LevelNotIncreasing => "level-not-increasing",
            FusionClause::NotStronger => "not-stronger",
            FusionClause::LevelSetChanged => "level-set-changed",
            FusionClause::ObligationUnresolvable => "obligation-unresolvable",
            FusionClause::MissingWitness => "missing-witness",
            FusionClause::WitnessNotExtending => "witness-not-extending",
            FusionClause::WitnessTooDeep => "witness-too-deep",
            FusionClause::WitnessNotInCondition => "witness-not-in-condition",
            FusionClause::TooFewSuccessors => "too-few-successors",
        };
        f.write_str(s)
    }
}

fn reject(clause: FusionClause, detail: impl Into<String>) -> Error {
    Error::Fusion {
        clause,
        detail: detail.into(),
    }
}

/// What was verified for one step `T_n → T_{n+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: u64,
    pub s_n: NodePath,
    pub s_n_present: bool,
    pub witness: Option<NodePath>,
    pub witness_index: Option<u64>,
    /// Successors of the witness in `T_{n+1}`.
    pub successors: Option<HyperInt>,
    /// `P_{ind(t)}^n`, when the index is within the cap.
    pub required: Option<HyperInt>,
}

#[derive(Clone, Debug)]
pub struct FusionChain {
    profile: Arc<GrowthProfile>,
    n0: u64,
    conditions: Vec<Condition>,
    levels: Vec<usize>,
    records: Vec<StepRecord>,
}

impl FusionChain {
    /// A chain starting at `T_{n0}` with level `l_{n0}`.
    pub fn new(start: Condition, n0: u64, level: usize) -> Self {
        FusionChain {
            profile: start.profile().clone(),
            n0,
            conditions: vec![start],
            levels: vec![level],
            records: Vec::new(),
        }
    }

    pub fn profile(&self) -> &Arc<GrowthProfile> {
        &self.profile
    }

    pub fn start_index(&self) -> u64 {
        self.n0
    }

    /// Index of the last condition.
    pub fn current_index(&self) -> u64 {
        self.n0 + self.records.len() as u64
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn last(&self) -> &Condition {
        self.conditions.last().expect("chains are non-empty")
    }

    pub fn last_level(&self) -> usize {
        *self.levels.last().expect("chains are non-empty")
    }

    /// Verifies and appends `T_{n+1}` with level `l_{n+1}`. The witness is
    /// the node `t ⊇ s_n` carrying the richness obligation for `n`.
    pub fn push_step(&mut self, next: Condition, level: usize, witness: Option<NodePath>) -> Result<&StepRecord> {
        let record = self.check_step(&next, level, witness)?;
        self.conditions.push(next);
        self.levels.push(level);
        self.records.push(record);
        Ok(self.records.last().unwrap())
    }

    fn check_step(&self, next: &Condition, level: usize, witness: Option<NodePath>) -> Result<StepRecord> {
        use FusionClause::*;
        let n = self.current_index();
        let cur = self.last();
        let l_n = self.last_level();
        if level <= l_n {
            return Err(reject(LevelNotIncreasing, format!("l_{} = {level} after l_{n} = {l_n}", n + 1)));
        }
        if next.profile().id() != self.profile.id() || !next.is_stronger_than(cur) {
            return Err(reject(NotStronger, format!("T_{} is not contained in T_{n}", n + 1)));
        }
        if let Some(a) = cur.level_difference(next, l_n)? {
            return Err(reject(LevelSetChanged, format!("{a} dropped below level {l_n}")));
        }
        let unresolvable = |e: Error| reject(ObligationUnresolvable, format!("s_{n}: {e}"));
        let s_n = self.profile.path_of(n).map_err(unresolvable)?;
        let present = cur.contains(&s_n).map_err(unresolvable)?;
        let mut record = StepRecord {
            n,
            s_n: s_n.clone(),
            s_n_present: present,
            witness: witness.clone(),
            witness_index: None,
            successors: None,
            required: None,
        };
        if !present {
            return Ok(record);
        }
        let t = witness.ok_or_else(|| reject(MissingWitness, format!("s_{n} = {s_n} is in T_{n}")))?;
        if !s_n.is_prefix_of(&t) {
            return Err(reject(WitnessNotExtending, format!("{t} does not extend s_{n} = {s_n}")));
        }
        if t.len() >= level {
            return Err(reject(WitnessTooDeep, format!("length({t}) = {} is not below l_{} = {level}", t.len(), n + 1)));
        }
        let place = next
            .place(&t)?
            .ok_or_else(|| reject(WitnessNotInCondition, format!("{t} is not in T_{}", n + 1)))?;
        match self.profile.ind_u64(&t) {
            Ok(k) => {
                let succ = next.successor_count(&t)?;
                let required = self.profile.seq_p(k)?.pow_of_pow2(n)?;
                if succ < required {
                    return Err(reject(
                        TooFewSuccessors,
                        format!("{t} has {succ} successors, needs P_{k}^{n} = {required}"),
                    ));
                }
                record.witness_index = Some(k);
                record.successors = Some(succ);
                record.required = Some(required);
            }
            Err(Error::IndexBeyondCap { .. }) => {
                let threshold = if self.profile.is_canonical() {
                    self.profile.richness_threshold(n)?.threshold
                } else {
                    None
                };
                let settled = matches!(place, Place::Tail)
                    && threshold.is_some_and(|k| k <= self.profile.index_cap() + 1);
                if !settled {
                    return Err(reject(TooFewSuccessors, format!("ind({t}) is beyond the index cap")));
                }
                record.successors = Some(self.profile.branching_at(self.profile.index_cap())?);
            }
            Err(e) => return Err(e),
        }
        Ok(record)
    }

    /// The intersection, which is the last condition, with a richness
    /// certificate for every obligation up to the current index.
    pub fn intersect(&self) -> Result<(Condition, RichnessCertificate)> {
        let last = self.last().clone();
        let reach = self
            .records
            .iter()
            .filter_map(|r| r.witness.as_ref().map(|t| t.len().saturating_sub(r.s_n.len())))
            .max()
            .unwrap_or(0)
            .max(DEFAULT_WITNESS_SEARCH_DEPTH);
        let cert = last.check_richness_with(self.current_index(), reach)?;
        Ok((last, cert))
    }

    pub fn to_log(&self) -> ChainLog {
        ChainLog {
            profile: self.profile.config().clone(),
            n0: self.n0,
            start: self.conditions[0].to_doc(),
            start_level: self.levels[0],
            steps: self
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| LoggedStep {
                    condition: self.conditions[i + 1].to_doc(),
                    level: self.levels[i + 1],
                    witness: r.witness.clone(),
                })
                .collect(),
        }
    }
}

/// Serializable form of a chain; replaying re-verifies every step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainLog {
    pub profile: ProfileConfig,
    pub n0: u64,
    pub start: ConditionDoc,
    pub start_level: usize,
    pub steps: Vec<LoggedStep>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggedStep {
    pub condition: ConditionDoc,
    pub level: usize,
    pub witness: Option<NodePath>,
}

impl ChainLog {
    pub fn replay(&self) -> Result<FusionChain> {
        let profile = Arc::new(GrowthProfile::from_config(self.profile.clone())?);
        let start = Condition::from_doc(profile.clone(), &self.start)?;
        let mut chain = FusionChain::new(start, self.n0, self.start_level);
        for step in &self.steps {
            let next = Condition::from_doc(profile.clone(), &step.condition)?;
            chain.push_step(next, step.level, step.witness.clone())?;
        }
        Ok(chain)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain log serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[u64]) -> NodePath {
        NodePath(v.to_vec())
    }

    fn clause(r: Result<&StepRecord>) -> FusionClause {
        match r {
            Err(Error::Fusion { clause, .. }) => clause,
            other => panic!("expected a rejection, got {other:?}"),
        }
    }

    #[test]
    fn constant_chain_on_master_tree() {
        let g = Arc::new(GrowthProfile::canonical());
        let t = Condition::full(g.clone());
        let mut chain = FusionChain::new(t.clone(), 0, 0);
        // s_0 = <>, s_1 = <0>, s_2 = <0,0>, s_3 = <0,1>; canonical tails do the rest.
        let witnesses = [p(&[0, 1]), p(&[0, 1]), p(&[0, 0, 0]), p(&[0, 1, 0])];
        for (i, w) in witnesses.iter().enumerate() {
            chain.push_step(t.clone(), w.len() + 1 + i, Some(w.clone())).unwrap();
        }
        let (out, cert) = chain.intersect().unwrap();
        assert_eq!(out, t);
        assert_eq!(cert.level, 4);
    }

    #[test]
    fn rejections_name_their_clause() {
        let g = Arc::new(GrowthProfile::scaled_default());
        let t = Condition::full(g.clone());
        let mut chain = FusionChain::new(t.clone(), 0, 0);
        assert_eq!(clause(chain.push_step(t.clone(), 0, Some(p(&[0])))), FusionClause::LevelNotIncreasing);
        assert_eq!(clause(chain.push_step(t.clone(), 2, None)), FusionClause::MissingWitness);
        chain.push_step(t.clone(), 2, Some(p(&[0]))).unwrap();
        let dropped = t.restrict(&p(&[0, 1])).unwrap();
        assert_eq!(clause(chain.push_step(dropped, 3, Some(p(&[0])))), FusionClause::LevelSetChanged);
        assert_eq!(clause(chain.push_step(t.clone(), 3, Some(p(&[])))), FusionClause::WitnessNotExtending);
        assert_eq!(clause(chain.push_step(t.clone(), 2, Some(p(&[0])))), FusionClause::LevelNotIncreasing);
        assert_eq!(clause(chain.push_step(t.clone(), 4, Some(p(&[0, 1, 0, 0])))), FusionClause::WitnessTooDeep);
        let thin = t.prune_at_depth(3, |q| q.0[2] == 0).unwrap();
        assert_eq!(clause(chain.push_step(thin.clone(), 4, Some(p(&[0, 1, 5])))), FusionClause::WitnessNotInCondition);
        // <0,1> keeps one successor; P_3^1 = 8.
        assert_eq!(clause(chain.push_step(thin, 3, Some(p(&[0, 1])))), FusionClause::TooFewSuccessors);
        let bigger = Condition::full(g);
        let mut c2 = FusionChain::new(t.restrict(&p(&[0, 1])).unwrap(), 0, 0);
        assert_eq!(clause(c2.push_step(bigger, 1, Some(p(&[0])))), FusionClause::NotStronger);
    }

    #[test]
    fn log_replay_reproduces_chain() {
        let g = Arc::new(GrowthProfile::scaled_default());
        let t = Condition::full(g.clone());
        let mut chain = FusionChain::new(t.clone(), 0, 0);
        chain.push_step(t.clone(), 2, Some(p(&[0]))).unwrap();
        let t2 = t.prune_at_depth(3, |q| q.0[2] == 0).unwrap();
        chain.push_step(t2, 3, Some(p(&[0]))).unwrap();
        let log = chain.to_log();
        let back = ChainLog::from_json(&log.to_json()).unwrap().replay().unwrap();
        assert_eq!(back.to_log(), log);
        assert_eq!(back.records(), chain.records());
    }
}
