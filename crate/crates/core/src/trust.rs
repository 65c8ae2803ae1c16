//! Trust records: evidence rewards, partially dependent accumulation, aging
//! and discounting of reported opinions by source reliability.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opinion::{average_fuse, cumulative_fuse, BinomialOpinion, EvidenceRecord, Opinion, OpinionError};

/// Opaque agent identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        AgentId(s)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_string())
    }
}

#[derive(Debug, Error)]
pub enum TrustError {
    #[error(transparent)]
    Opinion(#[from] OpinionError),
    #[error("{field} = {value} is outside {range}")]
    OutOfRange { field: &'static str, value: f64, range: &'static str },
    #[error("trust store line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

/// Default base rate of a fresh trust opinion.
pub const DEFAULT_TRUST_BASE_RATE: f64 = 0.5;
/// Default dependence factor between repeated cooperations of one pair.
pub const DEFAULT_SAME_PAIR_LAMBDA: f64 = 0.5;
/// Default trust reward for an agent vindicated in a revision case.
pub const DEFAULT_REVISION_REWARD: u32 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRecord {
    pub agent_id: AgentId,
    pub trust: BinomialOpinion,
    /// Dependence factor λ in `[0, 1]`.
    pub dependence: f64,
    /// Reward `w_TR` granted when the agent is vindicated.
    pub revision_reward: u32,
}

impl TrustRecord {
    /// Vacuous trust with the default base rate and factors.
    pub fn new(agent_id: AgentId) -> Self {
        TrustRecord {
            agent_id,
            trust: BinomialOpinion::vacuous(DEFAULT_TRUST_BASE_RATE),
            dependence: DEFAULT_SAME_PAIR_LAMBDA,
            revision_reward: DEFAULT_REVISION_REWARD,
        }
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        self.trust.validate()?;
        if !(0.0..=1.0).contains(&self.dependence) {
            return Err(TrustError::OutOfRange { field: "lambda", value: self.dependence, range: "[0, 1]" });
        }
        Ok(())
    }

    /// Projected probability that the agent is trustworthy.
    pub fn projected(&self) -> f64 {
        self.trust.project()
    }
}

/// Scalars that discount a reported opinion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountContext {
    /// `P_src`, the projected trust in the source.
    pub source_trust: f64,
    /// Per-meter decay `T_g`.
    pub spatial_decay: f64,
    /// Per-second decay `T_t`.
    pub temporal_decay: f64,
    /// Distance between the observed and the reported location, meters.
    pub distance: f64,
    /// Age of the information, seconds.
    pub age: f64,
    pub prior_weight: f64,
}

impl Default for DiscountContext {
    fn default() -> Self {
        DiscountContext::identity()
    }
}

impl DiscountContext {
    /// A context that leaves opinions unchanged.
    pub fn identity() -> Self {
        DiscountContext {
            source_trust: 1.0,
            spatial_decay: 1.0,
            temporal_decay: 1.0,
            distance: 0.0,
            age: 0.0,
            prior_weight: 1.0,
        }
    }

    pub fn with_source_trust(self, source_trust: f64) -> Self {
        DiscountContext { source_trust, ..self }
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        let unit = |field, value: f64, open: bool| {
            let ok = if open { value > 0.0 && value <= 1.0 } else { (0.0..=1.0).contains(&value) };
            if ok {
                Ok(())
            } else {
                Err(TrustError::OutOfRange { field, value, range: if open { "(0, 1]" } else { "[0, 1]" } })
            }
        };
        unit("source_trust", self.source_trust, false)?;
        unit("spatial_decay", self.spatial_decay, true)?;
        unit("temporal_decay", self.temporal_decay, true)?;
        unit("prior_weight", self.prior_weight, true)?;
        for (field, value) in [("distance", self.distance), ("age", self.age)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(TrustError::OutOfRange { field, value, range: "[0, inf)" });
            }
        }
        Ok(())
    }

    /// `P_dis = P_src · T_g^d · T_t^Δt · p_0`.
    pub fn p_dis(&self) -> f64 {
        self.source_trust
            * self.spatial_decay.powf(self.distance)
            * self.temporal_decay.powf(self.age)
            * self.prior_weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgingParams {
    /// Probability that trust is still valid after one epoch.
    pub p_sa: f64,
}

impl Default for AgingParams {
    fn default() -> Self {
        AgingParams { p_sa: 0.999 }
    }
}

/// Adds `weight` units of positive evidence to the trust opinion.
pub fn reward_success(tr: &TrustRecord, weight: f64) -> Result<TrustRecord, TrustError> {
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(TrustError::OutOfRange { field: "weight", value: weight, range: "[0, inf)" });
    }
    let (r, s) = tr.trust.to_evidence()?;
    if weight == 0.0 {
        return Ok(tr.clone());
    }
    Ok(TrustRecord { trust: BinomialOpinion::from_evidence(r + weight, s, tr.trust.a), ..tr.clone() })
}

/// Splits evidence into an independent share `(1-λ)` and a dependent share `λ`.
pub fn split_dependence(ev: &EvidenceRecord, lambda: f64) -> Result<(EvidenceRecord, EvidenceRecord), TrustError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(TrustError::OutOfRange { field: "lambda", value: lambda, range: "[0, 1]" });
    }
    Ok((ev.scaled(1.0 - lambda), ev.scaled(lambda)))
}

/// Consensus of two partially dependent binomial opinions: the dependent
/// parts are average-fused, then cumulatively fused with both independent
/// parts. Parts without evidence are neutral and skipped.
pub fn accumulate_partially_dependent(
    a: &BinomialOpinion,
    b: &BinomialOpinion,
    lambda_a: f64,
    lambda_b: f64,
) -> Result<BinomialOpinion, TrustError> {
    let ev_a = a.to_opinion().to_evidence()?;
    let ev_b = b.to_opinion().to_evidence()?;
    let (ind_a, dep_a) = split_dependence(&ev_a, lambda_a)?;
    let (ind_b, dep_b) = split_dependence(&ev_b, lambda_b)?;

    let mut parts: Vec<Opinion> = Vec::with_capacity(3);
    if !(dep_a.is_empty() && dep_b.is_empty()) {
        parts.push(average_fuse(&[dep_a.to_opinion(), dep_b.to_opinion()])?);
    }
    for ind in [ind_a, ind_b] {
        if !ind.is_empty() {
            parts.push(ind.to_opinion());
        }
    }
    let mut iter = parts.into_iter();
    let fused = match iter.next() {
        None => {
            let mut vac = BinomialOpinion::vacuous(a.a);
            if a.a != b.a {
                vac.a = (a.a + b.a) / 2.0;
            }
            return Ok(vac);
        }
        Some(first) => iter.try_fold(first, |acc, op| cumulative_fuse(&acc, &op))?,
    };
    Ok(BinomialOpinion::from_opinion(&fused)?)
}

/// Scales belief and disbelief by `P_sa`; the lost mass becomes uncertainty.
pub fn age_trust(tr: &TrustRecord, params: AgingParams) -> TrustRecord {
    let t = tr.trust;
    let b = params.p_sa * t.b;
    let d = params.p_sa * t.d;
    // 1 - P_sa (b + d), written so that P_sa = 1 is exact
    let u = t.u + (1.0 - params.p_sa) * (t.b + t.d);
    TrustRecord { trust: BinomialOpinion { b, d, u, a: t.a }, ..tr.clone() }
}

/// Scales every belief mass by `P_dis`; the lost mass becomes uncertainty.
pub fn discount_opinion(op: &Opinion, ctx: &DiscountContext) -> Opinion {
    let p = ctx.p_dis();
    if p == 1.0 {
        return op.clone();
    }
    let belief: Vec<f64> = op.belief().iter().map(|b| b * p).collect();
    let u = op.uncertainty() + (1.0 - p) * op.belief().iter().sum::<f64>();
    Opinion::from_parts_unchecked(op.domain().clone(), belief, u, op.base_rate().to_vec())
}

/// One JSON line of a serialized trust store.
#[derive(Debug, Serialize, Deserialize)]
struct TrustLine {
    agent_id: AgentId,
    b: f64,
    d: f64,
    u: f64,
    a: f64,
    lambda: f64,
    #[serde(default = "default_reward")]
    w_tr: u32,
}

fn default_reward() -> u32 {
    DEFAULT_REVISION_REWARD
}

/// Trust records keyed by agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrustStore {
    records: BTreeMap<AgentId, TrustRecord>,
}

impl TrustStore {
    pub fn new() -> Self {
        TrustStore::default()
    }

    pub fn get(&self, agent: &AgentId) -> Option<&TrustRecord> {
        self.records.get(agent)
    }

    /// The record for `agent`, created vacuous if missing.
    pub fn entry(&mut self, agent: &AgentId) -> &mut TrustRecord {
        self.records.entry(agent.clone()).or_insert_with(|| TrustRecord::new(agent.clone()))
    }

    pub fn insert(&mut self, record: TrustRecord) {
        self.records.insert(record.agent_id.clone(), record);
    }

    pub fn projected(&self, agent: &AgentId) -> Option<f64> {
        self.records.get(agent).map(TrustRecord::projected)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrustRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ages every record once.
    pub fn age_all(&mut self, params: AgingParams) {
        for rec in self.records.values_mut() {
            *rec = age_trust(rec, params);
        }
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for rec in self.records.values() {
            let line = TrustLine {
                agent_id: rec.agent_id.clone(),
                b: rec.trust.b,
                d: rec.trust.d,
                u: rec.trust.u,
                a: rec.trust.a,
                lambda: rec.dependence,
                w_tr: rec.revision_reward,
            };
            out.push_str(&serde_json::to_string(&line).expect("plain struct serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(text: &str) -> Result<Self, TrustError> {
        let mut store = TrustStore::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: TrustLine =
                serde_json::from_str(raw).map_err(|source| TrustError::Parse { line: i + 1, source })?;
            let rec = TrustRecord {
                agent_id: line.agent_id,
                trust: BinomialOpinion { b: line.b, d: line.d, u: line.u, a: line.a },
                dependence: line.lambda,
                revision_reward: line.w_tr,
            };
            rec.validate()?;
            store.insert(rec);
        }
        Ok(store)
    }
}
