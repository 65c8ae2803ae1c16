//! Multinomial subjective-logic opinions, their Dirichlet evidence form and
//! the cumulative and average fusion operators.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Tolerance for opinion invariants (additivity, component ranges).
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpinionError {
    #[error("invalid opinion: {0}")]
    InvalidOpinion(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),
    #[error("dogmatic opinion (u = 0) has no evidence representation")]
    DogmaticOpinion,
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("fusion operands are on different domains")]
    FusionDomainMismatch,
    #[error("dogmatic operand (u = 0) is excluded from fusion")]
    DogmaticOperand,
    #[error("vacuous operand (u = 1) is excluded from cumulative fusion")]
    VacuousOperand,
    #[error("average fusion needs at least two operands, got {0}")]
    TooFewOperands(usize),
    #[error("invalid probability vector: {0}")]
    InvalidProbabilityVector(String),
}

/// Ordered set of outcome labels. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Domain {
    labels: Arc<[String]>,
}

impl Domain {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, OpinionError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(OpinionError::InvalidDomain(format!("cardinality must be at least 2, got {}", labels.len())));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(OpinionError::InvalidDomain(format!("duplicate label {l:?}")));
            }
        }
        Ok(Domain { labels: labels.into() })
    }

    /// The binary domain `{x, not_x}` used for trust opinions.
    pub fn binary() -> Self {
        Domain::new(["x", "not_x"]).expect("two distinct labels")
    }

    /// Domain with labels `0..n` rendered as strings (histogram bins).
    pub fn indexed(n: usize) -> Result<Self, OpinionError> {
        Domain::new((0..n).map(|i| i.to_string()))
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Uniform base rate `1/W` on every outcome.
    pub fn uniform_base_rate(&self) -> Vec<f64> {
        vec![1.0 / self.cardinality() as f64; self.cardinality()]
    }

    fn same_as(&self, other: &Domain) -> bool {
        Arc::ptr_eq(&self.labels, &other.labels) || self.labels == other.labels
    }
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.labels.iter()).finish()
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), OpinionError> {
    if !(-TOLERANCE..=1.0 + TOLERANCE).contains(&v) {
        return Err(OpinionError::InvalidOpinion(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

fn check_base_rate(domain: &Domain, base_rate: &[f64]) -> Result<(), OpinionError> {
    if base_rate.len() != domain.cardinality() {
        return Err(OpinionError::InvalidOpinion(format!(
            "base_rate has {} entries for a domain of {}",
            base_rate.len(),
            domain.cardinality()
        )));
    }
    for (l, a) in domain.labels().iter().zip(base_rate) {
        check_unit(&format!("base_rate[{l}]"), *a)?;
    }
    let sum: f64 = base_rate.iter().sum();
    if (sum - 1.0).abs() > TOLERANCE {
        return Err(OpinionError::InvalidOpinion(format!("base_rate sums to {sum}, expected 1")));
    }
    Ok(())
}

/// A multinomial opinion `(b, u, a)` over a domain.
///
/// Fields are private so every value in circulation has passed validation.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OpinionRepr", into = "OpinionRepr")]
pub struct Opinion {
    domain: Domain,
    belief: Vec<f64>,
    uncertainty: f64,
    base_rate: Vec<f64>,
}

/// Canonical JSON shape of an opinion.
#[derive(Serialize, Deserialize)]
struct OpinionRepr {
    labels: Vec<String>,
    belief: Vec<f64>,
    uncertainty: f64,
    base_rate: Vec<f64>,
}

impl TryFrom<OpinionRepr> for Opinion {
    type Error = OpinionError;

    fn try_from(r: OpinionRepr) -> Result<Self, Self::Error> {
        Opinion::new(Domain::new(r.labels)?, r.belief, r.uncertainty, r.base_rate)
    }
}

impl From<Opinion> for OpinionRepr {
    fn from(o: Opinion) -> Self {
        OpinionRepr {
            labels: o.domain.labels().to_vec(),
            belief: o.belief,
            uncertainty: o.uncertainty,
            base_rate: o.base_rate,
        }
    }
}

impl fmt::Debug for Opinion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Opinion")
            .field("domain", &self.domain)
            .field("belief", &self.belief)
            .field("uncertainty", &self.uncertainty)
            .field("base_rate", &self.base_rate)
            .finish()
    }
}

impl Opinion {
    /// Builds an opinion, failing with `InvalidOpinion` if any invariant is
    /// violated beyond [`TOLERANCE`].
    pub fn new(domain: Domain, belief: Vec<f64>, uncertainty: f64, base_rate: Vec<f64>) -> Result<Self, OpinionError> {
        let op = Opinion { domain, belief, uncertainty, base_rate };
        op.check()?;
        Ok(op)
    }

    /// Vacuous opinion (no evidence) with the given base rate.
    pub fn vacuous(domain: Domain, base_rate: Vec<f64>) -> Result<Self, OpinionError> {
        let w = domain.cardinality();
        Opinion::new(domain, vec![0.0; w], 1.0, base_rate)
    }

    pub fn vacuous_uniform(domain: Domain) -> Self {
        let a = domain.uniform_base_rate();
        Opinion::vacuous(domain, a).expect("uniform base rate is valid")
    }

    fn check(&self) -> Result<(), OpinionError> {
        let w = self.domain.cardinality();
        if self.belief.len() != w {
            return Err(OpinionError::InvalidOpinion(format!(
                "belief has {} entries for a domain of {w}",
                self.belief.len()
            )));
        }
        for (l, b) in self.domain.labels().iter().zip(&self.belief) {
            check_unit(&format!("belief[{l}]"), *b)?;
        }
        check_unit("uncertainty", self.uncertainty)?;
        let mass: f64 = self.belief.iter().sum::<f64>() + self.uncertainty;
        if (mass - 1.0).abs() > TOLERANCE {
            return Err(OpinionError::InvalidOpinion(format!("belief + uncertainty sums to {mass}, expected 1")));
        }
        check_base_rate(&self.domain, &self.base_rate)
    }

    /// Re-checks all invariants.
    pub fn validate(&self) -> Result<(), OpinionError> {
        self.check()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn belief(&self) -> &[f64] {
        &self.belief
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn base_rate(&self) -> &[f64] {
        &self.base_rate
    }

    pub fn belief_of(&self, label: &str) -> Option<f64> {
        self.domain.index_of(label).map(|i| self.belief[i])
    }

    pub fn is_dogmatic(&self) -> bool {
        self.uncertainty <= 0.0
    }

    pub fn is_vacuous(&self) -> bool {
        self.uncertainty >= 1.0
    }

    /// Maps Dirichlet evidence to an opinion: `b = r / (W + Σr)`, `u = W / (W + Σr)`.
    pub fn from_evidence(ev: &EvidenceRecord) -> Opinion {
        let w = ev.domain.cardinality() as f64;
        let denom = w + ev.evidence.iter().sum::<f64>();
        Opinion {
            domain: ev.domain.clone(),
            belief: ev.evidence.iter().map(|r| r / denom).collect(),
            uncertainty: w / denom,
            base_rate: ev.base_rate.clone(),
        }
    }

    /// Inverse mapping `r = W b / u`.
    pub fn to_evidence(&self) -> Result<EvidenceRecord, OpinionError> {
        if self.is_dogmatic() {
            return Err(OpinionError::DogmaticOpinion);
        }
        let w = self.domain.cardinality() as f64;
        Ok(EvidenceRecord {
            domain: self.domain.clone(),
            evidence: self.belief.iter().map(|b| w * b / self.uncertainty).collect(),
            base_rate: self.base_rate.clone(),
        })
    }

    /// Projected probability `P(x) = b(x) + a(x) u`.
    pub fn project(&self) -> Vec<f64> {
        self.belief.iter().zip(&self.base_rate).map(|(b, a)| b + a * self.uncertainty).collect()
    }

    /// Belief normalised by the committed mass, `b / (1 - u)`; the
    /// empirical frequencies behind an evidence-derived opinion. `None` for
    /// a vacuous opinion.
    pub fn normalized_belief(&self) -> Option<Vec<f64>> {
        let mass = 1.0 - self.uncertainty;
        if mass <= 0.0 {
            return None;
        }
        Some(self.belief.iter().map(|b| b / mass).collect())
    }

    /// Replaces components without validation; callers guarantee validity.
    pub(crate) fn from_parts_unchecked(
        domain: Domain,
        belief: Vec<f64>,
        uncertainty: f64,
        base_rate: Vec<f64>,
    ) -> Opinion {
        let op = Opinion { domain, belief, uncertainty, base_rate };
        debug_assert!(op.check().is_ok(), "{op:?}");
        op
    }
}

/// Free-function form of [`Opinion::validate`]: returns the opinion unchanged
/// when it satisfies every invariant.
pub fn validate(op: Opinion) -> Result<Opinion, OpinionError> {
    op.check()?;
    Ok(op)
}

/// Dirichlet evidence counts with a base rate. Counts are non-negative reals.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceRecord {
    domain: Domain,
    evidence: Vec<f64>,
    base_rate: Vec<f64>,
}

impl EvidenceRecord {
    pub fn new(domain: Domain, evidence: Vec<f64>, base_rate: Vec<f64>) -> Result<Self, OpinionError> {
        if evidence.len() != domain.cardinality() {
            return Err(OpinionError::InvalidEvidence(format!(
                "{} evidence values for a domain of {}",
                evidence.len(),
                domain.cardinality()
            )));
        }
        if let Some(r) = evidence.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(OpinionError::InvalidEvidence(format!("evidence value {r} is negative")));
        }
        check_base_rate(&domain, &base_rate)?;
        Ok(EvidenceRecord { domain, evidence, base_rate })
    }

    /// Zero evidence with a uniform base rate.
    pub fn empty(domain: Domain) -> Self {
        let w = domain.cardinality();
        let base_rate = domain.uniform_base_rate();
        EvidenceRecord { domain, evidence: vec![0.0; w], base_rate }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn evidence(&self) -> &[f64] {
        &self.evidence
    }

    pub fn base_rate(&self) -> &[f64] {
        &self.base_rate
    }

    pub fn total(&self) -> f64 {
        self.evidence.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0.0
    }

    /// Every count multiplied by `factor` (non-negative).
    pub fn scaled(&self, factor: f64) -> EvidenceRecord {
        EvidenceRecord {
            domain: self.domain.clone(),
            evidence: self.evidence.iter().map(|r| r * factor).collect(),
            base_rate: self.base_rate.clone(),
        }
    }

    /// Componentwise sum; the base rate of `self` is kept.
    pub fn add(&self, other: &EvidenceRecord) -> Result<EvidenceRecord, OpinionError> {
        if !self.domain.same_as(&other.domain) {
            return Err(OpinionError::DomainMismatch("evidence addition".into()));
        }
        Ok(EvidenceRecord {
            domain: self.domain.clone(),
            evidence: self.evidence.iter().zip(&other.evidence).map(|(a, b)| a + b).collect(),
            base_rate: self.base_rate.clone(),
        })
    }

    pub fn to_opinion(&self) -> Opinion {
        Opinion::from_evidence(self)
    }
}

/// Binomial opinion `(b, d, u, a)` on the binary domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialOpinion {
    pub b: f64,
    pub d: f64,
    pub u: f64,
    pub a: f64,
}

impl BinomialOpinion {
    pub fn new(b: f64, d: f64, u: f64, a: f64) -> Result<Self, OpinionError> {
        let op = BinomialOpinion { b, d, u, a };
        op.validate()?;
        Ok(op)
    }

    pub fn vacuous(a: f64) -> Self {
        BinomialOpinion { b: 0.0, d: 0.0, u: 1.0, a }
    }

    pub fn validate(&self) -> Result<(), OpinionError> {
        check_unit("b", self.b)?;
        check_unit("d", self.d)?;
        check_unit("u", self.u)?;
        check_unit("a", self.a)?;
        let mass = self.b + self.d + self.u;
        if (mass - 1.0).abs() > TOLERANCE {
            return Err(OpinionError::InvalidOpinion(format!("b + d + u sums to {mass}, expected 1")));
        }
        Ok(())
    }

    /// `b = r / (2 + r + s)`, `d = s / (2 + r + s)`, `u = 2 / (2 + r + s)`.
    pub fn from_evidence(r: f64, s: f64, a: f64) -> Self {
        let denom = 2.0 + r + s;
        BinomialOpinion { b: r / denom, d: s / denom, u: 2.0 / denom, a }
    }

    /// Evidence pair `(r, s)`.
    pub fn to_evidence(&self) -> Result<(f64, f64), OpinionError> {
        if self.u <= 0.0 {
            return Err(OpinionError::DogmaticOpinion);
        }
        Ok((2.0 * self.b / self.u, 2.0 * self.d / self.u))
    }

    pub fn project(&self) -> f64 {
        self.b + self.a * self.u
    }

    pub fn to_opinion(&self) -> Opinion {
        Opinion::from_parts_unchecked(Domain::binary(), vec![self.b, self.d], self.u, vec![self.a, 1.0 - self.a])
    }

    pub fn from_opinion(op: &Opinion) -> Result<Self, OpinionError> {
        if op.domain().cardinality() != 2 {
            return Err(OpinionError::DomainMismatch(format!(
                "binomial opinion needs W = 2, got {}",
                op.domain().cardinality()
            )));
        }
        Ok(BinomialOpinion { b: op.belief[0], d: op.belief[1], u: op.uncertainty, a: op.base_rate[0] })
    }
}

/// Dirichlet density at `p` with parameters `α_x = r_x + a_x W`.
pub fn dirichlet_pdf(p: &[f64], ev: &EvidenceRecord) -> Result<f64, OpinionError> {
    let w = ev.domain.cardinality();
    if p.len() != w {
        return Err(OpinionError::DomainMismatch(format!(
            "probability vector has {} entries for a domain of {w}",
            p.len()
        )));
    }
    if p.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(OpinionError::InvalidProbabilityVector("entries must be strictly positive".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > TOLERANCE {
        return Err(OpinionError::InvalidProbabilityVector(format!("entries sum to {sum}")));
    }
    let alpha: Vec<f64> = ev.evidence.iter().zip(&ev.base_rate).map(|(r, a)| r + a * w as f64).collect();
    if alpha.iter().any(|a| *a <= 0.0) {
        return Err(OpinionError::InvalidEvidence("Dirichlet parameter r + aW must be positive".into()));
    }
    let ln_norm = ln_gamma(alpha.iter().sum()) - alpha.iter().map(|a| ln_gamma(*a)).sum::<f64>();
    let ln_kernel: f64 = alpha.iter().zip(p).map(|(a, x)| (a - 1.0) * x.ln()).sum();
    Ok((ln_norm + ln_kernel).exp())
}

fn fusion_operands(a: &Opinion, b: &Opinion) -> Result<(), OpinionError> {
    if !a.domain.same_as(&b.domain) {
        return Err(OpinionError::FusionDomainMismatch);
    }
    if a.is_dogmatic() || b.is_dogmatic() {
        return Err(OpinionError::DogmaticOperand);
    }
    Ok(())
}

/// Aleatory cumulative belief fusion of two non-dogmatic, non-vacuous opinions.
pub fn cumulative_fuse(a: &Opinion, b: &Opinion) -> Result<Opinion, OpinionError> {
    fusion_operands(a, b)?;
    if a.is_vacuous() || b.is_vacuous() {
        return Err(OpinionError::VacuousOperand);
    }
    let (ua, ub) = (a.uncertainty, b.uncertainty);
    let k = ua + ub - ua * ub;
    let belief = a.belief.iter().zip(&b.belief).map(|(ba, bb)| (ba * ub + bb * ua) / k).collect();
    let uncertainty = ua * ub / k;
    let base_rate = if ua == ub {
        a.base_rate.iter().zip(&b.base_rate).map(|(x, y)| (x + y) / 2.0).collect()
    } else {
        let denom = ua + ub - 2.0 * ua * ub;
        a.base_rate.iter().zip(&b.base_rate).map(|(aa, ab)| (aa * ub + ab * ua - (aa + ab) * ua * ub) / denom).collect()
    };
    Ok(Opinion::from_parts_unchecked(a.domain.clone(), belief, uncertainty, base_rate))
}

/// Aleatory average belief fusion of `n >= 2` non-dogmatic opinions.
///
/// Computed as the mean of the operands' evidence vectors, which for two
/// operands is the pairwise formula and stays permutation invariant for more.
pub fn average_fuse(ops: &[Opinion]) -> Result<Opinion, OpinionError> {
    if ops.len() < 2 {
        return Err(OpinionError::TooFewOperands(ops.len()));
    }
    let first = &ops[0];
    for op in &ops[1..] {
        fusion_operands(first, op)?;
    }
    if first.is_dogmatic() {
        return Err(OpinionError::DogmaticOperand);
    }
    let n = ops.len() as f64;
    let w = first.domain.cardinality();
    // u = n / Σ 1/u_i and b = u/n Σ b_i/u_i, the closed form of the
    // evidence mean under the evidence mapping.
    let inv_sum: f64 = ops.iter().map(|o| 1.0 / o.uncertainty).sum();
    let uncertainty = n / inv_sum;
    let mut belief = vec![0.0; w];
    let mut base_rate = vec![0.0; w];
    for op in ops {
        for x in 0..w {
            belief[x] += op.belief[x] / op.uncertainty;
            base_rate[x] += op.base_rate[x];
        }
    }
    for x in 0..w {
        belief[x] /= inv_sum;
        base_rate[x] /= n;
    }
    Ok(Opinion::from_parts_unchecked(first.domain.clone(), belief, uncertainty, base_rate))
}
