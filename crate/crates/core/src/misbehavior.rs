//! Conflict-based misbehavior detection and trust revision.
//!
//! The pipeline discounts the reported opinions, links agents whose degree of
//! conflict stays below a threshold, takes the largest connected components as
//! competing hypotheses, elects a reference opinion per hypothesis, scores
//! every agent against each reference and keeps the hypothesis that explains
//! the most agents. Agents outside the winning honest set have their trust
//! revised in proportion to their conflict.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opinion::{average_fuse, Opinion, OpinionError};
use crate::trust::{discount_opinion, AgentId, DiscountContext, TrustStore};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MisbehaviorError {
    #[error(transparent)]
    Opinion(#[from] OpinionError),
    #[error("conflict detection needs at least 2 reports, got {0}")]
    InsufficientReports(usize),
    #[error("agent {0} reported more than once")]
    DuplicateReport(AgentId),
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("all conflicts are equal (MC = AC = {0}); revision weights undefined")]
    DegenerateConflict(f64),
    #[error("no candidate hypotheses")]
    NoCandidates,
}

/// An opinion as received from an agent, with the context used to discount it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedOpinion {
    pub agent: AgentId,
    pub opinion: Opinion,
    #[serde(default)]
    pub context: DiscountContext,
}

impl ReportedOpinion {
    pub fn new(agent: impl Into<AgentId>, opinion: Opinion) -> Self {
        ReportedOpinion { agent: agent.into(), opinion, context: DiscountContext::identity() }
    }
}

/// `DC = ½ Σ_x |P_a(x) − P_b(x)| · (1 − u_a)(1 − u_b)`.
pub fn degree_of_conflict(a: &Opinion, b: &Opinion) -> Result<f64, OpinionError> {
    if a.domain() != b.domain() {
        return Err(OpinionError::DomainMismatch("degree of conflict".into()));
    }
    Ok(dc_unchecked(a, b))
}

fn dc_unchecked(a: &Opinion, b: &Opinion) -> f64 {
    let (ua, ub) = (a.uncertainty(), b.uncertainty());
    let mut diff = 0.0;
    for x in 0..a.belief().len() {
        let pa = a.belief()[x] + a.base_rate()[x] * ua;
        let pb = b.belief()[x] + b.base_rate()[x] * ub;
        diff += (pa - pb).abs();
    }
    // the confidence product first keeps DC(a, b) == DC(b, a) bit for bit
    (0.5 * diff * ((1.0 - ua) * (1.0 - ub))).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictEdge {
    pub a: AgentId,
    pub b: AgentId,
    pub dc: f64,
}

/// Agents as vertices; pairs with `DC ≤ θ` are linked.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictGraph {
    vertices: Vec<AgentId>,
    /// Every pair, ascending by DC.
    pairs: Vec<ConflictEdge>,
    /// Pairs kept after the cut.
    edges: Vec<ConflictEdge>,
    /// Links asserted from outside the conflict list (corroboration).
    links: Vec<(AgentId, AgentId)>,
    threshold: f64,
    #[serde(skip)]
    adjacency: Vec<bool>,
}

impl ConflictGraph {
    pub fn vertices(&self) -> &[AgentId] {
        &self.vertices
    }

    /// The full conflict list, sorted ascending by DC.
    pub fn conflict_list(&self) -> &[ConflictEdge] {
        &self.pairs
    }

    pub fn edges(&self) -> &[ConflictEdge] {
        &self.edges
    }

    pub fn links(&self) -> &[(AgentId, AgentId)] {
        &self.links
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn index_of(&self, agent: &AgentId) -> Option<usize> {
        self.vertices.iter().position(|v| v == agent)
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        i != j && self.adjacency[i * self.vertices.len() + j]
    }

    /// Adds an edge between two vertices regardless of their conflict.
    pub fn link(&mut self, i: usize, j: usize) {
        if i == j || self.adjacent(i, j) {
            return;
        }
        let n = self.vertices.len();
        self.adjacency[i * n + j] = true;
        self.adjacency[j * n + i] = true;
        let (lo, hi) = (i.min(j), i.max(j));
        self.links.push((self.vertices[lo].clone(), self.vertices[hi].clone()));
    }

    /// Connected components as sorted vertex-index lists, ordered by their
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut uf = UnionFind::<usize>::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacent(i, j) {
                    uf.union(i, j);
                }
            }
        }
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            by_root.entry(uf.find(v)).or_default().push(v);
        }
        let mut comps: Vec<Vec<usize>> = by_root.into_values().collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }
}

fn check_reports(reports: &[ReportedOpinion]) -> Result<(), MisbehaviorError> {
    if reports.len() < 2 {
        return Err(MisbehaviorError::InsufficientReports(reports.len()));
    }
    let mut seen = BTreeSet::new();
    for r in reports {
        if !seen.insert(&r.agent) {
            return Err(MisbehaviorError::DuplicateReport(r.agent.clone()));
        }
        if r.opinion.domain() != reports[0].opinion.domain() {
            return Err(OpinionError::DomainMismatch(format!("report of {}", r.agent)).into());
        }
    }
    Ok(())
}

fn check_threshold(theta: f64) -> Result<(), MisbehaviorError> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(MisbehaviorError::InvalidThreshold(theta))
    }
}

/// Builds the thresholded conflict graph over (already discounted) reports.
pub fn build_conflict_graph(reports: &[ReportedOpinion], theta: f64) -> Result<ConflictGraph, MisbehaviorError> {
    check_reports(reports)?;
    check_threshold(theta)?;
    let n = reports.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut adjacency = vec![false; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dc = dc_unchecked(&reports[i].opinion, &reports[j].opinion);
            if dc <= theta {
                adjacency[i * n + j] = true;
                adjacency[j * n + i] = true;
            }
            pairs.push(ConflictEdge { a: reports[i].agent.clone(), b: reports[j].agent.clone(), dc });
        }
    }
    pairs.sort_by(|x, y| x.dc.total_cmp(&y.dc));
    let edges = pairs.iter().filter(|e| e.dc <= theta).cloned().collect();
    Ok(ConflictGraph {
        vertices: reports.iter().map(|r| r.agent.clone()).collect(),
        pairs,
        edges,
        links: Vec::new(),
        threshold: theta,
        adjacency,
    })
}

/// All connected components of maximal size.
pub fn dominant_components(g: &ConflictGraph) -> Vec<Vec<usize>> {
    let comps = g.components();
    let max = comps.iter().map(Vec::len).max().unwrap_or(0);
    comps.into_iter().filter(|c| c.len() == max).collect()
}

/// Reference opinion of a component: the opinion of its unique vertex
/// adjacent to all other members, otherwise the average fusion of all members.
pub fn reference_opinion(
    component: &[usize],
    g: &ConflictGraph,
    opinions: &[Opinion],
) -> Result<Opinion, MisbehaviorError> {
    match component {
        [] => Err(MisbehaviorError::NoCandidates),
        [only] => Ok(opinions[*only].clone()),
        _ => {
            let hubs: Vec<usize> =
                component.iter().copied().filter(|&v| component.iter().all(|&w| w == v || g.adjacent(v, w))).collect();
            if let [hub] = hubs.as_slice() {
                Ok(opinions[*hub].clone())
            } else {
                let members: Vec<Opinion> = component.iter().map(|&v| opinions[v].clone()).collect();
                Ok(average_fuse(&members)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub honest: BTreeSet<AgentId>,
    pub misbehaving: BTreeSet<AgentId>,
    pub conflicts: BTreeMap<AgentId, f64>,
}

impl Classification {
    /// Mean conflict of the honest members; infinite when there are none.
    pub fn honest_avg_conflict(&self) -> f64 {
        if self.honest.is_empty() {
            return f64::INFINITY;
        }
        self.honest.iter().map(|a| self.conflicts[a]).sum::<f64>() / self.honest.len() as f64
    }
}

/// Scores every report against `reference`; `DC ≤ θ` is honest.
pub fn classify(
    reports: &[ReportedOpinion],
    reference: &Opinion,
    theta: f64,
) -> Result<Classification, MisbehaviorError> {
    check_threshold(theta)?;
    let mut out = Classification { honest: BTreeSet::new(), misbehaving: BTreeSet::new(), conflicts: BTreeMap::new() };
    for r in reports {
        let dc = degree_of_conflict(&r.opinion, reference)?;
        if dc <= theta {
            out.honest.insert(r.agent.clone());
        } else {
            out.misbehaving.insert(r.agent.clone());
        }
        out.conflicts.insert(r.agent.clone(), dc);
    }
    Ok(out)
}

/// One competing hypothesis: a dominant component with its reference and
/// the classification it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub component: Vec<AgentId>,
    pub reference: Opinion,
    pub classification: Classification,
    /// Honest members that are also corroborated; zero without corroboration.
    pub corroborated_honest: usize,
}

/// Picks the hypothesis with the most honest agents. Ties go to more
/// corroborated honest agents, then to the lower average conflict among
/// honest agents, then to the component whose first agent id sorts first.
pub fn select_reference(candidates: &[Candidate]) -> Result<usize, MisbehaviorError> {
    let key_cmp = |x: &Candidate, y: &Candidate| -> Ordering {
        y.classification
            .honest
            .len()
            .cmp(&x.classification.honest.len())
            .then(y.corroborated_honest.cmp(&x.corroborated_honest))
            .then(x.classification.honest_avg_conflict().total_cmp(&y.classification.honest_avg_conflict()))
            .then(x.component.iter().min().cmp(&y.component.iter().min()))
    };
    (0..candidates.len())
        .min_by(|&i, &j| key_cmp(&candidates[i], &candidates[j]).then(i.cmp(&j)))
        .ok_or(MisbehaviorError::NoCandidates)
}

/// Revision weights of the misbehaving agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revision {
    pub max_conflict: f64,
    pub avg_conflict: f64,
    pub weights: BTreeMap<AgentId, f64>,
}

/// `MC = max DC`, `AC = mean DC`, `RW = MC (DC − AC) / (MC − AC)` clamped to `[0, MC]`.
pub fn revision_weights(
    conflicts: &BTreeMap<AgentId, f64>,
    misbehaving: &BTreeSet<AgentId>,
) -> Result<Revision, MisbehaviorError> {
    if conflicts.is_empty() {
        return Err(MisbehaviorError::InsufficientReports(0));
    }
    let mc = conflicts.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let ac = conflicts.values().sum::<f64>() / conflicts.len() as f64;
    let mut weights = BTreeMap::new();
    if misbehaving.is_empty() {
        return Ok(Revision { max_conflict: mc, avg_conflict: ac, weights });
    }
    if mc - ac <= 0.0 {
        return Err(MisbehaviorError::DegenerateConflict(mc));
    }
    for agent in misbehaving {
        let dc = conflicts.get(agent).copied().unwrap_or(mc);
        let rw = (mc * (dc - ac) / (mc - ac)).clamp(0.0, mc);
        weights.insert(agent.clone(), rw);
    }
    Ok(Revision { max_conflict: mc, avg_conflict: ac, weights })
}

/// Applies revision weights: `b` and `u` shrink by `(1 − RW)`, disbelief
/// absorbs the rest. Only misbehaving agents are touched.
pub fn revise_trust(
    conflicts: &BTreeMap<AgentId, f64>,
    misbehaving: &BTreeSet<AgentId>,
    store: &mut TrustStore,
) -> Result<Revision, MisbehaviorError> {
    let revision = revision_weights(conflicts, misbehaving)?;
    for (agent, rw) in &revision.weights {
        let rec = store.entry(agent);
        let keep = 1.0 - rw;
        let t = &mut rec.trust;
        t.b *= keep;
        t.u *= keep;
        t.d = 1.0 - t.b - t.u;
    }
    Ok(revision)
}

/// Parameters of one detection run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectParams {
    pub theta: f64,
    /// Agents whose mutual consistency was established on an independent
    /// topic. They are linked in the conflict graph, a dominant component
    /// holding two or more of them uses their average fusion as reference,
    /// and hypotheses with more corroborated honest agents win ties.
    #[serde(default)]
    pub corroborated: BTreeSet<AgentId>,
}

impl DetectParams {
    pub fn new(theta: f64) -> Self {
        DetectParams { theta, corroborated: BTreeSet::new() }
    }

    pub fn with_corroborated(mut self, agents: impl IntoIterator<Item = AgentId>) -> Self {
        self.corroborated = agents.into_iter().collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub reference: Opinion,
    pub candidate_references: Vec<Opinion>,
    pub honest: BTreeSet<AgentId>,
    pub misbehaving: BTreeSet<AgentId>,
    pub conflicts: BTreeMap<AgentId, f64>,
    pub revision_weights: BTreeMap<AgentId, f64>,
    pub max_conflict: f64,
    pub avg_conflict: f64,
    /// Set when all conflicts are equal and no weights could be derived.
    #[serde(default)]
    pub degenerate: bool,
}

impl ClassificationResult {
    pub fn all_honest(&self) -> bool {
        self.misbehaving.is_empty()
    }
}

/// Applies step-1 discounting. Agents with a trust record are discounted by
/// its projection; others by the `source_trust` in their context.
pub fn discount_reports(reports: &[ReportedOpinion], store: &TrustStore) -> Vec<ReportedOpinion> {
    reports
        .iter()
        .map(|r| {
            let ctx = match store.projected(&r.agent) {
                Some(p) => r.context.with_source_trust(p),
                None => r.context,
            };
            ReportedOpinion { agent: r.agent.clone(), opinion: discount_opinion(&r.opinion, &ctx), context: ctx }
        })
        .collect()
}

/// Runs the full pipeline on one topic. Pure: the trust store is only read
/// for discounting; apply [`revise_trust`] to act on the verdict.
pub fn detect(
    reports: &[ReportedOpinion],
    store: &TrustStore,
    params: &DetectParams,
) -> Result<ClassificationResult, MisbehaviorError> {
    check_reports(reports)?;
    let discounted = discount_reports(reports, store);
    let mut graph = build_conflict_graph(&discounted, params.theta)?;
    let corroborated: Vec<usize> =
        (0..graph.len()).filter(|&i| params.corroborated.contains(&graph.vertices()[i])).collect();
    for (k, &i) in corroborated.iter().enumerate() {
        for &j in &corroborated[k + 1..] {
            graph.link(i, j);
        }
    }
    let opinions: Vec<Opinion> = discounted.iter().map(|r| r.opinion.clone()).collect();

    let mut candidates = Vec::new();
    for comp in dominant_components(&graph) {
        let vouched: Vec<usize> = comp.iter().copied().filter(|v| corroborated.contains(v)).collect();
        let reference = if vouched.len() >= 2 {
            let members: Vec<Opinion> = vouched.iter().map(|&v| opinions[v].clone()).collect();
            average_fuse(&members)?
        } else {
            reference_opinion(&comp, &graph, &opinions)?
        };
        let classification = classify(&discounted, &reference, params.theta)?;
        let corroborated_honest = classification.honest.iter().filter(|a| params.corroborated.contains(*a)).count();
        candidates.push(Candidate {
            component: comp.iter().map(|&v| graph.vertices()[v].clone()).collect(),
            reference,
            classification,
            corroborated_honest,
        });
    }
    let best = select_reference(&candidates)?;
    let candidate_references = candidates.iter().map(|c| c.reference.clone()).collect();
    let chosen = candidates.swap_remove(best);
    let Classification { honest, misbehaving, conflicts } = chosen.classification;
    let (revision, degenerate) = match revision_weights(&conflicts, &misbehaving) {
        Ok(r) => (r, false),
        Err(MisbehaviorError::DegenerateConflict(mc)) => {
            (Revision { max_conflict: mc, avg_conflict: mc, weights: BTreeMap::new() }, true)
        }
        Err(e) => return Err(e),
    };
    Ok(ClassificationResult {
        reference: chosen.reference,
        candidate_references,
        honest,
        misbehaving,
        conflicts,
        revision_weights: revision.weights,
        max_conflict: revision.max_conflict,
        avg_conflict: revision.avg_conflict,
        degenerate,
    })
}
