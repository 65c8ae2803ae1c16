//! Cycle-based simulation of a trusted publish/subscribe broker.
//!
//! Each cycle runs: trust aging, window expiry, registration (with the
//! one-pseudonym-per-topic Sybil check), measurement and publication,
//! routing, user-side checks, and either success rewards or broker
//! adjudication of the reported incidents. Every step is written to a
//! JSON-lines trace that is enough to replay the broker's verdicts.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::misbehavior::{detect, revise_trust, ClassificationResult, DetectParams, MisbehaviorError, ReportedOpinion};
use crate::opinion::{BinomialOpinion, Opinion};
use crate::scenarios::measurement::{HistogramSpec, MeasurementModel};
use crate::scenarios::run_rng;
use crate::trust::{reward_success, AgentId, AgingParams, DiscountContext, TrustRecord, TrustStore};

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("agent {agent} already holds an active pseudonym on topic {topic}")]
    SybilFlag { agent: AgentId, topic: String },
    #[error("agent {0} is revoked")]
    RevokedAgent(AgentId),
    #[error("no overlapping provider/user windows on topic {topic} at t = {time}")]
    NoMatchingWindow { topic: String, time: f64 },
    #[error(transparent)]
    Misbehavior(#[from] MisbehaviorError),
    #[error("trace line {line}: {source}")]
    Trace { line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Provider,
    User,
    HiddenObserver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Reports data standardized with false estimates.
    Shift { est_mean: f64, est_std: f64 },
    /// Reports honest data but registers `extra_pseudonyms` additional
    /// pseudonyms on each of its topics.
    Sybil { extra_pseudonyms: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Honest,
    Faulty { est_mean: f64, est_std: f64 },
    Malicious { strategy: Strategy },
}

impl Behavior {
    fn sensor(&self, true_model: MeasurementModel) -> MeasurementModel {
        match *self {
            Behavior::Honest | Behavior::Malicious { strategy: Strategy::Sybil { .. } } => true_model,
            Behavior::Faulty { est_mean, est_std }
            | Behavior::Malicious { strategy: Strategy::Shift { est_mean, est_std } } => {
                true_model.with_estimate(est_mean, est_std)
            }
        }
    }

    fn pseudonyms_per_registration(&self) -> usize {
        match self {
            Behavior::Malicious { strategy: Strategy::Sybil { extra_pseudonyms } } => 1 + extra_pseudonyms,
            _ => 1,
        }
    }

    pub fn is_correct(&self) -> bool {
        matches!(self, Behavior::Honest)
    }
}

/// Participation of an agent in a topic during `[start, end)` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscription {
    pub topic: String,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub id: AgentId,
    pub role: Role,
    pub subscriptions: Vec<Subscription>,
    /// True noise of the agent's sensor; estimates come from `behavior`.
    pub measurement: MeasurementModel,
    pub behavior: Behavior,
}

/// Runtime view of an agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentProfile {
    pub true_id: AgentId,
    pub role: Role,
    pub pseudonyms: BTreeSet<String>,
    pub measurement_model: MeasurementModel,
    pub behavior: Behavior,
    pub revoked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BanPolicy {
    /// Revoke when projected trust falls below `threshold`.
    TrustThreshold { threshold: f64 },
    /// Revoke when `detections` of the last `batch_size` adjudications
    /// involving the agent flagged it.
    Batch { batch_size: usize, detections: usize },
}

impl Default for BanPolicy {
    fn default() -> Self {
        BanPolicy::TrustThreshold { threshold: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub cycles: u64,
    pub cycle_seconds: f64,
    pub theta: f64,
    /// λ for repeated cooperation of one provider/user pair.
    pub same_pair_lambda: f64,
    pub aging: AgingParams,
    pub w_tr: u32,
    pub ban_policy: BanPolicy,
    pub initial_trust_base_rate: f64,
    /// Discount reports by projected trust during adjudication.
    pub discount_by_trust: bool,
    pub histogram: HistogramSpec,
    pub topics: Vec<Topic>,
    pub agents: Vec<AgentConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            cycles: 100,
            cycle_seconds: 1.0,
            theta: 0.15,
            same_pair_lambda: 0.5,
            aging: AgingParams::default(),
            w_tr: 5,
            ban_policy: BanPolicy::default(),
            initial_trust_base_rate: 0.5,
            discount_by_trust: false,
            histogram: HistogramSpec::default(),
            topics: Vec::new(),
            agents: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, BrokerError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| BrokerError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BrokerError> {
        let bad = |m: String| Err(BrokerError::Config(m));
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta {} outside [0, 1]", self.theta));
        }
        if !(0.0..=1.0).contains(&self.same_pair_lambda) {
            return bad(format!("same_pair_lambda {} outside [0, 1]", self.same_pair_lambda));
        }
        if !(self.aging.p_sa > 0.0 && self.aging.p_sa <= 1.0) {
            return bad(format!("aging.p_sa {} outside (0, 1]", self.aging.p_sa));
        }
        if !(self.cycle_seconds > 0.0) {
            return bad("cycle_seconds must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.initial_trust_base_rate) {
            return bad("initial_trust_base_rate outside [0, 1]".into());
        }
        match self.ban_policy {
            BanPolicy::TrustThreshold { threshold } if !(0.0..=1.0).contains(&threshold) => {
                return bad(format!("ban threshold {threshold} outside [0, 1]"));
            }
            BanPolicy::Batch { batch_size, detections } if batch_size == 0 || detections > batch_size => {
                return bad("batch policy needs 0 < detections <= batch_size".into());
            }
            _ => {}
        }
        let topics: BTreeSet<&str> = self.topics.iter().map(|t| t.id.as_str()).collect();
        let mut ids = BTreeSet::new();
        for a in &self.agents {
            if !ids.insert(&a.id) {
                return bad(format!("duplicate agent id {}", a.id));
            }
            a.measurement.validate().map_err(|e| BrokerError::Config(format!("agent {}: {e}", a.id)))?;
            a.behavior
                .sensor(a.measurement)
                .validate()
                .map_err(|e| BrokerError::Config(format!("agent {}: {e}", a.id)))?;
            for s in &a.subscriptions {
                if !topics.contains(s.topic.as_str()) {
                    return bad(format!("agent {} subscribes to unknown topic {}", a.id, s.topic));
                }
                if !(s.window.0 < s.window.1) {
                    return bad(format!("agent {} has an empty window on {}", a.id, s.topic));
                }
            }
        }
        Ok(())
    }
}

/// One trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub event_type: String,
    pub agent: Option<AgentId>,
    pub topic: Option<String>,
    pub payload: Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationTrace {
    pub events: Vec<TraceEvent>,
}

impl SimulationTrace {
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(text: &str) -> Result<Self, BrokerError> {
        let events = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|source| BrokerError::Trace { line: i + 1, source }))
            .collect::<Result<_, _>>()?;
        Ok(SimulationTrace { events })
    }

    pub fn of_type<'a>(&'a self, event_type: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.event_type == event_type)
    }

    /// Cycle at which each agent was permanently revoked.
    pub fn revocations(&self) -> BTreeMap<AgentId, u64> {
        self.of_type("revoke").filter_map(|e| e.agent.clone().map(|a| (a, e.cycle))).collect()
    }
}

/// Acknowledgement of an accepted registration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Registration {
    pub agent: AgentId,
    pub pseudonym: String,
    pub topic: String,
    pub window: (f64, f64),
    pub role: Role,
}

/// An opinion published by a provider for one topic and cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Publication {
    pub pseudonym: String,
    pub opinion: Opinion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub from: String,
    pub to: String,
    pub opinion: Opinion,
}

/// A user's complaint about the opinions received on one topic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Incident {
    pub reporter: String,
    pub topic: String,
    pub cycle: u64,
    /// Reports as seen by the user, keyed by pseudonym.
    pub reports: Vec<ReportedOpinion>,
    pub accused: BTreeSet<String>,
    pub verdict: Option<ClassificationResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UserCheck {
    /// Fewer than two opinions; the user acts on its own data.
    NoCheck,
    /// All opinions consistent; `participants` are the pseudonyms involved.
    Success {
        participants: Vec<String>,
        fused: Opinion,
    },
    Incident(Box<Incident>),
}

/// Outcome of one adjudication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub result: ClassificationResult,
    /// Accused agents found honest.
    pub vindicated: BTreeSet<AgentId>,
    pub revised: BTreeMap<AgentId, f64>,
    pub revoked: BTreeSet<AgentId>,
    /// Set when no revision could be derived and the incident was archived.
    pub archived: bool,
}

/// Broker state: pseudonym resolution, registrations, trust and bans.
#[derive(Debug, Clone)]
pub struct Broker {
    theta: f64,
    same_pair_lambda: f64,
    w_tr: u32,
    ban_policy: BanPolicy,
    discount_by_trust: bool,
    initial_trust_base_rate: f64,
    pseudonym_owner: BTreeMap<String, AgentId>,
    /// Accepted, unexpired registrations by pseudonym.
    active: BTreeMap<String, Registration>,
    sybil_flags: BTreeSet<(AgentId, String)>,
    revoked: BTreeSet<AgentId>,
    suspended: BTreeSet<AgentId>,
    trust: TrustStore,
    pairs_seen: BTreeSet<(AgentId, AgentId)>,
    batches: BTreeMap<AgentId, Vec<bool>>,
    /// Publications kept for adjudication, by (topic, cycle).
    retained: BTreeMap<(String, u64), Vec<Publication>>,
}

impl Broker {
    pub fn new(cfg: &SimConfig) -> Self {
        Broker {
            theta: cfg.theta,
            same_pair_lambda: cfg.same_pair_lambda,
            w_tr: cfg.w_tr,
            ban_policy: cfg.ban_policy,
            discount_by_trust: cfg.discount_by_trust,
            initial_trust_base_rate: cfg.initial_trust_base_rate,
            pseudonym_owner: BTreeMap::new(),
            active: BTreeMap::new(),
            sybil_flags: BTreeSet::new(),
            revoked: BTreeSet::new(),
            suspended: BTreeSet::new(),
            trust: TrustStore::new(),
            pairs_seen: BTreeSet::new(),
            batches: BTreeMap::new(),
            retained: BTreeMap::new(),
        }
    }

    pub fn trust(&self) -> &TrustStore {
        &self.trust
    }

    pub fn is_revoked(&self, agent: &AgentId) -> bool {
        self.revoked.contains(agent)
    }

    pub fn owner(&self, pseudonym: &str) -> Option<&AgentId> {
        self.pseudonym_owner.get(pseudonym)
    }

    pub fn active_registrations(&self) -> impl Iterator<Item = &Registration> {
        self.active.values()
    }

    fn ensure_trust(&mut self, agent: &AgentId) {
        if self.trust.get(agent).is_none() {
            let mut rec = TrustRecord::new(agent.clone());
            rec.trust = BinomialOpinion::vacuous(self.initial_trust_base_rate);
            rec.dependence = self.same_pair_lambda;
            rec.revision_reward = self.w_tr;
            self.trust.insert(rec);
        }
    }

    /// Registers `pseudonym` for `agent` on `topic`. A second active
    /// pseudonym of the same agent on the same topic raises a Sybil flag and
    /// drops every registration of the agent on that topic.
    pub fn register(
        &mut self,
        agent: &AgentId,
        pseudonym: &str,
        topic: &str,
        window: (f64, f64),
        role: Role,
    ) -> Result<Registration, BrokerError> {
        if self.revoked.contains(agent) {
            return Err(BrokerError::RevokedAgent(agent.clone()));
        }
        let key = (agent.clone(), topic.to_string());
        let holds_other =
            self.active.values().any(|r| &r.agent == agent && r.topic == topic && r.pseudonym != pseudonym);
        if self.sybil_flags.contains(&key) || holds_other {
            self.sybil_flags.insert(key);
            self.active.retain(|_, r| !(&r.agent == agent && r.topic == topic));
            self.pseudonym_owner.insert(pseudonym.to_string(), agent.clone());
            return Err(BrokerError::SybilFlag { agent: agent.clone(), topic: topic.to_string() });
        }
        self.pseudonym_owner.insert(pseudonym.to_string(), agent.clone());
        if role != Role::HiddenObserver {
            self.ensure_trust(agent);
        }
        let reg = Registration {
            agent: agent.clone(),
            pseudonym: pseudonym.to_string(),
            topic: topic.to_string(),
            window,
            role,
        };
        self.active.insert(pseudonym.to_string(), reg.clone());
        Ok(reg)
    }

    /// Drops registrations whose window has closed at time `t`.
    pub fn expire(&mut self, t: f64) -> Vec<Registration> {
        let done: Vec<String> = self.active.values().filter(|r| r.window.1 <= t).map(|r| r.pseudonym.clone()).collect();
        done.iter().filter_map(|p| self.active.remove(p)).collect()
    }

    fn live(&self, r: &Registration, t: f64) -> bool {
        r.window.0 <= t && t < r.window.1 && !self.revoked.contains(&r.agent) && !self.suspended.contains(&r.agent)
    }

    /// Active pseudonyms with `role` on `topic` at time `t`.
    pub fn members(&self, topic: &str, role: Role, t: f64) -> Vec<String> {
        self.active
            .values()
            .filter(|r| r.topic == topic && r.role == role && self.live(r, t))
            .map(|r| r.pseudonym.clone())
            .collect()
    }

    /// Delivers every live provider publication to every live subscriber and
    /// retains the publications. Publications of pseudonyms that are not
    /// live providers on the topic are dropped.
    pub fn route(
        &mut self,
        topic: &str,
        cycle: u64,
        t: f64,
        publications: &[Publication],
    ) -> Result<Vec<Delivery>, BrokerError> {
        let providers: BTreeSet<String> = self.members(topic, Role::Provider, t).into_iter().collect();
        let users = self.members(topic, Role::User, t);
        let accepted: Vec<Publication> =
            publications.iter().filter(|p| providers.contains(&p.pseudonym)).cloned().collect();
        self.retained.insert((topic.to_string(), cycle), accepted.clone());
        if accepted.is_empty() || users.is_empty() {
            return Err(BrokerError::NoMatchingWindow { topic: topic.to_string(), time: t });
        }
        let mut out = Vec::with_capacity(accepted.len() * users.len());
        for p in &accepted {
            for u in &users {
                out.push(Delivery { from: p.pseudonym.clone(), to: u.clone(), opinion: p.opinion.clone() });
            }
        }
        Ok(out)
    }

    pub fn retained(&self, topic: &str, cycle: u64) -> &[Publication] {
        self.retained.get(&(topic.to_string(), cycle)).map(Vec::as_slice).unwrap_or(&[])
    }

    fn resolve(&self, pseudonym: &str) -> AgentId {
        self.pseudonym_owner.get(pseudonym).cloned().unwrap_or_else(|| AgentId::new(pseudonym))
    }

    /// Grants a success reward to `agent` for cooperating with `partner`.
    /// Repeated pairs only count their independent share `1 − λ`.
    pub fn reward_cooperation(&mut self, agent: &AgentId, partner: &AgentId) -> Result<f64, BrokerError> {
        let weight =
            if self.pairs_seen.insert((agent.clone(), partner.clone())) { 1.0 } else { 1.0 - self.same_pair_lambda };
        self.ensure_trust(agent);
        let rec = self.trust.entry(agent);
        *rec = reward_success(rec, weight).map_err(|e| BrokerError::Config(e.to_string()))?;
        Ok(weight)
    }

    /// Temporarily suspends, judges with the broker's own detection run,
    /// revises, rewards the vindicated, bans and reinstates.
    pub fn adjudicate(
        &mut self,
        incident: &mut Incident,
        observers: &[ReportedOpinion],
    ) -> Result<(Verdict, Value), BrokerError> {
        let mut reports: BTreeMap<AgentId, ReportedOpinion> = BTreeMap::new();
        for p in self.retained(&incident.topic, incident.cycle).to_vec() {
            let agent = self.resolve(&p.pseudonym);
            reports.insert(
                agent.clone(),
                ReportedOpinion { agent, opinion: p.opinion, context: DiscountContext::identity() },
            );
        }
        for r in &incident.reports {
            let agent = self.resolve(r.agent.as_str());
            reports.entry(agent.clone()).or_insert(ReportedOpinion { agent, ..r.clone() });
        }
        for o in observers {
            reports.entry(o.agent.clone()).or_insert_with(|| o.clone());
        }
        let involved: BTreeSet<AgentId> = reports.keys().filter(|a| self.trust.get(a).is_some()).cloned().collect();
        self.suspended.extend(involved.iter().cloned());
        let reports: Vec<ReportedOpinion> = reports.into_values().collect();

        let snapshot: TrustStore = if self.discount_by_trust {
            let mut s = TrustStore::new();
            for a in &involved {
                if let Some(r) = self.trust.get(a) {
                    s.insert(r.clone());
                }
            }
            s
        } else {
            TrustStore::new()
        };
        let result = detect(&reports, &snapshot, &DetectParams::new(self.theta))?;
        let record = json!({
            "theta": self.theta,
            "reports": reports,
            "trust": snapshot.iter().collect::<Vec<_>>(),
            "result": result,
        });
        incident.verdict = Some(result.clone());

        let accused: BTreeSet<AgentId> = incident.accused.iter().map(|p| self.resolve(p)).collect();
        let vindicated: BTreeSet<AgentId> =
            accused.iter().filter(|a| result.honest.contains(*a) && involved.contains(*a)).cloned().collect();
        let misbehaving: BTreeSet<AgentId> =
            result.misbehaving.iter().filter(|a| involved.contains(*a)).cloned().collect();
        let (revised, archived) = match revise_trust(&result.conflicts, &misbehaving, &mut self.trust) {
            Ok(rev) => (rev.weights, false),
            Err(MisbehaviorError::DegenerateConflict(_)) => (BTreeMap::new(), true),
            Err(e) => return Err(e.into()),
        };
        for a in &vindicated {
            let rec = self.trust.entry(a);
            let w = rec.revision_reward as f64;
            *rec = reward_success(rec, w).map_err(|e| BrokerError::Config(e.to_string()))?;
        }
        let mut revoked = BTreeSet::new();
        for a in &involved {
            let flagged = misbehaving.contains(a);
            let ban = match self.ban_policy {
                BanPolicy::TrustThreshold { threshold } => {
                    flagged && self.trust.projected(a).unwrap_or(1.0) < threshold
                }
                BanPolicy::Batch { batch_size, detections } => {
                    let batch = self.batches.entry(a.clone()).or_default();
                    batch.push(flagged);
                    if batch.len() == batch_size {
                        let hits = batch.iter().filter(|f| **f).count();
                        batch.clear();
                        hits >= detections
                    } else {
                        false
                    }
                }
            };
            if ban {
                self.revoked.insert(a.clone());
                revoked.insert(a.clone());
            }
        }
        for a in &involved {
            self.suspended.remove(a);
        }
        Ok((Verdict { result, vindicated, revised, revoked, archived }, record))
    }
}

/// User-side check: detection without revision over the user's own opinion
/// and the delivered ones.
pub fn user_check_and_report(
    user: &str,
    own: &Opinion,
    deliveries: &[Delivery],
    topic: &str,
    cycle: u64,
    theta: f64,
) -> Result<UserCheck, BrokerError> {
    let mut reports = vec![ReportedOpinion::new(user, own.clone())];
    for d in deliveries.iter().filter(|d| d.to == user) {
        reports.push(ReportedOpinion::new(d.from.as_str(), d.opinion.clone()));
    }
    if reports.len() < 2 {
        return Ok(UserCheck::NoCheck);
    }
    let res = detect(&reports, &TrustStore::new(), &DetectParams::new(theta))?;
    if res.misbehaving.is_empty() {
        let participants = reports.iter().map(|r| r.agent.0.clone()).collect();
        let honest: Vec<Opinion> = reports.iter().map(|r| r.opinion.clone()).collect();
        let fused = crate::opinion::average_fuse(&honest).map_err(MisbehaviorError::from)?;
        Ok(UserCheck::Success { participants, fused })
    } else {
        Ok(UserCheck::Incident(Box::new(Incident {
            reporter: user.to_string(),
            topic: topic.to_string(),
            cycle,
            accused: res.misbehaving.iter().map(|a| a.0.clone()).collect(),
            reports,
            verdict: None,
        })))
    }
}

struct Tracer {
    events: Vec<TraceEvent>,
}

impl Tracer {
    fn push(&mut self, cycle: u64, event_type: &str, agent: Option<&AgentId>, topic: Option<&str>, payload: Value) {
        self.events.push(TraceEvent {
            cycle,
            event_type: event_type.to_string(),
            agent: agent.cloned(),
            topic: topic.map(str::to_string),
            payload,
        });
    }
}

fn trust_payload(r: &TrustRecord) -> Value {
    json!({"b": r.trust.b, "d": r.trust.d, "u": r.trust.u, "p": r.projected()})
}

/// Final state of a simulation besides its trace.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub trace: SimulationTrace,
    pub trust: TrustStore,
    pub profiles: Vec<AgentProfile>,
}

/// Runs `n_cycles` synchronous cycles. Deterministic given `seed`: every
/// agent draws from its own stream of the seed.
pub fn run_cycles(cfg: &SimConfig, n_cycles: u64, seed: u64) -> Result<SimulationOutcome, BrokerError> {
    cfg.validate()?;
    let mut broker = Broker::new(cfg);
    let mut tr = Tracer { events: Vec::new() };
    let mut rngs: Vec<_> = (0..cfg.agents.len() as u64).map(|i| run_rng(seed, i)).collect();
    let mut profiles: Vec<AgentProfile> = cfg
        .agents
        .iter()
        .map(|a| AgentProfile {
            true_id: a.id.clone(),
            role: a.role,
            pseudonyms: BTreeSet::new(),
            measurement_model: a.behavior.sensor(a.measurement),
            behavior: a.behavior,
            revoked: false,
        })
        .collect();
    // (agent index, subscription index) pairs already registered
    let mut registered: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut next_pseudonym = 0usize;

    for cycle in 0..n_cycles {
        let t = cycle as f64 * cfg.cycle_seconds;
        broker.trust.age_all(cfg.aging);

        for reg in broker.expire(t) {
            tr.push(cycle, "expire", Some(&reg.agent), Some(&reg.topic), json!({"pseudonym": reg.pseudonym}));
        }

        for (ai, a) in cfg.agents.iter().enumerate() {
            for (si, s) in a.subscriptions.iter().enumerate() {
                if !(s.window.0 <= t && t < s.window.1) || !registered.insert((ai, si)) {
                    continue;
                }
                for _ in 0..a.behavior.pseudonyms_per_registration() {
                    let pseudonym = format!("p{next_pseudonym:05}");
                    next_pseudonym += 1;
                    profiles[ai].pseudonyms.insert(pseudonym.clone());
                    tr.push(
                        cycle,
                        "register_request",
                        Some(&a.id),
                        Some(&s.topic),
                        json!({"pseudonym": pseudonym, "role": a.role, "window": s.window}),
                    );
                    match broker.register(&a.id, &pseudonym, &s.topic, s.window, a.role) {
                        Ok(_) => {
                            tr.push(cycle, "register", Some(&a.id), Some(&s.topic), json!({"pseudonym": pseudonym}))
                        }
                        Err(BrokerError::SybilFlag { .. }) => {
                            tr.push(cycle, "sybil_flag", Some(&a.id), Some(&s.topic), json!({"pseudonym": pseudonym}))
                        }
                        Err(BrokerError::RevokedAgent(_)) => tr.push(
                            cycle,
                            "register_rejected",
                            Some(&a.id),
                            Some(&s.topic),
                            json!({"pseudonym": pseudonym}),
                        ),
                        Err(e) => return Err(e),
                    }
                }
            }
        }

        for topic in &cfg.topics {
            let live = |role| broker.members(&topic.id, role, t);
            let providers = live(Role::Provider);
            let users = live(Role::User);
            let observers = live(Role::HiddenObserver);
            if providers.is_empty() && users.is_empty() {
                continue;
            }
            let mut measure = |pseudonym: &str| {
                let owner = broker.owner(pseudonym).expect("registered").clone();
                let ai = cfg.agents.iter().position(|a| a.id == owner).expect("configured agent");
                profiles[ai].measurement_model.opinion(&cfg.histogram, &mut rngs[ai])
            };
            let publications: Vec<Publication> =
                providers.iter().map(|p| Publication { pseudonym: p.clone(), opinion: measure(p) }).collect();
            let own: Vec<(String, Opinion)> = users.iter().map(|u| (u.clone(), measure(u))).collect();
            let hidden: Vec<ReportedOpinion> = observers
                .iter()
                .map(|o| {
                    let op = measure(o);
                    ReportedOpinion::new(broker.resolve(o), op)
                })
                .collect();

            let provider_agents: Vec<AgentId> = providers.iter().map(|p| broker.resolve(p)).collect();
            let deliveries = match broker.route(&topic.id, cycle, t, &publications) {
                Ok(d) => d,
                Err(BrokerError::NoMatchingWindow { .. }) => {
                    tr.push(
                        cycle,
                        "no_delivery",
                        None,
                        Some(&topic.id),
                        json!({"providers": providers.len(), "users": users.len()}),
                    );
                    continue;
                }
                Err(e) => return Err(e),
            };
            tr.push(
                cycle,
                "route",
                None,
                Some(&topic.id),
                json!({"providers": providers, "provider_agents": provider_agents, "subscribers": users, "deliveries": deliveries.len()}),
            );

            let mut incidents = Vec::new();
            let mut successes = Vec::new();
            for (user, op) in &own {
                match user_check_and_report(user, op, &deliveries, &topic.id, cycle, cfg.theta)? {
                    UserCheck::NoCheck => {
                        tr.push(cycle, "no_check", Some(&broker.resolve(user)), Some(&topic.id), Value::Null)
                    }
                    UserCheck::Success { participants, .. } => {
                        tr.push(
                            cycle,
                            "success",
                            Some(&broker.resolve(user)),
                            Some(&topic.id),
                            json!({"participants": participants}),
                        );
                        successes.push((user.clone(), participants));
                    }
                    UserCheck::Incident(inc) => {
                        tr.push(
                            cycle,
                            "incident",
                            Some(&broker.resolve(user)),
                            Some(&topic.id),
                            json!({"accused": inc.accused}),
                        );
                        incidents.push(*inc);
                    }
                }
            }

            if incidents.is_empty() {
                for (user, participants) in successes {
                    let user_id = broker.resolve(&user);
                    for p in participants {
                        let agent = broker.resolve(&p);
                        let weight = broker.reward_cooperation(&agent, &user_id)?;
                        tr.push(
                            cycle,
                            "reward",
                            Some(&agent),
                            Some(&topic.id),
                            json!({"weight": weight, "partner": user_id}),
                        );
                    }
                }
                continue;
            }

            // one adjudication per topic and cycle, merging all complaints
            let mut merged = incidents.remove(0);
            for other in incidents {
                merged.accused.extend(other.accused);
                for r in other.reports {
                    if !merged.reports.iter().any(|m| m.agent == r.agent) {
                        merged.reports.push(r);
                    }
                }
            }
            let (verdict, record) = broker.adjudicate(&mut merged, &hidden)?;
            tr.push(cycle, "verdict", Some(&broker.resolve(&merged.reporter)), Some(&topic.id), record);
            if verdict.archived {
                tr.push(cycle, "archive", None, Some(&topic.id), json!({"reason": "degenerate_conflict"}));
            }
            for (a, rw) in &verdict.revised {
                let rec = broker.trust.get(a).expect("revised agents have records");
                tr.push(cycle, "revise", Some(a), Some(&topic.id), json!({"rw": rw, "trust": trust_payload(rec)}));
            }
            for a in &verdict.vindicated {
                tr.push(cycle, "vindicate", Some(a), Some(&topic.id), json!({"reward": cfg.w_tr}));
            }
            for a in &verdict.revoked {
                if let Some(p) = profiles.iter_mut().find(|p| &p.true_id == a) {
                    p.revoked = true;
                }
                tr.push(cycle, "revoke", Some(a), Some(&topic.id), Value::Null);
            }
        }

        for rec in broker.trust.iter() {
            tr.push(cycle, "trust", Some(&rec.agent_id), None, trust_payload(rec));
        }
    }
    Ok(SimulationOutcome { trace: SimulationTrace { events: tr.events }, trust: broker.trust, profiles })
}

/// Result of re-running every recorded verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplaySummary {
    pub verified: usize,
    pub mismatches: Vec<u64>,
}

/// Recomputes each verdict from its recorded reports, trust snapshot and
/// threshold and compares it with the recorded result.
pub fn replay_verdicts(trace: &SimulationTrace) -> Result<ReplaySummary, BrokerError> {
    let mut summary = ReplaySummary { verified: 0, mismatches: Vec::new() };
    for e in trace.of_type("verdict") {
        let parse = |v: &Value| -> Result<_, BrokerError> { Ok(v.clone()) };
        let field = |k: &str| {
            e.payload.get(k).ok_or_else(|| BrokerError::Config(format!("verdict at cycle {} lacks {k}", e.cycle)))
        };
        let theta = field("theta")?.as_f64().ok_or_else(|| BrokerError::Config("theta is not a number".into()))?;
        let reports: Vec<ReportedOpinion> =
            serde_json::from_value(parse(field("reports")?)?).map_err(|e| BrokerError::Config(e.to_string()))?;
        let records: Vec<TrustRecord> =
            serde_json::from_value(parse(field("trust")?)?).map_err(|e| BrokerError::Config(e.to_string()))?;
        let recorded: ClassificationResult =
            serde_json::from_value(parse(field("result")?)?).map_err(|e| BrokerError::Config(e.to_string()))?;
        let mut store = TrustStore::new();
        for r in records {
            store.insert(r);
        }
        let again = detect(&reports, &store, &DetectParams::new(theta))?;
        if again == recorded {
            summary.verified += 1;
        } else {
            summary.mismatches.push(e.cycle);
        }
    }
    Ok(summary)
}

/// Parameters of [`synthetic_config`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub agents: usize,
    pub topics: usize,
    pub cycles: u64,
    pub sybil_fraction: f64,
    pub faulty_fraction: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams { agents: 12, topics: 3, cycles: 40, sybil_fraction: 0.2, faulty_fraction: 0.1 }
    }
}

/// A random population with staggered subscription windows, used for
/// property runs and demos.
pub fn synthetic_config(seed: u64, params: SyntheticParams) -> SimConfig {
    let mut rng = run_rng(seed, u64::MAX);
    let horizon = params.cycles as f64;
    let topics: Vec<Topic> =
        (0..params.topics).map(|i| Topic { id: format!("seg{i}"), window: (0.0, horizon) }).collect();
    let model = MeasurementModel::calibrated(0.25, 0.75, 50);
    let agents = (0..params.agents)
        .map(|i| {
            let role = match i % 4 {
                0 => Role::User,
                3 if i % 8 == 3 => Role::HiddenObserver,
                _ => Role::Provider,
            };
            let behavior = if rng.random::<f64>() < params.sybil_fraction {
                Behavior::Malicious { strategy: Strategy::Sybil { extra_pseudonyms: rng.random_range(1..=2) } }
            } else if rng.random::<f64>() < params.faulty_fraction {
                Behavior::Faulty { est_mean: 1.0, est_std: 0.75 }
            } else {
                Behavior::Honest
            };
            let subscriptions = (0..rng.random_range(1..=2))
                .map(|_| {
                    let topic = topics[rng.random_range(0..topics.len())].id.clone();
                    let start = rng.random_range(0..params.cycles.max(1)) as f64;
                    let len = rng.random_range(1..=params.cycles.max(1)) as f64;
                    Subscription { topic, window: (start, (start + len).min(horizon.max(start + 1.0))) }
                })
                .collect();
            AgentConfig { id: AgentId::new(format!("agent{i:02}")), role, subscriptions, measurement: model, behavior }
        })
        .collect();
    SimConfig { seed, cycles: params.cycles, topics, agents, ..SimConfig::default() }
}
