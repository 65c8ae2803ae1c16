//! The four-agent intersection: vehicles A and B, occluded vehicle C and a
//! road-side unit all estimate the position error of one vehicle.
//!
//! Scenario 1 has only honest agents, scenario 2 a miscalibrated RSU and
//! scenario 3 a collaborative attack by A and B. In scenario 3 the broker
//! breaks the 2-vs-2 tie with a second topic: C and the RSU also report on
//! C's own position, which the attackers do not observe.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::misbehavior::{degree_of_conflict, detect, ClassificationResult, DetectParams, ReportedOpinion};
use crate::trust::{AgentId, TrustStore};

use super::measurement::{recalibrate, HistogramSpec, MeasurementModel};
use super::{run_rng, ScenarioError};

pub const AGENT_A: &str = "A";
pub const AGENT_B: &str = "B";
pub const AGENT_C: &str = "C";
pub const AGENT_RSU: &str = "RSU";
pub const HIDDEN_OBSERVER: &str = "HO";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    AllHonest,
    FaultyRsu,
    CollaborativeAttack,
}

impl Scenario {
    pub fn number(self) -> u8 {
        match self {
            Scenario::AllHonest => 1,
            Scenario::FaultyRsu => 2,
            Scenario::CollaborativeAttack => 3,
        }
    }
}

impl TryFrom<u8> for Scenario {
    type Error = ScenarioError;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            1 => Ok(Scenario::AllHonest),
            2 => Ok(Scenario::FaultyRsu),
            3 => Ok(Scenario::CollaborativeAttack),
            _ => Err(ScenarioError::Config(format!("scenario must be 1, 2 or 3, got {n}"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// How the broker resolves the collaborative attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// No extra information; plain pipeline.
    None,
    /// C and the RSU report on C's position; agreement there corroborates them.
    XcTopic { samples_c: usize, samples_rsu: usize },
    /// An honest hidden observer's opinion joins the adjudication.
    HiddenObserver { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntersectionConfig {
    pub true_mean: f64,
    pub true_std: f64,
    pub samples_a: usize,
    pub samples_b: usize,
    pub samples_c: usize,
    pub samples_rsu: usize,
    pub histogram: HistogramSpec,
    /// `(μ̂, σ̂)` used by the attackers in scenario 3.
    pub attacker_estimate: (f64, f64),
    /// `(μ̂, σ̂)` of the miscalibrated RSU in scenario 2.
    pub rsu_fault: (f64, f64),
    pub tie_break: TieBreak,
}

impl Default for IntersectionConfig {
    fn default() -> Self {
        IntersectionConfig {
            true_mean: 0.25,
            true_std: 0.75,
            samples_a: 50,
            samples_b: 50,
            samples_c: 10,
            samples_rsu: 50,
            histogram: HistogramSpec::default(),
            attacker_estimate: (1.0, 0.75),
            rsu_fault: (1.0, 0.75),
            tie_break: TieBreak::XcTopic { samples_c: 10, samples_rsu: 50 },
        }
    }
}

impl IntersectionConfig {
    pub fn with_rsu_fault(mut self, est_mean: f64, est_std: f64) -> Self {
        self.rsu_fault = (est_mean, est_std);
        self
    }

    fn honest(&self, samples: usize) -> MeasurementModel {
        MeasurementModel::calibrated(self.true_mean, self.true_std, samples)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.honest(1).validate()?;
        for (m, s) in [self.attacker_estimate, self.rsu_fault] {
            self.honest(1).with_estimate(m, s).validate()?;
        }
        for n in [self.samples_a, self.samples_b, self.samples_c, self.samples_rsu] {
            self.honest(n).validate()?;
        }
        Ok(())
    }

    /// Sensor models of A, B, C and the RSU under `scenario`.
    pub fn models(&self, scenario: Scenario) -> [(AgentId, MeasurementModel); 4] {
        let (am, asd) = self.attacker_estimate;
        let (rm, rsd) = self.rsu_fault;
        let mut a = self.honest(self.samples_a);
        let mut b = self.honest(self.samples_b);
        let mut rsu = self.honest(self.samples_rsu);
        match scenario {
            Scenario::AllHonest => {}
            Scenario::FaultyRsu => rsu = rsu.with_estimate(rm, rsd),
            Scenario::CollaborativeAttack => {
                a = a.with_estimate(am, asd);
                b = b.with_estimate(am, asd);
            }
        }
        [
            (AGENT_A.into(), a),
            (AGENT_B.into(), b),
            (AGENT_C.into(), self.honest(self.samples_c)),
            (AGENT_RSU.into(), rsu),
        ]
    }
}

/// Everything drawn for one Monte-Carlo run; independent of θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSample {
    pub scenario: Scenario,
    pub reports: Vec<ReportedOpinion>,
    /// C's and the RSU's opinions on C's position (scenario 3, x_c tie-break).
    pub xc: Vec<ReportedOpinion>,
}

/// Draws the opinions of one run.
pub fn sample_run<R: Rng + ?Sized>(scenario: Scenario, cfg: &IntersectionConfig, rng: &mut R) -> RunSample {
    let spec = &cfg.histogram;
    let mut reports: Vec<ReportedOpinion> =
        cfg.models(scenario).into_iter().map(|(id, m)| ReportedOpinion::new(id, m.opinion(spec, rng))).collect();
    let mut xc = Vec::new();
    if scenario == Scenario::CollaborativeAttack {
        match cfg.tie_break {
            TieBreak::None => {}
            TieBreak::XcTopic { samples_c, samples_rsu } => {
                xc.push(ReportedOpinion::new(AGENT_C, cfg.honest(samples_c).opinion(spec, rng)));
                xc.push(ReportedOpinion::new(AGENT_RSU, cfg.honest(samples_rsu).opinion(spec, rng)));
            }
            TieBreak::HiddenObserver { samples } => {
                reports.push(ReportedOpinion::new(HIDDEN_OBSERVER, cfg.honest(samples).opinion(spec, rng)));
            }
        }
    }
    RunSample { scenario, reports, xc }
}

/// Agents whose opinions on the second topic agree within θ.
pub fn corroborated(xc: &[ReportedOpinion], theta: f64) -> Vec<AgentId> {
    match xc {
        [c, r] if degree_of_conflict(&c.opinion, &r.opinion).is_ok_and(|dc| dc <= theta) => {
            vec![c.agent.clone(), r.agent.clone()]
        }
        _ => Vec::new(),
    }
}

/// Broker verdict for one run at threshold `theta`.
pub fn adjudicate_run(sample: &RunSample, theta: f64) -> Result<ClassificationResult, ScenarioError> {
    let params = DetectParams::new(theta).with_corroborated(corroborated(&sample.xc, theta));
    Ok(detect(&sample.reports, &TrustStore::new(), &params)?)
}

/// Per-run indicators derived from a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOutcome {
    pub both_attackers: bool,
    pub any_attacker: bool,
    pub wrong_accusation: bool,
    pub all_honest: bool,
    pub rsu_flagged: bool,
    /// Fraction of the agents that behave correctly which were flagged.
    pub honest_flag_rate: f64,
    /// Recalibrated `(μ̂, σ̂)` of a flagged RSU in scenario 2.
    pub recalibrated: Option<(f64, f64)>,
}

pub fn outcome(
    sample: &RunSample,
    result: &ClassificationResult,
    cfg: &IntersectionConfig,
) -> Result<RunOutcome, ScenarioError> {
    let flagged = |id: &str| result.misbehaving.contains(&AgentId::from(id));
    let bad: &[&str] = match sample.scenario {
        Scenario::AllHonest => &[],
        Scenario::FaultyRsu => &[AGENT_RSU],
        Scenario::CollaborativeAttack => &[AGENT_A, AGENT_B],
    };
    let good: Vec<&AgentId> = sample.reports.iter().map(|r| &r.agent).filter(|a| !bad.contains(&a.as_str())).collect();
    let good_flagged = good.iter().filter(|a| result.misbehaving.contains(a)).count();
    let attackers = (flagged(AGENT_A), flagged(AGENT_B));
    let any_attacker = sample.scenario == Scenario::CollaborativeAttack && (attackers.0 || attackers.1);
    let rsu_flagged = flagged(AGENT_RSU);
    let recalibrated = if sample.scenario == Scenario::FaultyRsu && rsu_flagged {
        let rsu = sample.reports.iter().find(|r| r.agent.as_str() == AGENT_RSU).expect("RSU reports");
        let rc = recalibrate(&rsu.opinion, &result.reference, &cfg.histogram)?;
        Some(rc.apply(cfg.rsu_fault.0, cfg.rsu_fault.1))
    } else {
        None
    };
    Ok(RunOutcome {
        both_attackers: sample.scenario == Scenario::CollaborativeAttack && attackers.0 && attackers.1,
        any_attacker,
        wrong_accusation: good_flagged > 0 && !any_attacker,
        all_honest: result.misbehaving.is_empty(),
        rsu_flagged,
        honest_flag_rate: if good.is_empty() { 0.0 } else { good_flagged as f64 / good.len() as f64 },
        recalibrated,
    })
}

/// Rates aggregated over the runs of one (scenario, θ) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionStats {
    pub scenario: Scenario,
    pub theta: f64,
    pub runs: usize,
    pub seed: u64,
    /// Both attackers flagged (scenario 3).
    pub p_detected: f64,
    /// At least one attacker flagged (scenario 3).
    pub p_at_least_one: f64,
    /// A correctly behaving agent flagged while no attacker was.
    pub p_wrong_accusation: f64,
    /// Nobody flagged.
    pub p_all_honest: f64,
    /// RSU flagged (true positive rate in scenario 2).
    pub p_rsu_flagged: f64,
    /// Mean fraction of correctly behaving agents flagged.
    pub false_positive_rate: f64,
    /// Mean recalibrated `(μ̂, σ̂)` over runs that flagged the RSU.
    pub recalibrated_mean: Option<(f64, f64)>,
}

fn aggregate(scenario: Scenario, theta: f64, seed: u64, outcomes: &[RunOutcome]) -> IntersectionStats {
    let n = outcomes.len() as f64;
    let rate = |f: fn(&RunOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
    let recal: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.recalibrated).collect();
    let recalibrated_mean = (!recal.is_empty()).then(|| {
        let k = recal.len() as f64;
        (recal.iter().map(|r| r.0).sum::<f64>() / k, recal.iter().map(|r| r.1).sum::<f64>() / k)
    });
    IntersectionStats {
        scenario,
        theta,
        runs: outcomes.len(),
        seed,
        p_detected: rate(|o| o.both_attackers),
        p_at_least_one: rate(|o| o.any_attacker),
        p_wrong_accusation: rate(|o| o.wrong_accusation),
        p_all_honest: rate(|o| o.all_honest),
        p_rsu_flagged: rate(|o| o.rsu_flagged),
        false_positive_rate: outcomes.iter().map(|o| o.honest_flag_rate).sum::<f64>() / n,
        recalibrated_mean,
    }
}

/// Runs every θ of `thetas` on the same sampled runs (common random numbers).
/// Returns one stats row per θ, in input order.
pub fn run_intersection_grid(
    scenario: Scenario,
    thetas: &[f64],
    runs: usize,
    seed: u64,
    cfg: &IntersectionConfig,
) -> Result<Vec<IntersectionStats>, ScenarioError> {
    if runs == 0 {
        return Err(ScenarioError::Config("runs must be at least 1".into()));
    }
    cfg.validate()?;
    // per run: one outcome per theta
    let per_run: Vec<Vec<RunOutcome>> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(seed, i);
            let sample = sample_run(scenario, cfg, &mut rng);
            thetas
                .iter()
                .map(|&t| {
                    let res = adjudicate_run(&sample, t)?;
                    outcome(&sample, &res, cfg)
                })
                .collect::<Result<Vec<_>, ScenarioError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(thetas
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let column: Vec<RunOutcome> = per_run.iter().map(|r| r[k]).collect();
            aggregate(scenario, t, seed, &column)
        })
        .collect())
}

/// Aggregated rates of one scenario at one threshold.
pub fn run_intersection(
    scenario: Scenario,
    theta: f64,
    runs: usize,
    seed: u64,
    cfg: &IntersectionConfig,
) -> Result<IntersectionStats, ScenarioError> {
    Ok(run_intersection_grid(scenario, &[theta], runs, seed, cfg)?.remove(0))
}

/// One row of the threshold sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub p_detected: f64,
    pub p_at_least_one: f64,
    pub p_wrong_accusation: f64,
    pub p_all_honest: f64,
}

/// Scenario-3 detection rates and the scenario-1 all-honest rate per θ.
pub fn threshold_sweep(
    thetas: &[f64],
    runs: usize,
    seed: u64,
    cfg: &IntersectionConfig,
) -> Result<Vec<SweepRow>, ScenarioError> {
    let attack = run_intersection_grid(Scenario::CollaborativeAttack, thetas, runs, seed, cfg)?;
    let honest = run_intersection_grid(Scenario::AllHonest, thetas, runs, seed, cfg)?;
    Ok(attack
        .iter()
        .zip(&honest)
        .map(|(a, h)| SweepRow {
            theta: a.theta,
            p_detected: a.p_detected,
            p_at_least_one: a.p_at_least_one,
            p_wrong_accusation: a.p_wrong_accusation,
            p_all_honest: h.p_all_honest,
        })
        .collect())
}

/// One point of a ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub mu_est: f64,
    pub sigma_est: f64,
    pub theta: f64,
    pub fp: f64,
    pub tp: f64,
}

/// Scenario-2 false/true positive rates for each RSU fault and θ. Rows are
/// ordered by fault (input order), then θ.
pub fn roc_sweep(
    faults: &[(f64, f64)],
    thetas: &[f64],
    runs: usize,
    seed: u64,
    cfg: &IntersectionConfig,
) -> Result<Vec<RocRow>, ScenarioError> {
    let mut rows = Vec::with_capacity(faults.len() * thetas.len());
    for &(mu_est, sigma_est) in faults {
        let c = cfg.clone().with_rsu_fault(mu_est, sigma_est);
        for s in run_intersection_grid(Scenario::FaultyRsu, thetas, runs, seed, &c)? {
            rows.push(RocRow { mu_est, sigma_est, theta: s.theta, fp: s.false_positive_rate, tp: s.p_rsu_flagged });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_numbers_round_trip() {
        for n in 1..=3u8 {
            assert_eq!(Scenario::try_from(n).unwrap().number(), n);
        }
        assert!(Scenario::try_from(4).is_err());
    }

    #[test]
    fn sample_shapes() {
        let cfg = IntersectionConfig::default();
        let mut rng = run_rng(1, 0);
        let s = sample_run(Scenario::CollaborativeAttack, &cfg, &mut rng);
        assert_eq!(s.reports.len(), 4);
        assert_eq!(s.xc.len(), 2);
        let u: Vec<f64> = s.reports.iter().map(|r| r.opinion.uncertainty()).collect();
        assert_eq!(u, vec![5.0 / 55.0, 5.0 / 55.0, 5.0 / 15.0, 5.0 / 55.0]);
        let s = sample_run(Scenario::AllHonest, &cfg, &mut rng);
        assert!(s.xc.is_empty());
        let ho = IntersectionConfig { tie_break: TieBreak::HiddenObserver { samples: 50 }, ..cfg };
        let s = sample_run(Scenario::CollaborativeAttack, &ho, &mut rng);
        assert_eq!(s.reports.len(), 5);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = IntersectionConfig::default();
        let a = run_intersection(Scenario::CollaborativeAttack, 0.15, 50, 9, &cfg).unwrap();
        let b = run_intersection(Scenario::CollaborativeAttack, 0.15, 50, 9, &cfg).unwrap();
        assert_eq!(a, b);
        for p in [a.p_detected, a.p_at_least_one, a.p_wrong_accusation, a.p_all_honest] {
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(a.p_detected <= a.p_at_least_one);
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(run_intersection(Scenario::AllHonest, 0.15, 0, 1, &IntersectionConfig::default()).is_err());
    }
}
