//! Batch elimination arithmetic and a synthetic large population standing in
//! for a city-scale traffic simulation.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::misbehavior::{detect, DetectParams, ReportedOpinion};
use crate::trust::{AgentId, TrustStore};

use super::measurement::{histogram_opinion, HistogramSpec};
use super::{run_rng, ScenarioError};

/// Probabilities that an agent is eliminated within `n` batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    /// A misbehaving agent is eliminated.
    pub p_dm: f64,
    /// A correctly behaving agent is wrongly eliminated.
    pub p_wb: f64,
}

fn batch_elimination(p: f64, batch_size: u32, n_batches: u32) -> f64 {
    1.0 - (1.0 - p.powi(batch_size as i32)).powi(n_batches as i32)
}

/// Trust is depleted when every report of a batch is flagged:
/// `p = 1 − (1 − p_report^batch)^n`.
pub fn elimination_model(p_tp: f64, p_fp: f64, batch_size: u32, n_batches: u32) -> Result<Elimination, ScenarioError> {
    for (name, p) in [("p_tp", p_tp), ("p_fp", p_fp)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(ScenarioError::Config(format!("{name} = {p} is outside [0, 1]")));
        }
    }
    Ok(Elimination {
        p_dm: batch_elimination(p_tp, batch_size, n_batches),
        p_wb: batch_elimination(p_fp, batch_size, n_batches),
    })
}

/// Fraction of `trials` simulated agents that get eliminated when each report
/// is flagged independently with probability `p`.
pub fn elimination_monte_carlo<R: Rng + ?Sized>(
    p: f64,
    batch_size: u32,
    n_batches: u32,
    trials: usize,
    rng: &mut R,
) -> f64 {
    let eliminated =
        (0..trials).filter(|_| (0..n_batches).any(|_| (0..batch_size).all(|_| rng.random::<f64>() < p))).count();
    eliminated as f64 / trials as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LargeScaleConfig {
    pub population: usize,
    pub misbehaving_fraction: f64,
    /// Agents sharing one topic per round.
    pub group_size: usize,
    pub samples: usize,
    /// Per-datum corruption probability of misbehaving agents (grid axis).
    pub error_rates: Vec<f64>,
    /// Per-datum corruption probability of correctly behaving agents.
    pub honest_error_rate: f64,
    /// Shift of a corrupted datum, in units of the true standard deviation.
    pub shift_sigma: f64,
    pub thetas: Vec<f64>,
    /// Minimum number of agent reports evaluated per grid cell.
    pub reports_per_cell: usize,
    pub histogram: HistogramSpec,
}

impl Default for LargeScaleConfig {
    fn default() -> Self {
        LargeScaleConfig {
            population: 1000,
            misbehaving_fraction: 0.1,
            group_size: 8,
            samples: 50,
            error_rates: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            honest_error_rate: 0.0,
            shift_sigma: 1.0,
            thetas: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
            reports_per_cell: 10_000,
            histogram: HistogramSpec::default(),
        }
    }
}

impl LargeScaleConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Config(m));
        if self.group_size < 2 || self.population < self.group_size {
            return bad(format!("group_size {} must be in [2, population {}]", self.group_size, self.population));
        }
        if !(0.0..=1.0).contains(&self.misbehaving_fraction) {
            return bad(format!("misbehaving_fraction {} outside [0, 1]", self.misbehaving_fraction));
        }
        if self.samples == 0 || self.reports_per_cell == 0 {
            return bad("samples and reports_per_cell must be positive".into());
        }
        for e in self.error_rates.iter().chain([&self.honest_error_rate]) {
            if !(0.0..=1.0).contains(e) {
                return bad(format!("error rate {e} outside [0, 1]"));
            }
        }
        for t in &self.thetas {
            if !(0.0..=1.0).contains(t) {
                return bad(format!("theta {t} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Detection statistics of one (error rate, θ) cell. `p_tp` is `None`
/// without misbehaving reports, `p_fp` without correct ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub error_rate: f64,
    pub theta: f64,
    pub p_tp: Option<f64>,
    pub p_fp: Option<f64>,
}

/// Raw draws of one agent in one round, shared by every grid cell.
struct AgentDraw {
    misbehaving: bool,
    /// Standard normal noise per datum.
    noise: Vec<f64>,
    /// Uniform per datum; the datum is corrupted when below the error rate.
    corrupt: Vec<f64>,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    tp: usize,
    pos: usize,
    fp: usize,
    neg: usize,
}

/// Each round shuffles the population into topics of `group_size`; every
/// agent standardizes `samples` measurements with correct estimates, so only
/// corrupted data (shifted by `shift_sigma`) separates it from the truth.
/// All cells reuse the same draws.
pub fn large_scale_synthetic(cfg: &LargeScaleConfig, seed: u64) -> Result<Vec<ScaleRow>, ScenarioError> {
    cfg.validate()?;
    let per_round = cfg.population - cfg.population % cfg.group_size;
    let rounds = cfg.reports_per_cell.div_ceil(per_round);
    let n_bad = (cfg.misbehaving_fraction * cfg.population as f64).round() as usize;
    let cells = cfg.error_rates.len() * cfg.thetas.len();

    let per_round_counts: Vec<Vec<Counts>> = (0..rounds as u64)
        .into_par_iter()
        .map(|round| {
            let mut rng = run_rng(seed, round);
            let mut ids: Vec<usize> = (0..cfg.population).collect();
            ids.shuffle(&mut rng);
            let draws: Vec<AgentDraw> = ids[..per_round]
                .iter()
                .map(|&id| AgentDraw {
                    misbehaving: id < n_bad,
                    noise: (0..cfg.samples).map(|_| StandardNormal.sample(&mut rng)).collect(),
                    corrupt: (0..cfg.samples).map(|_| rng.random::<f64>()).collect(),
                })
                .collect();
            let mut counts = vec![Counts::default(); cells];
            for (ei, &e) in cfg.error_rates.iter().enumerate() {
                let opinions: Vec<_> = draws
                    .iter()
                    .map(|d| {
                        let rate = if d.misbehaving { e } else { cfg.honest_error_rate };
                        let z: Vec<f64> = d
                            .noise
                            .iter()
                            .zip(&d.corrupt)
                            .map(|(n, u)| if *u < rate { n + cfg.shift_sigma } else { *n })
                            .collect();
                        histogram_opinion(&z, &cfg.histogram)
                    })
                    .collect();
                for (g, group) in opinions.chunks(cfg.group_size).enumerate() {
                    let members = &draws[g * cfg.group_size..(g + 1) * cfg.group_size];
                    let reports: Vec<ReportedOpinion> = group
                        .iter()
                        .enumerate()
                        .map(|(k, op)| ReportedOpinion::new(AgentId::new(k.to_string()), op.clone()))
                        .collect();
                    for (ti, &theta) in cfg.thetas.iter().enumerate() {
                        let res = detect(&reports, &TrustStore::new(), &DetectParams::new(theta))?;
                        let c = &mut counts[ei * cfg.thetas.len() + ti];
                        for (k, d) in members.iter().enumerate() {
                            let flagged = res.misbehaving.contains(&reports[k].agent);
                            if d.misbehaving {
                                c.pos += 1;
                                c.tp += flagged as usize;
                            } else {
                                c.neg += 1;
                                c.fp += flagged as usize;
                            }
                        }
                    }
                }
            }
            Ok(counts)
        })
        .collect::<Result<_, ScenarioError>>()?;

    let mut total = vec![Counts::default(); cells];
    for round in &per_round_counts {
        for (t, c) in total.iter_mut().zip(round) {
            t.tp += c.tp;
            t.pos += c.pos;
            t.fp += c.fp;
            t.neg += c.neg;
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let mut rows = Vec::with_capacity(cells);
    for (ei, &e) in cfg.error_rates.iter().enumerate() {
        for (ti, &theta) in cfg.thetas.iter().enumerate() {
            let c = total[ei * cfg.thetas.len() + ti];
            rows.push(ScaleRow { error_rate: e, theta, p_tp: ratio(c.tp, c.pos), p_fp: ratio(c.fp, c.neg) });
        }
    }
    Ok(rows)
}
