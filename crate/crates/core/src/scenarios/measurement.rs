//! Gaussian position measurements turned into histogram opinions.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::opinion::{Domain, EvidenceRecord, Opinion, OpinionError};

use super::ScenarioError;

/// Measurement noise of one agent: the true error distribution and the
/// parameters the agent believes in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub true_mean: f64,
    pub true_std: f64,
    pub est_mean: f64,
    pub est_std: f64,
    pub samples: usize,
}

impl MeasurementModel {
    /// A calibrated sensor: estimates equal the true parameters.
    pub fn calibrated(mean: f64, std: f64, samples: usize) -> Self {
        MeasurementModel { true_mean: mean, true_std: std, est_mean: mean, est_std: std, samples }
    }

    pub fn with_estimate(self, est_mean: f64, est_std: f64) -> Self {
        MeasurementModel { est_mean, est_std, ..self }
    }

    pub fn with_samples(self, samples: usize) -> Self {
        MeasurementModel { samples, ..self }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.true_std > 0.0 && self.est_std > 0.0) {
            return Err(ScenarioError::Config(format!(
                "standard deviations must be positive (true {}, estimated {})",
                self.true_std, self.est_std
            )));
        }
        if self.samples == 0 {
            return Err(ScenarioError::Config("sample count must be at least 1".into()));
        }
        Ok(())
    }

    /// Draws `samples` raw measurement errors.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(self.true_mean, self.true_std).expect("validated std");
        (0..self.samples).map(|_| normal.sample(rng)).collect()
    }

    /// Samples, standardizes with the agent's own estimates and bins them.
    pub fn opinion<R: Rng + ?Sized>(&self, spec: &HistogramSpec, rng: &mut R) -> Opinion {
        histogram_opinion(&z_transform(&self.sample(rng), self.est_mean, self.est_std), spec)
    }
}

/// `Z = (X − μ̂) / σ̂` elementwise.
pub fn z_transform(samples: &[f64], est_mean: f64, est_std: f64) -> Vec<f64> {
    samples.iter().map(|x| (x - est_mean) / est_std).collect()
}

/// Equal-width bins over a standardized range; outliers go to the edge bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "HistogramRepr")]
pub struct HistogramSpec {
    pub bin_count: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    #[serde(skip)]
    domain: Option<Domain>,
}

#[derive(Deserialize)]
struct HistogramRepr {
    bin_count: usize,
    z_lo: f64,
    z_hi: f64,
}

impl TryFrom<HistogramRepr> for HistogramSpec {
    type Error = ScenarioError;

    fn try_from(r: HistogramRepr) -> Result<Self, Self::Error> {
        HistogramSpec::new(r.bin_count, r.z_lo, r.z_hi)
    }
}

impl PartialEq for HistogramSpec {
    fn eq(&self, other: &Self) -> bool {
        self.bin_count == other.bin_count && self.z_lo == other.z_lo && self.z_hi == other.z_hi
    }
}

impl Default for HistogramSpec {
    /// Five bins over `[-5, 5]`.
    fn default() -> Self {
        HistogramSpec::new(5, -5.0, 5.0).expect("valid default")
    }
}

impl HistogramSpec {
    pub fn new(bin_count: usize, z_lo: f64, z_hi: f64) -> Result<Self, ScenarioError> {
        if bin_count < 2 {
            return Err(ScenarioError::Config(format!("bin_count must be at least 2, got {bin_count}")));
        }
        if !(z_lo < z_hi) {
            return Err(ScenarioError::Config(format!("histogram range [{z_lo}, {z_hi}] is empty")));
        }
        let domain = Domain::indexed(bin_count).map_err(|e| ScenarioError::Config(e.to_string()))?;
        Ok(HistogramSpec { bin_count, z_lo, z_hi, domain: Some(domain) })
    }

    /// Shared domain of all opinions built from this spec.
    pub fn domain(&self) -> Domain {
        match &self.domain {
            Some(d) => d.clone(),
            None => Domain::indexed(self.bin_count).expect("bin_count >= 2"),
        }
    }

    pub fn bin_width(&self) -> f64 {
        (self.z_hi - self.z_lo) / self.bin_count as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.bin_count).map(|i| self.z_lo + w * (i as f64 + 0.5)).collect()
    }

    pub fn bin_of(&self, z: f64) -> usize {
        let idx = ((z - self.z_lo) / self.bin_width()).floor();
        if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.bin_count - 1)
        }
    }

    pub fn counts(&self, z_samples: &[f64]) -> Vec<f64> {
        let mut counts = vec![0.0; self.bin_count];
        for z in z_samples {
            counts[self.bin_of(*z)] += 1.0;
        }
        counts
    }
}

/// Bins the standardized samples and maps the counts to an opinion with a
/// uniform base rate; `u = W / (W + N)`.
pub fn histogram_opinion(z_samples: &[f64], spec: &HistogramSpec) -> Opinion {
    let domain = spec.domain();
    let base_rate = domain.uniform_base_rate();
    EvidenceRecord::new(domain, spec.counts(z_samples), base_rate).expect("counts are non-negative").to_opinion()
}

/// Offset and spread correction derived from a flagged opinion and the
/// reference, in standardized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recalibration {
    /// Mean of the wrong histogram minus mean of the reference histogram.
    pub offset: f64,
    /// Standard deviation of the wrong histogram over that of the reference.
    pub spread_ratio: f64,
}

impl Recalibration {
    /// New `(μ̂, σ̂)` in meters for a sensor that used `(est_mean, est_std)`.
    pub fn apply(&self, est_mean: f64, est_std: f64) -> (f64, f64) {
        (est_mean + est_std * self.offset, est_std * self.spread_ratio)
    }
}

fn moments(p: &[f64], centers: &[f64]) -> (f64, f64) {
    let mean: f64 = p.iter().zip(centers).map(|(p, z)| p * z).sum();
    let var: f64 = p.iter().zip(centers).map(|(p, z)| p * (z - mean) * (z - mean)).sum();
    (mean, var.sqrt())
}

/// Compares the bin-center moments of the two opinions' committed belief
/// (`b / (1 − u)`, the histogram frequencies). Uncertainty mass is left out
/// because its uniform base rate would pull both means towards the range
/// center and bias the offset.
pub fn recalibrate(wrong: &Opinion, reference: &Opinion, spec: &HistogramSpec) -> Result<Recalibration, ScenarioError> {
    let domain = spec.domain();
    for op in [wrong, reference] {
        if op.domain() != &domain {
            return Err(OpinionError::DomainMismatch("opinion is not on the histogram domain".into()).into());
        }
    }
    let (Some(pw), Some(pr)) = (wrong.normalized_belief(), reference.normalized_belief()) else {
        return Err(ScenarioError::Config("cannot recalibrate from a vacuous opinion".into()));
    };
    let centers = spec.bin_centers();
    let (mw, sw) = moments(&pw, &centers);
    let (mr, sr) = moments(&pr, &centers);
    let spread_ratio = if sr > 0.0 { sw / sr } else { 1.0 };
    Ok(Recalibration { offset: mw - mr, spread_ratio })
}
