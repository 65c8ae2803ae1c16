//! Monte-Carlo experiments: the intersection scenarios, threshold and ROC
//! sweeps, RSU recalibration and the large-scale elimination study.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::misbehavior::MisbehaviorError;
use crate::opinion::OpinionError;

pub mod intersection;
pub mod measurement;
pub mod scale;

pub use intersection::{
    roc_sweep, run_intersection, run_intersection_grid, threshold_sweep, IntersectionConfig, IntersectionStats, RocRow,
    Scenario, SweepRow, TieBreak,
};
pub use measurement::{histogram_opinion, recalibrate, z_transform, HistogramSpec, MeasurementModel, Recalibration};
pub use scale::{
    elimination_model, elimination_monte_carlo, large_scale_synthetic, Elimination, LargeScaleConfig, ScaleRow,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Opinion(#[from] OpinionError),
    #[error(transparent)]
    Misbehavior(#[from] MisbehaviorError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

/// RNG of Monte-Carlo run `index` under `seed`: one ChaCha stream per run,
/// so results do not depend on scheduling order.
pub fn run_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Inclusive grid `min, min+step, ..., max`, rounded to 12 decimals so that
/// values print cleanly.
pub fn theta_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, ScenarioError> {
    if !(step > 0.0) || !(min <= max) || min < 0.0 || max > 1.0 {
        return Err(ScenarioError::Config(format!("invalid theta grid [{min}, {max}] step {step}")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((min + k as f64 * step) * 1e12).round() / 1e12).collect())
}

/// Serializes rows as CSV with a header taken from the row's field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, ScenarioError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| ScenarioError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
