use serde::{Deserialize, Serialize};

use super::batch::Batch;
use crate::error::{Error, Result};

/// Per-feature standardization fitted on a single reference period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    location: Vec<f64>,
    scale: Vec<f64>,
}

impl Scaler {
    pub fn location(&self) -> &[f64] {
        &self.location
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn n_features(&self) -> usize {
        self.location.len()
    }

    pub fn apply(&self, batch: &Batch) -> Result<Batch> {
        apply_scaler(self, batch)
    }
}

/// Mean and population standard deviation of every column; constant columns
/// get scale 1.
pub fn fit_scaler(first_batch: &Batch) -> Result<Scaler> {
    let n = first_batch.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "scaler needs at least 2 rows, period {} has {n}",
            first_batch.period_id()
        )));
    }
    let d = first_batch.n_features();
    let m = first_batch.features();
    let mut location = vec![0.0; d];
    let mut scale = vec![0.0; d];
    for j in 0..d {
        let mean = (0..n).map(|i| m.get(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (m.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        location[j] = mean;
        scale[j] = if sd > f64::EPSILON * mean.abs().max(1.0) {
            sd
        } else {
            1.0
        };
    }
    Ok(Scaler { location, scale })
}

pub fn apply_scaler(scaler: &Scaler, batch: &Batch) -> Result<Batch> {
    if batch.n_features() != scaler.n_features() {
        return Err(Error::DimensionMismatch {
            expected: scaler.n_features(),
            found: batch.n_features(),
        });
    }
    let features = batch
        .features()
        .map_columns(|j, x| (x - scaler.location[j]) / scaler.scale[j]);
    Ok(batch.with_features(features))
}

/// Fits on the first batch and transforms every batch with it.
pub fn scale_stream(batches: &[Batch]) -> Result<(Scaler, Vec<Batch>)> {
    let first = batches
        .first()
        .ok_or_else(|| Error::EmptyInput("no batches to scale".into()))?;
    let scaler = fit_scaler(first)?;
    let scaled = batches
        .iter()
        .map(|b| apply_scaler(&scaler, b))
        .collect::<Result<_>>()?;
    Ok((scaler, scaled))
}
