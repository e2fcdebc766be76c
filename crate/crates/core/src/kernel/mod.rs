//! Prioritization-based weighted loss.
//!
//! A mini-batch of TD errors is turned into one multiplicative weight per
//! sample. The pipeline runs on `|δ|`:
//!
//! 1. normalize against the batch centre and spread ([`normalize`]),
//! 2. shrink positive normalized errors toward zero ([`positive_preferential`]),
//! 3. score with a zero-mean Gaussian density ([`gaussian_raw_priority`]),
//! 4. rescale with a softmax ([`softmax_weights`]),
//! 5. restore the loss scale with a norm ratio ([`compensate`]).
//!
//! The resulting weights enter the loss as `(1/N) Σ (ω_j δ_j)²` and are
//! treated as constants when differentiating.

mod stages;
pub mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use stages::{
    compensate, gaussian_density, gaussian_raw_priority, normalize, positive_preferential,
    positive_preferential_value, softmax_weights,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("TD error batch is empty")]
    EmptyBatch,
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

pub(crate) fn check_finite<T: Scalar>(values: &[T]) -> Result<(), KernelError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(KernelError::NonFinite {
            index,
            value: values[index].as_f64(),
        }),
        None => Ok(()),
    }
}

/// Signed TD errors of one sampled mini-batch. Nonempty and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TdErrorBatch<T> {
    values: Vec<T>,
}

impl<T: Scalar> TdErrorBatch<T> {
    pub fn new(values: Vec<T>) -> Result<Self, KernelError> {
        if values.is_empty() {
            return Err(KernelError::EmptyBatch);
        }
        check_finite(&values)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs(&self) -> Vec<T> {
        self.values.iter().map(|v| v.abs()).collect()
    }
}

/// Centre used by the normalization stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `min(mean, median)` of `|δ|`.
    Combined,
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompensationNorm {
    L1,
    L2,
}

/// Switches of the weighting pipeline. The default is the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub normalization: Normalization,
    pub softmax: bool,
    pub compensation: CompensationNorm,
    pub positive_preferential: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            normalization: Normalization::Combined,
            softmax: true,
            compensation: CompensationNorm::L1,
            positive_preferential: true,
        }
    }
}

impl KernelConfig {
    /// The 12 normalization × softmax × norm combinations, in table order.
    pub fn ablation_grid() -> Vec<KernelConfig> {
        let mut cells = Vec::with_capacity(12);
        for normalization in [Normalization::Combined, Normalization::Mean, Normalization::Median] {
            for softmax in [true, false] {
                for compensation in [CompensationNorm::L1, CompensationNorm::L2] {
                    cells.push(KernelConfig {
                        normalization,
                        softmax,
                        compensation,
                        positive_preferential: true,
                    });
                }
            }
        }
        cells
    }

    pub fn label(&self) -> String {
        let norm = match self.normalization {
            Normalization::Combined => "combined",
            Normalization::Mean => "mean",
            Normalization::Median => "median",
        };
        let comp = match self.compensation {
            CompensationNorm::L1 => "L1",
            CompensationNorm::L2 => "L2",
        };
        let mut label = format!("{norm}-{}-{comp}", if self.softmax { "on" } else { "off" });
        if !self.positive_preferential {
            label.push_str("-nopp");
        }
        label
    }
}

/// Intermediate vectors of one pipeline evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace<T> {
    pub delta_n: Vec<T>,
    pub delta_m: Vec<T>,
    pub delta_g: Vec<T>,
    pub p: Vec<T>,
}

/// Compensated weighting factors, one per batch element.
///
/// With softmax enabled every ω is strictly positive. With softmax disabled
/// the raw Gaussian scores are used directly and may underflow to zero for
/// extreme outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T> {
    pub omegas: Vec<T>,
    pub stages: Option<StageTrace<T>>,
}

/// JSON form of a full trace: `delta_n`, `delta_m`, `delta_g`, `p`, `omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTrace<T> {
    pub delta_n: Vec<T>,
    pub delta_m: Vec<T>,
    pub delta_g: Vec<T>,
    pub p: Vec<T>,
    pub omega: Vec<T>,
}

impl<T: Scalar> WeightVector<T> {
    pub fn ones(n: usize) -> Self {
        Self {
            omegas: vec![T::one(); n],
            stages: None,
        }
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.omegas
    }

    pub fn trace(&self) -> Option<KernelTrace<T>> {
        self.stages.as_ref().map(|s| KernelTrace {
            delta_n: s.delta_n.clone(),
            delta_m: s.delta_m.clone(),
            delta_g: s.delta_g.clone(),
            p: s.p.clone(),
            omega: self.omegas.clone(),
        })
    }

    pub fn trace_json(&self) -> Option<String> {
        self.trace()
            .map(|t| serde_json::to_string(&t).expect("trace serializes"))
    }
}

/// Runs the whole pipeline on one batch.
pub fn compute_weights<T: Scalar>(
    batch: &TdErrorBatch<T>,
    config: &KernelConfig,
) -> Result<WeightVector<T>, KernelError> {
    let delta_n = normalize(batch, config.normalization);
    let delta_m = if config.positive_preferential {
        positive_preferential(&delta_n)?
    } else {
        delta_n.clone()
    };
    let delta_g = gaussian_raw_priority(&delta_m)?;
    let p = if config.softmax {
        softmax_weights(&delta_g)?
    } else {
        delta_g.clone()
    };
    let mut weights = compensate(&p, batch, config.compensation)?;
    weights.stages = Some(StageTrace {
        delta_n,
        delta_m,
        delta_g,
        p,
    });
    Ok(weights)
}

/// `(1/N) Σ δ_j²`.
pub fn mse_loss<T: Scalar>(batch: &TdErrorBatch<T>) -> T {
    let n = T::from_usize_lossy(batch.len());
    batch.values().iter().map(|&d| d * d).sum::<T>() / n
}

/// `(1/N) Σ (ω_j δ_j)²`.
pub fn weighted_loss<T: Scalar>(batch: &TdErrorBatch<T>, omegas: &[T]) -> Result<T, KernelError> {
    if omegas.len() != batch.len() {
        return Err(KernelError::LengthMismatch {
            expected: batch.len(),
            actual: omegas.len(),
        });
    }
    let n = T::from_usize_lossy(batch.len());
    Ok(batch
        .values()
        .iter()
        .zip(omegas)
        .map(|(&d, &w)| (w * d) * (w * d))
        .sum::<T>()
        / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(v: &[f64]) -> TdErrorBatch<f64> {
        TdErrorBatch::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(
            TdErrorBatch::<f64>::new(vec![]),
            Err(KernelError::EmptyBatch)
        );
        match TdErrorBatch::new(vec![1.0, f64::NAN, 2.0]) {
            Err(KernelError::NonFinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        let err = TdErrorBatch::new(vec![0.0f32, 1.0, f32::INFINITY]).unwrap_err();
        assert!(err.to_string().contains("index 2"));
    }

    #[test]
    fn grid_has_twelve_distinct_cells() {
        let grid = KernelConfig::ablation_grid();
        assert_eq!(grid.len(), 12);
        assert_eq!(grid[0], KernelConfig::default());
        let labels: std::collections::BTreeSet<_> = grid.iter().map(|c| c.label()).collect();
        assert_eq!(labels.len(), 12);
    }

    #[test]
    fn unit_weights_reduce_to_mse() {
        let b = batch(&[3.0, 4.0]);
        assert_eq!(weighted_loss(&b, &[1.0, 1.0]).unwrap(), 12.5);
        assert_eq!(mse_loss(&b), 12.5);
        assert!(weighted_loss(&b, &[1.0]).is_err());
    }

    #[test]
    fn zero_variance_batch_gives_unit_weights_and_mse() {
        for v in [vec![5.0, 5.0, 5.0], vec![0.0; 4], vec![-0.1, 0.1, 0.1, -0.1], vec![2.5]] {
            let b = batch(&v);
            let w = compute_weights(&b, &KernelConfig::default()).unwrap();
            assert!(w.omegas.iter().all(|&o| o == 1.0), "{v:?} -> {:?}", w.omegas);
            assert_eq!(weighted_loss(&b, &w.omegas).unwrap(), mse_loss(&b));
        }
    }

    #[test]
    fn pipeline_matches_scalar_oracle() {
        // Frozen from an independent scalar-arithmetic script.
        let w = compute_weights(&batch(&[1.0, -2.0, 3.0]), &KernelConfig::default()).unwrap();
        let expected = [0.7579540458098601, 1.1307445679072463, 0.9935189394585492];
        for (a, e) in w.omegas.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
        // The median element (|δ| = 2, δ_n = 0) gets the largest weight.
        let argmax = (0..3).max_by(|&i, &j| w.omegas[i].total_cmp(&w.omegas[j])).unwrap();
        assert_eq!(argmax, 1);

        let w = compute_weights(&batch(&[0.0, 0.0, 1.0, 9.0]), &KernelConfig::default()).unwrap();
        let expected = [2.226924455019046, 2.226924455019046, 2.269204373220852, 0.8589772918643498];
        for (a, e) in w.omegas.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn trace_json_has_named_fields() {
        let w = compute_weights(&batch(&[1.0, -2.0, 3.0]), &KernelConfig::default()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&w.trace_json().unwrap()).unwrap();
        for key in ["delta_n", "delta_m", "delta_g", "p", "omega"] {
            assert_eq!(json[key].as_array().unwrap().len(), 3, "{key}");
        }
        assert!(WeightVector::<f64>::ones(2).trace_json().is_none());
    }

    #[test]
    fn disabling_positive_preference_keeps_normalized_errors() {
        let cfg = KernelConfig {
            positive_preferential: false,
            ..KernelConfig::default()
        };
        let w = compute_weights(&batch(&[1.0, -2.0, 3.0, 0.5]), &cfg).unwrap();
        let s = w.stages.unwrap();
        assert_eq!(s.delta_n, s.delta_m);
    }

    #[test]
    fn softmax_off_passes_raw_priorities() {
        let cfg = KernelConfig {
            softmax: false,
            ..KernelConfig::default()
        };
        let w = compute_weights(&batch(&[1.0, -2.0, 3.0, 0.5]), &cfg).unwrap();
        let s = w.stages.unwrap();
        assert_eq!(s.delta_g, s.p);
    }

    #[test]
    fn works_in_single_precision() {
        let b = TdErrorBatch::new(vec![1.0f32, -2.0, 3.0]).unwrap();
        let w = compute_weights(&b, &KernelConfig::default()).unwrap();
        assert!((w.omegas[1] - 1.1307446).abs() < 1e-5);
    }
}
