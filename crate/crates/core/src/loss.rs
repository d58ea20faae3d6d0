//! Cross-entropy against soft targets and its gradient through softmax.
//!
//! Everything here is computed in f64; targets and predictions stored as f32
//! are widened on read. Logarithms are natural, so losses are in nats.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::{Geometry, SoftLabelVolume};

/// Predicted probabilities are clamped to this floor before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Pre-softmax scores, class-major like [`SoftLabelVolume`].
#[derive(Clone, Debug, PartialEq)]
pub struct LogitVolume {
    geometry: Geometry,
    num_classes: usize,
    data: Vec<f64>,
}

impl LogitVolume {
    pub fn new(geometry: Geometry, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::param("num_classes", "need at least 2 classes"));
        }
        if data.len() != geometry.num_voxels() * num_classes {
            return Err(Error::InvalidVolume(format!(
                "{} logits, expected {}",
                data.len(),
                geometry.num_voxels() * num_classes
            )));
        }
        if let Some(i) = data.iter().position(|z| !z.is_finite()) {
            let n = geometry.num_voxels();
            return Err(Error::InvalidVolume(format!(
                "non-finite logit {} for class {} at voxel {:?}",
                data[i],
                i / n,
                geometry.coords(i % n)
            )));
        }
        Ok(Self {
            geometry,
            num_classes,
            data,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn voxel(&self, v: usize) -> Vec<f64> {
        let n = self.geometry.num_voxels();
        (0..self.num_classes).map(|c| self.data[c * n + v]).collect()
    }
}

/// Max-shifted exponential normalization of one score vector.
pub fn softmax_vector(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-sum_c target_c * ln(max(predicted_c, LOG_FLOOR))`.
pub fn cross_entropy_vector(target: &[f64], predicted: &[f64]) -> f64 {
    -target
        .iter()
        .zip(predicted)
        .map(|(&t, &p)| if t == 0.0 { 0.0 } else { t * p.max(LOG_FLOOR).ln() })
        .sum::<f64>()
}

pub fn softmax(logits: &LogitVolume) -> SoftLabelVolume {
    let n = logits.geometry.num_voxels();
    let classes = logits.num_classes;
    let mut data = vec![0.0f32; n * classes];
    for v in 0..n {
        for (c, p) in softmax_vector(&logits.voxel(v)).into_iter().enumerate() {
            data[c * n + v] = p as f32;
        }
    }
    SoftLabelVolume::from_parts(logits.geometry.clone(), classes, data)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub reduction: Reduction,
    pub total: f64,
    pub num_voxels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_voxel: Option<Vec<f64>>,
}

impl LossReport {
    fn from_per_voxel(per_voxel: Vec<f64>, reduction: Reduction) -> Self {
        let sum: f64 = per_voxel.iter().sum();
        let total = match reduction {
            Reduction::Mean => sum / per_voxel.len() as f64,
            Reduction::Sum => sum,
        };
        Self {
            reduction,
            total,
            num_voxels: per_voxel.len(),
            per_voxel: Some(per_voxel),
        }
    }

    pub fn without_per_voxel(mut self) -> Self {
        self.per_voxel = None;
        self
    }
}

fn check_shapes(
    target: &SoftLabelVolume,
    geometry: &Geometry,
    num_classes: usize,
) -> Result<()> {
    target.geometry().ensure_same_dims(geometry)?;
    if target.num_classes() != num_classes {
        return Err(Error::ClassCountMismatch {
            left: target.num_classes(),
            right: num_classes,
        });
    }
    Ok(())
}

fn widen(v: Vec<f32>) -> Vec<f64> {
    v.into_iter().map(f64::from).collect()
}

/// Voxel-mean cross-entropy of `predicted` against a soft `target`.
pub fn cross_entropy(target: &SoftLabelVolume, predicted: &SoftLabelVolume) -> Result<LossReport> {
    cross_entropy_with(target, predicted, Reduction::Mean)
}

pub fn cross_entropy_with(
    target: &SoftLabelVolume,
    predicted: &SoftLabelVolume,
    reduction: Reduction,
) -> Result<LossReport> {
    check_shapes(target, predicted.geometry(), predicted.num_classes())?;
    let per_voxel = (0..target.num_voxels())
        .map(|v| cross_entropy_vector(&widen(target.voxel(v)), &widen(predicted.voxel(v))))
        .collect();
    Ok(LossReport::from_per_voxel(per_voxel, reduction))
}

/// Cross-entropy of `softmax(logits)`, evaluated without rounding the
/// probabilities to f32.
pub fn cross_entropy_logits(
    target: &SoftLabelVolume,
    logits: &LogitVolume,
    reduction: Reduction,
) -> Result<LossReport> {
    check_shapes(target, logits.geometry(), logits.num_classes())?;
    let per_voxel = (0..target.num_voxels())
        .map(|v| cross_entropy_vector(&widen(target.voxel(v)), &softmax_vector(&logits.voxel(v))))
        .collect();
    Ok(LossReport::from_per_voxel(per_voxel, reduction))
}

/// Per-voxel gradient of the cross-entropy with respect to the logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    geometry: Geometry,
    num_classes: usize,
    data: Vec<f64>,
}

impl Gradient {
    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Class-major, like the volumes.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn voxel(&self, v: usize) -> Vec<f64> {
        let n = self.geometry.num_voxels();
        (0..self.num_classes).map(|c| self.data[c * n + v]).collect()
    }
}

/// `softmax(logits[v]) - target[v]` at every voxel. This is the derivative of
/// the voxel's own loss term; divide by the voxel count for the mean loss.
pub fn ce_gradient(target: &SoftLabelVolume, logits: &LogitVolume) -> Result<Gradient> {
    check_shapes(target, logits.geometry(), logits.num_classes())?;
    let n = target.num_voxels();
    let classes = logits.num_classes();
    let mut data = vec![0.0f64; n * classes];
    for v in 0..n {
        for (c, p) in softmax_vector(&logits.voxel(v)).into_iter().enumerate() {
            data[c * n + v] = p - f64::from(target.probability(v, c));
        }
    }
    Ok(Gradient {
        geometry: logits.geometry.clone(),
        num_classes: classes,
        data,
    })
}
