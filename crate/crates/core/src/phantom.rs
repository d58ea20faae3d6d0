//! Deterministic synthetic label volumes, rater sets and miscalibrated predictions.
//!
//! Randomness comes from ChaCha8 seeded with the spec's seed, which produces
//! the same stream on every platform.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::softlabel::RaterSet;
use crate::volume::{Geometry, LabelVolume, SoftLabelVolume};

/// Fraction of correctly classified voxels in a miscalibrated prediction
/// unless overridden.
pub const DEFAULT_BASE_ACCURACY: f64 = 0.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    /// Every voxel is class 1.
    Homogeneous,
    /// Class 1 at the central voxel, class 0 everywhere else.
    IsolatedCenter,
    /// Class 0 below the middle of axis 0, class 1 from the middle on.
    StraightBoundary,
    /// Class 2 core inside a class 1 shell on a class 0 background.
    NestedSpheres,
    /// Bands along the last axis: class 2 (first quarter), class 1 (second
    /// quarter), class 0 (second half). Raters disagree only on the 1/0 edge.
    Fig3Multirater,
    /// A straight-boundary reference with an over-confident prediction.
    MiscalibratedPred,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 6] = [
        PhantomKind::Homogeneous,
        PhantomKind::IsolatedCenter,
        PhantomKind::StraightBoundary,
        PhantomKind::NestedSpheres,
        PhantomKind::Fig3Multirater,
        PhantomKind::MiscalibratedPred,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PhantomKind::Homogeneous => "homogeneous",
            PhantomKind::IsolatedCenter => "isolated_center",
            PhantomKind::StraightBoundary => "straight_boundary",
            PhantomKind::NestedSpheres => "nested_spheres",
            PhantomKind::Fig3Multirater => "fig3_multirater",
            PhantomKind::MiscalibratedPred => "miscalibrated_pred",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhantomKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::param("kind", format!("unknown phantom kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub dims: Vec<usize>,
    pub num_classes: usize,
    pub seed: u64,
    /// Confidence inflation, used by [`PhantomKind::MiscalibratedPred`] only.
    pub strength: f64,
}

impl PhantomSpec {
    pub fn new(kind: PhantomKind, dims: &[usize], num_classes: usize) -> Self {
        Self {
            kind,
            dims: dims.to_vec(),
            num_classes,
            seed: 0,
            strength: 0.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }

    fn check(&self) -> Result<Geometry> {
        let geometry = Geometry::isotropic(&self.dims)?;
        let need_classes = match self.kind {
            PhantomKind::NestedSpheres | PhantomKind::Fig3Multirater => 3,
            _ => 2,
        };
        if self.num_classes < need_classes {
            return Err(Error::param(
                "num_classes",
                format!("{} needs at least {need_classes} classes", self.kind),
            ));
        }
        let dims_ok = match self.kind {
            PhantomKind::IsolatedCenter => self.dims.iter().all(|&d| d >= 3),
            PhantomKind::StraightBoundary | PhantomKind::MiscalibratedPred => self.dims[0] >= 2,
            PhantomKind::Fig3Multirater => *self.dims.last().unwrap() >= 8,
            _ => true,
        };
        if !dims_ok {
            return Err(Error::param(
                "dims",
                format!("{:?} too small for {}", self.dims, self.kind),
            ));
        }
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::param("strength", format!("must be >= 0, got {}", self.strength)));
        }
        Ok(geometry)
    }
}

/// Inner and outer radii (voxels) of the nested-spheres phantom.
pub fn nested_sphere_radii(dims: &[usize]) -> (f64, f64) {
    let min = *dims.iter().min().unwrap() as f64;
    (0.2 * min, 0.4 * min)
}

/// Index along the last axis where the class 2 band ends and where the
/// class 1 band ends in the fig3 phantom.
pub fn fig3_band_ends(width: usize) -> (usize, usize) {
    (width / 4, width / 2)
}

fn label_at(kind: PhantomKind, dims: &[usize], coords: &[usize]) -> u8 {
    match kind {
        PhantomKind::Homogeneous => 1,
        PhantomKind::IsolatedCenter => {
            coords.iter().zip(dims).all(|(&c, &d)| c == d / 2) as u8
        }
        PhantomKind::StraightBoundary | PhantomKind::MiscalibratedPred => {
            (coords[0] >= dims[0] / 2) as u8
        }
        PhantomKind::NestedSpheres => {
            let (inner, outer) = nested_sphere_radii(dims);
            let r2: f64 = coords
                .iter()
                .zip(dims)
                .map(|(&c, &d)| {
                    let off = c as f64 - (d as f64 - 1.0) / 2.0;
                    off * off
                })
                .sum();
            if r2 <= inner * inner {
                2
            } else if r2 <= outer * outer {
                1
            } else {
                0
            }
        }
        PhantomKind::Fig3Multirater => {
            let (blue, red) = fig3_band_ends(*dims.last().unwrap());
            fig3_label(*coords.last().unwrap(), blue, red)
        }
    }
}

fn fig3_label(x: usize, blue_end: usize, red_end: usize) -> u8 {
    if x < blue_end {
        2
    } else if x < red_end {
        1
    } else {
        0
    }
}

pub fn generate_labels(spec: &PhantomSpec) -> Result<LabelVolume> {
    let geometry = spec.check()?;
    let data = (0..geometry.num_voxels())
        .map(|i| label_at(spec.kind, &spec.dims, &geometry.coords(i)))
        .collect();
    LabelVolume::new(geometry, spec.num_classes, data)
}

/// `raters` perturbed copies of the phantom; no label moves by more than
/// `jitter` voxels from a boundary of the base volume.
pub fn generate_rater_set(spec: &PhantomSpec, raters: usize, jitter: usize) -> Result<RaterSet> {
    if raters == 0 {
        return Err(Error::param("raters", "need at least one rater"));
    }
    let base = generate_labels(spec)?;
    if jitter == 0 {
        return RaterSet::new(vec![base; raters]);
    }
    let geometry = base.geometry().clone();
    let dims = spec.dims.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let j = jitter as isize;

    let volumes = (0..raters)
        .map(|_| {
            let data: Vec<u8> = match spec.kind {
                PhantomKind::Fig3Multirater => {
                    let w = *dims.last().unwrap();
                    let (blue, red) = fig3_band_ends(w);
                    if red as isize - j <= blue as isize + 1 {
                        return Err(Error::param(
                            "jitter",
                            format!("{jitter} would let the class 1 band vanish for width {w}"),
                        ));
                    }
                    let lines = geometry.num_voxels() / w;
                    (0..lines)
                        .flat_map(|_| {
                            let edge = (red as isize + rng.gen_range(-j..=j)) as usize;
                            (0..w).map(move |x| fig3_label(x, blue, edge))
                        })
                        .collect()
                }
                PhantomKind::StraightBoundary | PhantomKind::MiscalibratedPred => {
                    // one boundary offset per line along axis 0
                    let lines = geometry.num_voxels() / dims[0];
                    let offsets: Vec<isize> = (0..lines).map(|_| rng.gen_range(-j..=j)).collect();
                    let mid = (dims[0] / 2) as isize;
                    (0..geometry.num_voxels())
                        .map(|i| {
                            let c0 = (i / lines) as isize;
                            (c0 >= mid + offsets[i % lines]) as u8
                        })
                        .collect()
                }
                _ => (0..geometry.num_voxels())
                    .map(|i| {
                        let coords: Vec<usize> = geometry
                            .coords(i)
                            .iter()
                            .zip(&dims)
                            .map(|(&c, &d)| {
                                (c as isize + rng.gen_range(-j..=j)).clamp(0, d as isize - 1) as usize
                            })
                            .collect();
                        base.get(&coords)
                    })
                    .collect(),
            };
            LabelVolume::new(geometry.clone(), spec.num_classes, data)
        })
        .collect::<Result<Vec<_>>>()?;
    RaterSet::new(volumes)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MiscalibrationParams {
    /// Fraction of voxels whose predicted class equals the label.
    pub accuracy: f64,
    /// Added to the accuracy to give the predicted confidence.
    pub strength: f64,
    /// Fixed confidence that replaces `accuracy + strength` when set.
    pub confidence: Option<f64>,
    pub seed: u64,
}

impl Default for MiscalibrationParams {
    fn default() -> Self {
        Self {
            accuracy: DEFAULT_BASE_ACCURACY,
            strength: 0.0,
            confidence: None,
            seed: 0,
        }
    }
}

/// Over-confident predictions with a known calibration gap.
///
/// Exactly `round((1 - accuracy) * n)` voxels, chosen by the seeded shuffle,
/// get a wrong class. Every voxel predicts its class with confidence
/// `clamp(accuracy + strength)`, so all voxels share one reliability bin and
/// the expected calibration error is the gap between the realized accuracy
/// and that confidence, i.e. `strength` while `accuracy + strength <= 1`.
pub fn generate_miscalibrated(
    labels: &LabelVolume,
    params: &MiscalibrationParams,
) -> Result<SoftLabelVolume> {
    if !(0.0..=1.0).contains(&params.accuracy) {
        return Err(Error::param("accuracy", format!("must be in [0, 1], got {}", params.accuracy)));
    }
    if !(params.strength.is_finite() && params.strength >= 0.0) {
        return Err(Error::param("strength", format!("must be >= 0, got {}", params.strength)));
    }
    if let Some(c) = params.confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::param("confidence", format!("must be in [0, 1], got {c}")));
        }
    }
    let classes = labels.num_classes();
    let n = labels.geometry().num_voxels();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let wrong = ((1.0 - params.accuracy) * n as f64).round() as usize;

    let mut predicted: Vec<u8> = labels.data().to_vec();
    for &v in &order[..wrong] {
        let shift = rng.gen_range(1..classes);
        predicted[v] = ((predicted[v] as usize + shift) % classes) as u8;
    }

    let confidence = params
        .confidence
        .unwrap_or(params.accuracy + params.strength)
        .clamp(1.0 / classes as f64, 1.0);
    let rest = ((1.0 - confidence) / (classes - 1) as f64) as f32;
    let confidence = confidence as f32;
    let mut data = vec![rest; n * classes];
    for (v, &c) in predicted.iter().enumerate() {
        data[c as usize * n + v] = confidence;
    }
    SoftLabelVolume::new(labels.geometry().clone(), classes, data)
}

/// Reference labels and the miscalibrated prediction for a
/// [`PhantomKind::MiscalibratedPred`] spec.
pub fn generate_prediction(spec: &PhantomSpec) -> Result<(LabelVolume, SoftLabelVolume)> {
    let labels = generate_labels(spec)?;
    let pred = generate_miscalibrated(
        &labels,
        &MiscalibrationParams {
            strength: spec.strength,
            seed: spec.seed,
            ..Default::default()
        },
    )?;
    Ok((labels, pred))
}
