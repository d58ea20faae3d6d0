//! Label and probability volumes, one-hot encoding and replicate padding.
//!
//! Volumes are stored row-major with the last axis varying fastest. Two-axis
//! volumes are first-class: they keep rank 2 so that smoothing picks the
//! planar kernel, while [`Geometry::extent3`] lets loops treat them as a
//! single slab.

use crate::error::{Error, Result};

/// Per-voxel probability sums must be within this distance of 1.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Looser sum tolerance accepted for model predictions and by [`argmax_labels`].
pub const PREDICTION_TOLERANCE: f64 = 1e-3;

/// Label files store one byte per voxel.
pub const MAX_CLASSES: usize = 256;

/// Grid extent and physical voxel size.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    dims: Vec<usize>,
    spacing: Vec<f64>,
}

impl Geometry {
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) {
            return Err(Error::InvalidVolume(format!(
                "rank must be 2 or 3, got {}",
                dims.len()
            )));
        }
        if spacing.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "{} spacing values for a rank-{} volume",
                spacing.len(),
                dims.len()
            )));
        }
        if let Some(axis) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidVolume(format!("axis {axis} has zero extent")));
        }
        if let Some(axis) = spacing.iter().position(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidVolume(format!(
                "spacing on axis {axis} must be positive, got {}",
                spacing[axis]
            )));
        }
        if dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .is_none()
        {
            return Err(Error::InvalidVolume("voxel count overflows".into()));
        }
        Ok(Self { dims, spacing })
    }

    /// Unit spacing on every axis.
    pub fn isotropic(dims: &[usize]) -> Result<Self> {
        Self::new(dims.to_vec(), vec![1.0; dims.len()])
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    /// Dims as three axes, with a leading extent of 1 for planar volumes.
    pub fn extent3(&self) -> [usize; 3] {
        match *self.dims.as_slice() {
            [y, x] => [1, y, x],
            [z, y, x] => [z, y, x],
            _ => unreachable!("rank checked at construction"),
        }
    }

    /// Spacing as three axes; the padded leading axis gets unit spacing.
    pub fn spacing3(&self) -> [f64; 3] {
        match *self.spacing.as_slice() {
            [y, x] => [1.0, y, x],
            [z, y, x] => [z, y, x],
            _ => unreachable!("rank checked at construction"),
        }
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.rank()];
        for (c, &d) in coords.iter_mut().zip(&self.dims).rev() {
            *c = index % d;
            index /= d;
        }
        coords
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.rank());
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &d)| acc * d + c)
    }

    pub fn ensure_same_dims(&self, other: &Geometry) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch {
                left: self.dims.clone(),
                right: other.dims.clone(),
            });
        }
        Ok(())
    }

    pub fn ensure_same(&self, other: &Geometry) -> Result<()> {
        self.ensure_same_dims(other)?;
        if self.spacing != other.spacing {
            return Err(Error::SpacingMismatch {
                left: self.spacing.clone(),
                right: other.spacing.clone(),
            });
        }
        Ok(())
    }
}

fn check_num_classes(num_classes: usize) -> Result<()> {
    if !(2..=MAX_CLASSES).contains(&num_classes) {
        return Err(Error::param(
            "num_classes",
            format!("must be in [2, {MAX_CLASSES}], got {num_classes}"),
        ));
    }
    Ok(())
}

/// One class index per voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    geometry: Geometry,
    num_classes: usize,
    data: Vec<u8>,
}

impl LabelVolume {
    pub fn new(geometry: Geometry, num_classes: usize, data: Vec<u8>) -> Result<Self> {
        check_num_classes(num_classes)?;
        if data.len() != geometry.num_voxels() {
            return Err(Error::InvalidVolume(format!(
                "{} labels for {} voxels",
                data.len(),
                geometry.num_voxels()
            )));
        }
        if let Some(i) = data.iter().position(|&l| l as usize >= num_classes) {
            return Err(Error::InvalidVolume(format!(
                "label {} at voxel {:?} is not below num_classes {}",
                data[i],
                geometry.coords(i),
                num_classes
            )));
        }
        Ok(Self {
            geometry,
            num_classes,
            data,
        })
    }

    /// A volume with every voxel set to `label`.
    pub fn filled(geometry: Geometry, num_classes: usize, label: u8) -> Result<Self> {
        let n = geometry.num_voxels();
        Self::new(geometry, num_classes, vec![label; n])
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> &[usize] {
        self.geometry.dims()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, coords: &[usize]) -> u8 {
        self.data[self.geometry.index(coords)]
    }

    /// Boolean membership of `class` per voxel.
    pub fn class_mask(&self, class: u8) -> Vec<bool> {
        self.data.iter().map(|&l| l == class).collect()
    }

    pub fn ensure_compatible(&self, other: &LabelVolume) -> Result<()> {
        self.geometry.ensure_same(&other.geometry)?;
        if self.num_classes != other.num_classes {
            return Err(Error::ClassCountMismatch {
                left: self.num_classes,
                right: other.num_classes,
            });
        }
        Ok(())
    }
}

/// Per-class probabilities, stored class-major so every class plane is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabelVolume {
    geometry: Geometry,
    num_classes: usize,
    data: Vec<f32>,
}

impl SoftLabelVolume {
    /// Validates values in [0, 1] and per-voxel sums within [`SIMPLEX_TOLERANCE`].
    pub fn new(geometry: Geometry, num_classes: usize, data: Vec<f32>) -> Result<Self> {
        Self::with_tolerance(geometry, num_classes, data, SIMPLEX_TOLERANCE)
    }

    pub fn with_tolerance(
        geometry: Geometry,
        num_classes: usize,
        data: Vec<f32>,
        tolerance: f64,
    ) -> Result<Self> {
        check_num_classes(num_classes)?;
        let expected = geometry.num_voxels() * num_classes;
        if data.len() != expected {
            return Err(Error::InvalidVolume(format!(
                "{} probabilities, expected {expected}",
                data.len()
            )));
        }
        let volume = Self {
            geometry,
            num_classes,
            data,
        };
        if let Some((voxel, reason)) = volume.first_simplex_violation(tolerance) {
            return Err(Error::InvalidVolume(format!(
                "voxel {:?}: {reason}",
                volume.geometry.coords(voxel)
            )));
        }
        Ok(volume)
    }

    /// Skips validation; callers must have produced simplex-valued data.
    pub(crate) fn from_parts(geometry: Geometry, num_classes: usize, data: Vec<f32>) -> Self {
        let volume = Self {
            geometry,
            num_classes,
            data,
        };
        debug_assert!(
            volume.first_simplex_violation(SIMPLEX_TOLERANCE).is_none(),
            "produced a non-simplex volume"
        );
        volume
    }

    /// Index of the first voxel breaking the simplex constraints, with a reason.
    pub fn first_simplex_violation(&self, tolerance: f64) -> Option<(usize, String)> {
        let n = self.geometry.num_voxels();
        (0..n).find_map(|v| {
            let mut sum = 0.0f64;
            for c in 0..self.num_classes {
                let p = self.data[c * n + v];
                if !(0.0..=1.0).contains(&p) {
                    return Some((v, format!("class {c} probability {p} outside [0, 1]")));
                }
                sum += p as f64;
            }
            ((sum - 1.0).abs() > tolerance)
                .then(|| (v, format!("probabilities sum to {sum}, not 1")))
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> &[usize] {
        self.geometry.dims()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_voxels(&self) -> usize {
        self.geometry.num_voxels()
    }

    /// Class-major payload.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn plane(&self, class: usize) -> &[f32] {
        let n = self.num_voxels();
        &self.data[class * n..(class + 1) * n]
    }

    pub fn probability(&self, voxel: usize, class: usize) -> f32 {
        self.data[class * self.num_voxels() + voxel]
    }

    pub fn voxel(&self, voxel: usize) -> Vec<f32> {
        (0..self.num_classes)
            .map(|c| self.probability(voxel, c))
            .collect()
    }

    pub fn voxel_at(&self, coords: &[usize]) -> Vec<f32> {
        self.voxel(self.geometry.index(coords))
    }
}

/// Indicator probabilities of the annotated class.
pub fn one_hot_encode(labels: &LabelVolume) -> SoftLabelVolume {
    let n = labels.geometry.num_voxels();
    let mut data = vec![0.0f32; n * labels.num_classes];
    for (v, &l) in labels.data.iter().enumerate() {
        data[l as usize * n + v] = 1.0;
    }
    SoftLabelVolume::from_parts(labels.geometry.clone(), labels.num_classes, data)
}

/// Hard labels from probabilities. Ties go to the lowest class index.
pub fn argmax_labels(probs: &SoftLabelVolume) -> Result<LabelVolume> {
    if let Some((v, reason)) = probs.first_simplex_violation(PREDICTION_TOLERANCE) {
        return Err(Error::InvalidVolume(format!(
            "voxel {:?}: {reason}",
            probs.geometry.coords(v)
        )));
    }
    let n = probs.num_voxels();
    let labels = (0..n)
        .map(|v| {
            let mut best = 0;
            let mut best_p = probs.data[v];
            for c in 1..probs.num_classes {
                let p = probs.data[c * n + v];
                if p > best_p {
                    best = c;
                    best_p = p;
                }
            }
            best as u8
        })
        .collect();
    LabelVolume::new(probs.geometry.clone(), probs.num_classes, labels)
}

/// Read access to a grid where out-of-range indices clamp to the nearest border voxel.
#[derive(Clone, Copy, Debug)]
pub struct PaddedView<'a, T> {
    grid: &'a [T],
    dims: &'a [usize],
    width: usize,
}

/// Wraps `grid` (row-major over `dims`) with replicate padding of `width` voxels.
///
/// Panics if `grid.len()` is not the product of `dims`.
pub fn replicate_pad<'a, T: Copy>(grid: &'a [T], dims: &'a [usize], width: usize) -> PaddedView<'a, T> {
    assert_eq!(
        grid.len(),
        dims.iter().product::<usize>(),
        "grid length does not match dims"
    );
    PaddedView { grid, dims, width }
}

impl<T: Copy> PaddedView<'_, T> {
    pub fn width(&self) -> usize {
        self.width
    }

    /// Extent of the padded grid per axis.
    pub fn padded_dims(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d + 2 * self.width).collect()
    }

    /// Value at `index`, which may lie anywhere; coordinates clamp per axis.
    pub fn get(&self, index: &[isize]) -> T {
        debug_assert_eq!(index.len(), self.dims.len());
        let flat = index.iter().zip(self.dims).fold(0usize, |acc, (&i, &d)| {
            acc * d + i.clamp(0, d as isize - 1) as usize
        });
        self.grid[flat]
    }

    /// Copies the padded grid out, row-major over [`Self::padded_dims`].
    pub fn materialize(&self) -> Vec<T> {
        let padded = self.padded_dims();
        let total: usize = padded.iter().product();
        let w = self.width as isize;
        let mut index = vec![0isize; padded.len()];
        (0..total)
            .map(|mut flat| {
                for (slot, &d) in index.iter_mut().zip(&padded).rev() {
                    *slot = (flat % d) as isize - w;
                    flat /= d;
                }
                self.get(&index)
            })
            .collect()
    }
}
