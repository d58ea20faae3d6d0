//! Overlap metrics on hard segmentations: Dice and surface Dice.
//!
//! Surfaces are the mask voxels with at least one face neighbor outside the
//! mask (the volume border counts as outside). Distances between surfaces are
//! exact Euclidean distances in millimeters between voxel centers.

use serde::Serialize;

use crate::edt::squared_distance_transform;
use crate::error::{Error, Result};
use crate::volume::{Geometry, LabelVolume};

/// Default surface-distance tolerance in millimeters.
pub const DEFAULT_SD_TOLERANCE_MM: f64 = 2.0;

/// A boundary distance `d` counts as within tolerance `t` when
/// `d^2 <= t^2 * (1 + DISTANCE_RELATIVE_SLACK)`, absorbing rounding in
/// spacing products such as `3 * 0.1`.
pub const DISTANCE_RELATIVE_SLACK: f64 = 1e-9;

pub fn within_tolerance(squared_distance: f64, tolerance: f64) -> bool {
    squared_distance <= tolerance * tolerance * (1.0 + DISTANCE_RELATIVE_SLACK)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask {
    geometry: Geometry,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(geometry: Geometry, data: Vec<bool>) -> Result<Self> {
        if data.len() != geometry.num_voxels() {
            return Err(Error::InvalidVolume(format!(
                "mask has {} voxels, geometry {}",
                data.len(),
                geometry.num_voxels()
            )));
        }
        Ok(Self { geometry, data })
    }

    /// Voxels whose label is any of `classes`.
    pub fn from_labels(labels: &LabelVolume, classes: &[u8]) -> Self {
        Self {
            geometry: labels.geometry().clone(),
            data: labels.data().iter().map(|l| classes.contains(l)).collect(),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// `2|T ∩ P| / (|T| + |P|)`, or 1 when both masks are empty.
pub fn dice_masks(reference: &BinaryMask, predicted: &BinaryMask) -> Result<f64> {
    reference.geometry.ensure_same_dims(&predicted.geometry)?;
    let (mut t, mut p, mut both) = (0usize, 0usize, 0usize);
    for (&a, &b) in reference.data.iter().zip(&predicted.data) {
        t += a as usize;
        p += b as usize;
        both += (a && b) as usize;
    }
    if t + p == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (t + p) as f64)
}

fn check_pair(reference: &LabelVolume, predicted: &LabelVolume, class_id: u8) -> Result<()> {
    reference.ensure_compatible(predicted)?;
    if class_id as usize >= reference.num_classes() {
        return Err(Error::param(
            "class_id",
            format!("{class_id} is not below num_classes {}", reference.num_classes()),
        ));
    }
    Ok(())
}

pub fn dice(reference: &LabelVolume, predicted: &LabelVolume, class_id: u8) -> Result<f64> {
    check_pair(reference, predicted, class_id)?;
    dice_masks(
        &BinaryMask::from_labels(reference, &[class_id]),
        &BinaryMask::from_labels(predicted, &[class_id]),
    )
}

/// Linear indices of surface voxels, in increasing order.
pub fn boundary_voxels(mask: &BinaryMask) -> Vec<usize> {
    let [nz, ny, nx] = mask.geometry.extent3();
    let planar = mask.geometry.rank() == 2;
    let at = |z: usize, y: usize, x: usize| mask.data[(z * ny + y) * nx + x];
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !at(z, y, x) {
                    continue;
                }
                let interior = y > 0
                    && y + 1 < ny
                    && x > 0
                    && x + 1 < nx
                    && at(z, y - 1, x)
                    && at(z, y + 1, x)
                    && at(z, y, x - 1)
                    && at(z, y, x + 1)
                    && (planar || (z > 0 && z + 1 < nz && at(z - 1, y, x) && at(z + 1, y, x)));
                if !interior {
                    out.push((z * ny + y) * nx + x);
                }
            }
        }
    }
    out
}

/// Fraction of both surfaces lying within `tolerance` mm of the other surface.
pub fn surface_dice_masks(
    reference: &BinaryMask,
    predicted: &BinaryMask,
    tolerance: f64,
) -> Result<f64> {
    reference.geometry.ensure_same(&predicted.geometry)?;
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Error::param("tolerance", format!("must be >= 0, got {tolerance}")));
    }
    let surf_t = boundary_voxels(reference);
    let surf_p = boundary_voxels(predicted);
    match (surf_t.is_empty(), surf_p.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let n = reference.geometry.num_voxels();
    let as_features = |surface: &[usize]| {
        let mut f = vec![false; n];
        surface.iter().for_each(|&i| f[i] = true);
        f
    };
    let to_p = squared_distance_transform(&reference.geometry, &as_features(&surf_p));
    let to_t = squared_distance_transform(&reference.geometry, &as_features(&surf_t));
    let close_t = surf_t.iter().filter(|&&i| within_tolerance(to_p[i], tolerance)).count();
    let close_p = surf_p.iter().filter(|&&i| within_tolerance(to_t[i], tolerance)).count();
    Ok((close_t + close_p) as f64 / (surf_t.len() + surf_p.len()) as f64)
}

pub fn surface_dice(
    reference: &LabelVolume,
    predicted: &LabelVolume,
    class_id: u8,
    tolerance: f64,
) -> Result<f64> {
    check_pair(reference, predicted, class_id)?;
    surface_dice_masks(
        &BinaryMask::from_labels(reference, &[class_id]),
        &BinaryMask::from_labels(predicted, &[class_id]),
        tolerance,
    )
}

/// A named union of classes scored as one structure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Region {
    pub name: String,
    pub classes: Vec<u8>,
}

/// Parses `NAME=1+2+4,OTHER=3`.
pub fn parse_region_map(spec: &str) -> Result<Vec<Region>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|entry| {
            let (name, classes) = entry
                .split_once('=')
                .ok_or_else(|| Error::param("region_merge", format!("`{entry}` lacks `=`")))?;
            let classes = classes
                .split('+')
                .map(|c| {
                    c.trim().parse::<u8>().map_err(|_| {
                        Error::param("region_merge", format!("bad class id `{c}` in `{entry}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if name.trim().is_empty() {
                return Err(Error::param("region_merge", format!("empty name in `{entry}`")));
            }
            Ok(Region {
                name: name.trim().to_string(),
                classes,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub name: String,
    pub classes: Vec<u8>,
    pub dsc: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentationScores {
    pub tolerance_mm: f64,
    pub rows: Vec<ScoreRow>,
}

/// One row per class, then optionally the unweighted mean over foreground
/// classes (all classes except 0), then one row per merged region.
pub fn segmentation_scores(
    reference: &LabelVolume,
    predicted: &LabelVolume,
    tolerance: f64,
    regions: &[Region],
    composite: bool,
) -> Result<SegmentationScores> {
    reference.ensure_compatible(predicted)?;
    let n = reference.num_classes();
    if let Some(bad) = regions
        .iter()
        .find(|r| r.classes.is_empty() || r.classes.iter().any(|&c| c as usize >= n))
    {
        return Err(Error::param(
            "region_merge",
            format!("region `{}` has no classes or a class id >= {n}", bad.name),
        ));
    }
    let score = |name: String, classes: Vec<u8>| -> Result<ScoreRow> {
        let t = BinaryMask::from_labels(reference, &classes);
        let p = BinaryMask::from_labels(predicted, &classes);
        Ok(ScoreRow {
            dsc: dice_masks(&t, &p)?,
            sd: surface_dice_masks(&t, &p, tolerance)?,
            name,
            classes,
        })
    };
    let mut rows = (0..n as u8)
        .map(|c| score(format!("class_{c}"), vec![c]))
        .collect::<Result<Vec<_>>>()?;
    if composite {
        let fg = &rows[1..];
        let k = fg.len() as f64;
        rows.push(ScoreRow {
            name: "composite".into(),
            classes: (1..n as u8).collect(),
            dsc: fg.iter().map(|r| r.dsc).sum::<f64>() / k,
            sd: fg.iter().map(|r| r.sd).sum::<f64>() / k,
        });
    }
    for r in regions {
        rows.push(score(r.name.clone(), r.classes.clone())?);
    }
    Ok(SegmentationScores {
        tolerance_mm: tolerance,
        rows,
    })
}
