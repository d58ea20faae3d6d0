//! Soft-label generation from one or more expert label volumes.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{svls_weights, SvlsKernel, DEFAULT_SIGMA};
use crate::parallel;
use crate::volume::{one_hot_encode, Geometry, LabelVolume, SoftLabelVolume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMethod {
    OneHot,
    Ls,
    Svls,
    Msvls,
    Moh,
}

impl SmoothingMethod {
    /// Methods that read several raters rather than one annotation.
    pub fn is_fusion(self) -> bool {
        matches!(self, SmoothingMethod::Msvls | SmoothingMethod::Moh)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SmoothingMethod::OneHot => "onehot",
            SmoothingMethod::Ls => "ls",
            SmoothingMethod::Svls => "svls",
            SmoothingMethod::Msvls => "msvls",
            SmoothingMethod::Moh => "moh",
        }
    }
}

impl fmt::Display for SmoothingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SmoothingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onehot" | "one_hot" => Ok(SmoothingMethod::OneHot),
            "ls" => Ok(SmoothingMethod::Ls),
            "svls" => Ok(SmoothingMethod::Svls),
            "msvls" => Ok(SmoothingMethod::Msvls),
            "moh" => Ok(SmoothingMethod::Moh),
            other => Err(Error::param("method", format!("unknown method `{other}`"))),
        }
    }
}

/// A validated choice of soft-label method and its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothingSpec {
    pub method: SmoothingMethod,
    pub alpha: Option<f64>,
    pub sigma: f64,
}

impl SmoothingSpec {
    pub fn new(method: SmoothingMethod, alpha: Option<f64>, sigma: Option<f64>) -> Result<Self> {
        match (method, alpha) {
            (SmoothingMethod::Ls, None) => {
                return Err(Error::param("alpha", "label smoothing needs an explicit alpha"))
            }
            (SmoothingMethod::Ls, Some(a)) => check_alpha(a)?,
            (_, Some(_)) => {
                return Err(Error::param("alpha", format!("not used by method {method}")))
            }
            _ => {}
        }
        let uses_sigma = matches!(method, SmoothingMethod::Svls | SmoothingMethod::Msvls);
        if sigma.is_some() && !uses_sigma {
            return Err(Error::param("sigma", format!("not used by method {method}")));
        }
        let sigma = sigma.unwrap_or(DEFAULT_SIGMA);
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self {
            method,
            alpha,
            sigma,
        })
    }

    /// Soft labels from a single annotation; fusion methods treat it as one rater.
    pub fn encode(&self, labels: &LabelVolume) -> Result<SoftLabelVolume> {
        match self.method {
            SmoothingMethod::OneHot => Ok(one_hot_encode(labels)),
            SmoothingMethod::Ls => label_smooth(labels, self.alpha.unwrap_or_default()),
            SmoothingMethod::Svls => {
                svls_smooth(labels, &svls_weights(labels.geometry().rank(), self.sigma)?)
            }
            SmoothingMethod::Msvls | SmoothingMethod::Moh => {
                self.fuse(&RaterSet::new(vec![labels.clone()])?)
            }
        }
    }

    pub fn fuse(&self, raters: &RaterSet) -> Result<SoftLabelVolume> {
        match self.method {
            SmoothingMethod::Msvls => {
                msvls_fuse(raters, &svls_weights(raters.geometry().rank(), self.sigma)?)
            }
            SmoothingMethod::Moh => Ok(moh_fuse(raters)),
            _ if raters.len() == 1 => self.encode(&raters.raters()[0]),
            _ => Err(Error::param(
                "method",
                format!("{} takes a single annotation, got {} raters", self.method, raters.len()),
            )),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("must be in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// Annotations of the same image by several experts.
#[derive(Clone, Debug)]
pub struct RaterSet {
    raters: Vec<LabelVolume>,
}

impl RaterSet {
    pub fn new(raters: Vec<LabelVolume>) -> Result<Self> {
        let first = raters.first().ok_or(Error::EmptyRaterSet)?;
        for other in &raters[1..] {
            first.ensure_compatible(other)?;
        }
        Ok(Self { raters })
    }

    pub fn raters(&self) -> &[LabelVolume] {
        &self.raters
    }

    pub fn len(&self) -> usize {
        self.raters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raters.is_empty()
    }

    pub fn geometry(&self) -> &Geometry {
        self.raters[0].geometry()
    }

    pub fn num_classes(&self) -> usize {
        self.raters[0].num_classes()
    }
}

/// Uniform label smoothing: `(1 - alpha) * one_hot + alpha / N`.
pub fn label_smooth(labels: &LabelVolume, alpha: f64) -> Result<SoftLabelVolume> {
    check_alpha(alpha)?;
    let classes = labels.num_classes();
    let off = alpha / classes as f64;
    let on = (1.0 - alpha) + off;
    let (on, off) = (on as f32, off as f32);
    let n = labels.geometry().num_voxels();
    let mut data = vec![off; n * classes];
    for (v, &l) in labels.data().iter().enumerate() {
        data[l as usize * n + v] = on;
    }
    Ok(SoftLabelVolume::from_parts(labels.geometry().clone(), classes, data))
}

/// Stencil taps as 3D offsets with weights already divided by the total weight.
fn stencil3(kernel: &SvlsKernel) -> Vec<([isize; 3], f64)> {
    let total = kernel.total_weight();
    kernel
        .offsets()
        .map(|(o, w)| {
            let o3 = match *o.as_slice() {
                [y, x] => [0, y, x],
                [z, y, x] => [z, y, x],
                _ => unreachable!(),
            };
            (o3, w / total)
        })
        .collect()
}

/// Voxel-major smoothed probabilities (`out[v * N + c]`), computed in f64.
fn svls_voxel_major(labels: &LabelVolume, kernel: &SvlsKernel) -> Vec<f64> {
    let [nz, ny, nx] = labels.geometry().extent3();
    let classes = labels.num_classes();
    let stencil = stencil3(kernel);
    let data = labels.data();
    let slab = ny * nx;
    let mut out = vec![0.0f64; slab * nz * classes];
    let clamp = |i: usize, d: isize, n: usize| (i as isize + d).clamp(0, n as isize - 1) as usize;

    parallel::for_each_chunk_mut(&mut out, slab * classes, |z, chunk| {
        for y in 0..ny {
            for x in 0..nx {
                let acc = &mut chunk[(y * nx + x) * classes..][..classes];
                for &([dz, dy, dx], w) in &stencil {
                    let zz = clamp(z, dz, nz);
                    let yy = clamp(y, dy, ny);
                    let xx = clamp(x, dx, nx);
                    acc[data[(zz * ny + yy) * nx + xx] as usize] += w;
                }
            }
        }
    });
    out
}

fn to_class_major(voxel_major: &[f64], classes: usize) -> Vec<f32> {
    let n = voxel_major.len() / classes;
    let mut out = vec![0.0f32; voxel_major.len()];
    parallel::for_each_chunk_mut(&mut out, n, |c, plane| {
        for (v, p) in plane.iter_mut().enumerate() {
            *p = voxel_major[v * classes + c] as f32;
        }
    });
    out
}

/// Correlates every one-hot class plane with the kernel over a replicate-padded
/// grid and divides by the kernel's total weight.
pub fn svls_smooth(labels: &LabelVolume, kernel: &SvlsKernel) -> Result<SoftLabelVolume> {
    let rank = labels.geometry().rank();
    if kernel.rank() != rank {
        return Err(Error::RankMismatch {
            kernel: kernel.rank(),
            volume: rank,
        });
    }
    let classes = labels.num_classes();
    let data = to_class_major(&svls_voxel_major(labels, kernel), classes);
    Ok(SoftLabelVolume::from_parts(labels.geometry().clone(), classes, data))
}

/// Mean over raters of each rater's SVLS soft labels.
///
/// Per-voxel rater values are summed in sorted order, so the result does not
/// depend on the order of the raters.
pub fn msvls_fuse(raters: &RaterSet, kernel: &SvlsKernel) -> Result<SoftLabelVolume> {
    let rank = raters.geometry().rank();
    if kernel.rank() != rank {
        return Err(Error::RankMismatch {
            kernel: kernel.rank(),
            volume: rank,
        });
    }
    let per_rater: Vec<Vec<f64>> = raters
        .raters()
        .iter()
        .map(|r| svls_voxel_major(r, kernel))
        .collect();
    let d = per_rater.len();
    let len = per_rater[0].len();
    let mut mean = vec![0.0f64; len];
    parallel::for_each_chunk_mut(&mut mean, 1 << 14, |chunk_idx, chunk| {
        let mut values = vec![0.0f64; d];
        for (k, m) in chunk.iter_mut().enumerate() {
            let i = chunk_idx * (1 << 14) + k;
            for (slot, r) in values.iter_mut().zip(&per_rater) {
                *slot = r[i];
            }
            values.sort_by(f64::total_cmp);
            *m = values.iter().sum::<f64>() / d as f64;
        }
    });
    let classes = raters.num_classes();
    Ok(SoftLabelVolume::from_parts(
        raters.geometry().clone(),
        classes,
        to_class_major(&mean, classes),
    ))
}

/// Per-voxel vote fractions of the raters' one-hot labels.
pub fn moh_fuse(raters: &RaterSet) -> SoftLabelVolume {
    let classes = raters.num_classes();
    let n = raters.geometry().num_voxels();
    let mut counts = vec![0u32; n * classes];
    for r in raters.raters() {
        for (v, &l) in r.data().iter().enumerate() {
            counts[l as usize * n + v] += 1;
        }
    }
    let d = raters.len() as f64;
    let data = counts.iter().map(|&c| (c as f64 / d) as f32).collect();
    SoftLabelVolume::from_parts(raters.geometry().clone(), classes, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels2(dims: [usize; 2], classes: usize, data: Vec<u8>) -> LabelVolume {
        LabelVolume::new(Geometry::isotropic(&dims).unwrap(), classes, data).unwrap()
    }

    fn k2() -> SvlsKernel {
        svls_weights(2, 1.0).unwrap()
    }

    #[test]
    fn ls_spot_values() {
        let v = label_smooth(&labels2([1, 1], 4, vec![0]), 0.1).unwrap();
        assert_eq!(v.voxel(0), vec![0.925, 0.025, 0.025, 0.025]);
        let v = label_smooth(&labels2([1, 1], 2, vec![1]), 0.3).unwrap();
        assert_eq!(v.voxel(0), vec![0.15, 0.85]);
    }

    #[test]
    fn ls_alpha_zero_is_one_hot() {
        let l = labels2([2, 3], 3, vec![0, 1, 2, 2, 1, 0]);
        assert_eq!(label_smooth(&l, 0.0).unwrap(), one_hot_encode(&l));
    }

    #[test]
    fn ls_rejects_alpha_out_of_range() {
        let l = labels2([1, 1], 2, vec![0]);
        assert!(label_smooth(&l, -0.1).is_err());
        assert!(label_smooth(&l, 1.5).is_err());
    }

    #[test]
    fn svls_homogeneous_is_one_hot() {
        let l = labels2([5, 5], 2, vec![1; 25]);
        let s = svls_smooth(&l, &k2()).unwrap();
        assert!(s.plane(1).iter().all(|&p| p == 1.0));
        assert!(s.plane(0).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn svls_isolated_center_is_even() {
        let mut data = vec![1u8; 9];
        data[4] = 0;
        let s = svls_smooth(&labels2([3, 3], 2, data), &k2()).unwrap();
        assert_eq!(s.voxel_at(&[1, 1]), vec![0.5, 0.5]);
    }

    #[test]
    fn svls_straight_boundary_voxel() {
        #[rustfmt::skip]
        let data = vec![
            1, 1, 1,
            0, 0, 0,
            0, 0, 0,
        ];
        let s = svls_smooth(&labels2([3, 3], 2, data), &k2()).unwrap();
        let p = s.voxel_at(&[1, 1]);
        assert!((p[1] as f64 - 0.172193).abs() < 1e-6, "{p:?}");
        assert!((p[0] as f64 - 0.827807).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn svls_rank_mismatch() {
        let l = labels2([3, 3], 2, vec![0; 9]);
        let k3 = svls_weights(3, 1.0).unwrap();
        assert!(matches!(
            svls_smooth(&l, &k3),
            Err(Error::RankMismatch { kernel: 3, volume: 2 })
        ));
    }

    #[test]
    fn msvls_single_rater_matches_svls() {
        let l = labels2([4, 4], 3, vec![0, 1, 2, 0, 1, 1, 2, 0, 0, 2, 2, 1, 0, 0, 1, 2]);
        let set = RaterSet::new(vec![l.clone()]).unwrap();
        assert_eq!(msvls_fuse(&set, &k2()).unwrap(), svls_smooth(&l, &k2()).unwrap());
    }

    #[test]
    fn msvls_unanimous_interior() {
        let l = labels2([5, 5], 2, vec![1; 25]);
        let set = RaterSet::new(vec![l.clone(), l.clone(), l]).unwrap();
        let f = msvls_fuse(&set, &k2()).unwrap();
        assert_eq!(f.voxel_at(&[2, 2]), vec![0.0, 1.0]);
    }

    #[test]
    fn msvls_mean_of_two() {
        // rater A homogeneous class 1 (p1 = 1.0), rater B isolated center (p1 = 0.5).
        let a = labels2([3, 3], 2, vec![1; 9]);
        let mut b = vec![0u8; 9];
        b[4] = 1;
        let b = labels2([3, 3], 2, b);
        let f = msvls_fuse(&RaterSet::new(vec![a, b]).unwrap(), &k2()).unwrap();
        assert_eq!(f.voxel_at(&[1, 1])[1], 0.75);
    }

    #[test]
    fn moh_counts() {
        let mk = |l: u8| labels2([1, 1], 2, vec![l]);
        let set = RaterSet::new(vec![mk(1), mk(1), mk(0), mk(1)]).unwrap();
        assert_eq!(moh_fuse(&set).voxel(0), vec![0.25, 0.75]);
        let unanimous = RaterSet::new(vec![mk(0), mk(0)]).unwrap();
        assert_eq!(moh_fuse(&unanimous).voxel(0), vec![1.0, 0.0]);
    }

    #[test]
    fn rater_set_validation() {
        assert!(matches!(RaterSet::new(vec![]), Err(Error::EmptyRaterSet)));
        let a = labels2([2, 2], 2, vec![0; 4]);
        let b = labels2([2, 3], 2, vec![0; 6]);
        let c = labels2([2, 2], 3, vec![0; 4]);
        assert!(RaterSet::new(vec![a.clone(), b]).is_err());
        assert!(RaterSet::new(vec![a, c]).is_err());
    }

    #[test]
    fn spec_validation() {
        use SmoothingMethod::*;
        assert!(SmoothingSpec::new(Ls, None, None).is_err());
        assert!(SmoothingSpec::new(Ls, Some(0.1), Some(1.0)).is_err());
        assert!(SmoothingSpec::new(Svls, Some(0.1), None).is_err());
        assert!(SmoothingSpec::new(Svls, None, Some(0.0)).is_err());
        let s = SmoothingSpec::new(Svls, None, None).unwrap();
        assert_eq!(s.sigma, 1.0);
        assert_eq!("moh".parse::<SmoothingMethod>().unwrap(), Moh);
        assert!("median".parse::<SmoothingMethod>().is_err());
    }
}
