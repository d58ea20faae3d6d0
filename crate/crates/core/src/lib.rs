//! Soft-label generation and calibration evaluation for segmentation label volumes.
//!
//! Spatially varying label smoothing (SVLS) turns a hard annotation into
//! per-voxel class probabilities by correlating each one-hot class plane with
//! a small Gaussian-derived stencil whose center weight equals the sum of its
//! neighbors. Interior voxels stay one-hot while voxels near a boundary share
//! probability with the neighboring classes. The crate also provides uniform
//! label smoothing, multi-rater fusion, cross-entropy with its gradient, and
//! the overlap and calibration metrics used to judge probabilistic outputs.

pub mod calibration;
pub mod edt;
pub mod error;
pub mod io;
pub mod kernel;
pub mod loss;
mod parallel;
pub mod phantom;
pub mod report;
pub mod seg_metrics;
pub mod softlabel;
pub mod volume;

pub use calibration::{
    calibrate_report, ece, reliability, tace, CalibrationOptions, CalibrationReport, Population,
    ReliabilityBin,
};
pub use error::{Error, FormatError, Result};
pub use io::{read_volume, write_volume, Volume};
pub use kernel::{gaussian_taps, svls_weights, SvlsKernel};
pub use loss::{ce_gradient, cross_entropy, softmax, LogitVolume, LossReport};
pub use phantom::{generate_labels, generate_miscalibrated, generate_rater_set, PhantomKind, PhantomSpec};
pub use report::{write_report, Report, ReportFormat};
pub use seg_metrics::{boundary_voxels, dice, surface_dice, BinaryMask, SegmentationScores};
pub use softlabel::{
    label_smooth, moh_fuse, msvls_fuse, svls_smooth, RaterSet, SmoothingMethod, SmoothingSpec,
};
pub use volume::{
    argmax_labels, one_hot_encode, replicate_pad, Geometry, LabelVolume, PaddedView,
    SoftLabelVolume,
};
