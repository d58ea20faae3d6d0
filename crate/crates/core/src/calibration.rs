//! Reliability diagrams, expected calibration error (ECE) and thresholded
//! adaptive calibration error (TACE) over probability volumes.
//!
//! Confidence is the per-voxel maximum class probability; a voxel is correct
//! when its argmax (lowest index on ties) equals the reference label. ECE bins
//! are equal-width over (0, 1], left-open and right-closed, with a confidence
//! of exactly 0 joining the first bin.
//!
//! TACE works per class on the raw class probabilities above a threshold.
//! Retained samples are sorted and cut into equal-count ranges; a cut never
//! separates equal probabilities, so tied samples always share a range and
//! some ranges may merge. The per-class score is the unweighted mean of the
//! range gaps and TACE is the unweighted mean over classes with any samples.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel;
use crate::volume::{LabelVolume, SoftLabelVolume};

pub const DEFAULT_ECE_BINS: usize = 15;
pub const DEFAULT_TACE_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_TACE_RANGES: usize = 15;

const CHUNK: usize = 1 << 15;

/// Which voxels enter the calibration statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    #[default]
    All,
    /// Voxels whose reference label is not class 0.
    ForegroundOnly,
}

impl Population {
    fn includes(self, label: u8) -> bool {
        match self {
            Population::All => true,
            Population::ForegroundOnly => label != 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

impl ReliabilityBin {
    pub fn gap(&self) -> Option<f64> {
        Some((self.accuracy? - self.mean_confidence?).abs())
    }
}

fn check_pair(reference: &LabelVolume, predicted: &SoftLabelVolume) -> Result<()> {
    reference.geometry().ensure_same_dims(predicted.geometry())?;
    if reference.num_classes() != predicted.num_classes() {
        return Err(Error::ClassCountMismatch {
            left: reference.num_classes(),
            right: predicted.num_classes(),
        });
    }
    Ok(())
}

fn bin_edge(b: usize, num_bins: usize) -> f64 {
    b as f64 / num_bins as f64
}

/// Bin holding `confidence` among `num_bins` equal-width bins over (0, 1].
pub fn bin_index(confidence: f64, num_bins: usize) -> usize {
    let last = num_bins - 1;
    let mut b = ((confidence * num_bins as f64).ceil() as isize - 1).clamp(0, last as isize) as usize;
    while b > 0 && confidence <= bin_edge(b, num_bins) {
        b -= 1;
    }
    while b < last && confidence > bin_edge(b + 1, num_bins) {
        b += 1;
    }
    b
}

/// Maximum probability and its class (lowest index on ties).
fn confidence_at(predicted: &SoftLabelVolume, v: usize) -> (f64, u8) {
    let mut best = 0;
    let mut best_p = predicted.probability(v, 0);
    for c in 1..predicted.num_classes() {
        let p = predicted.probability(v, c);
        if p > best_p {
            best = c;
            best_p = p;
        }
    }
    (f64::from(best_p), best as u8)
}

#[derive(Clone, Default)]
struct BinAcc {
    count: usize,
    correct: usize,
    confidence: f64,
}

pub fn reliability(
    reference: &LabelVolume,
    predicted: &SoftLabelVolume,
    num_bins: usize,
) -> Result<Vec<ReliabilityBin>> {
    reliability_for(reference, predicted, num_bins, Population::All)
}

pub fn reliability_for(
    reference: &LabelVolume,
    predicted: &SoftLabelVolume,
    num_bins: usize,
    population: Population,
) -> Result<Vec<ReliabilityBin>> {
    check_pair(reference, predicted)?;
    if num_bins == 0 {
        return Err(Error::param("num_bins", "must be at least 1"));
    }
    let n = reference.geometry().num_voxels();
    let labels = reference.data();
    // fixed-size chunks merged in order keep the f64 sums thread-count independent
    let partials = parallel::map_indices(n.div_ceil(CHUNK), |chunk| {
        let mut acc = vec![BinAcc::default(); num_bins];
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(n);
        for (v, &label) in labels[start..end].iter().enumerate().map(|(i, l)| (start + i, l)) {
            if !population.includes(label) {
                continue;
            }
            let (conf, class) = confidence_at(predicted, v);
            let slot = &mut acc[bin_index(conf, num_bins)];
            slot.count += 1;
            slot.correct += (class == label) as usize;
            slot.confidence += conf;
        }
        acc
    });
    let mut total = vec![BinAcc::default(); num_bins];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.count += p.count;
            t.correct += p.correct;
            t.confidence += p.confidence;
        }
    }
    Ok(total
        .into_iter()
        .enumerate()
        .map(|(b, acc)| {
            let occupied = acc.count > 0;
            ReliabilityBin {
                lower: bin_edge(b, num_bins),
                upper: bin_edge(b + 1, num_bins),
                count: acc.count,
                mean_confidence: occupied.then(|| acc.confidence / acc.count as f64),
                accuracy: occupied.then(|| acc.correct as f64 / acc.count as f64),
            }
        })
        .collect())
}

/// Count-weighted mean of per-bin |accuracy - mean confidence|.
pub fn ece(bins: &[ReliabilityBin], total_count: usize) -> Result<f64> {
    if total_count == 0 {
        return Err(Error::InvalidBins("total count is zero".into()));
    }
    let counted: usize = bins.iter().map(|b| b.count).sum();
    if counted != total_count {
        return Err(Error::InvalidBins(format!(
            "bins hold {counted} samples, total is {total_count}"
        )));
    }
    bins.iter()
        .filter(|b| b.count > 0)
        .map(|b| {
            let gap = b.gap().ok_or_else(|| {
                Error::InvalidBins(format!("bin ({}, {}] has samples but no statistics", b.lower, b.upper))
            })?;
            Ok(b.count as f64 / total_count as f64 * gap)
        })
        .sum()
}

pub fn tace(
    reference: &LabelVolume,
    predicted: &SoftLabelVolume,
    threshold: f64,
    num_ranges: usize,
) -> Result<f64> {
    tace_for(reference, predicted, threshold, num_ranges, Population::All)
}

pub fn tace_for(
    reference: &LabelVolume,
    predicted: &SoftLabelVolume,
    threshold: f64,
    num_ranges: usize,
    population: Population,
) -> Result<f64> {
    check_pair(reference, predicted)?;
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::param("tace_threshold", format!("must be in [0, 1), got {threshold}")));
    }
    if num_ranges == 0 {
        return Err(Error::param("tace_ranges", "must be at least 1"));
    }
    let labels = reference.data();
    let per_class = parallel::map_indices(reference.num_classes(), |c| {
        let mut samples: Vec<(f32, bool)> = predicted
            .plane(c)
            .iter()
            .zip(labels)
            .filter(|&(&p, &l)| population.includes(l) && f64::from(p) > threshold)
            .map(|(&p, &l)| (p, l as usize == c))
            .collect();
        if samples.is_empty() {
            return None;
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(adaptive_gap(&samples, num_ranges))
    });
    let scored: Vec<f64> = per_class.into_iter().flatten().collect();
    if scored.is_empty() {
        return Err(Error::NoCalibrationSamples { threshold });
    }
    Ok(scored.iter().sum::<f64>() / scored.len() as f64)
}

/// Mean |frequency - mean probability| over equal-count ranges of sorted samples.
fn adaptive_gap(sorted: &[(f32, bool)], num_ranges: usize) -> f64 {
    let m = sorted.len();
    let mut cuts: Vec<usize> = (0..=num_ranges).map(|i| i * m / num_ranges).collect();
    for cut in cuts.iter_mut() {
        while *cut > 0 && *cut < m && sorted[*cut - 1].0 == sorted[*cut].0 {
            *cut += 1;
        }
    }
    cuts.dedup();
    let gaps: Vec<f64> = cuts
        .windows(2)
        .map(|w| {
            let range = &sorted[w[0]..w[1]];
            let k = range.len() as f64;
            let freq = range.iter().filter(|s| s.1).count() as f64 / k;
            let mean = range.iter().map(|s| f64::from(s.0)).sum::<f64>() / k;
            (freq - mean).abs()
        })
        .collect();
    gaps.iter().sum::<f64>() / gaps.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationOptions {
    pub num_bins: usize,
    pub tace_threshold: f64,
    pub tace_ranges: usize,
    pub population: Population,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            num_bins: DEFAULT_ECE_BINS,
            tace_threshold: DEFAULT_TACE_THRESHOLD,
            tace_ranges: DEFAULT_TACE_RANGES,
            population: Population::All,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub ece: f64,
    pub tace: f64,
    pub num_bins: usize,
    pub tace_threshold: f64,
    pub tace_ranges: usize,
    pub population: Population,
    pub total_count: usize,
    pub bins: Vec<ReliabilityBin>,
}

pub fn calibrate_report(
    reference: &LabelVolume,
    predicted: &SoftLabelVolume,
    options: &CalibrationOptions,
) -> Result<CalibrationReport> {
    let bins = reliability_for(reference, predicted, options.num_bins, options.population)?;
    let total_count = bins.iter().map(|b| b.count).sum();
    Ok(CalibrationReport {
        ece: ece(&bins, total_count)?,
        tace: tace_for(
            reference,
            predicted,
            options.tace_threshold,
            options.tace_ranges,
            options.population,
        )?,
        num_bins: options.num_bins,
        tace_threshold: options.tace_threshold,
        tace_ranges: options.tace_ranges,
        population: options.population,
        total_count,
        bins,
    })
}
