use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{debug, info};
use svls_core::io::{read_volume, read_volume_with_tolerance, write_atomic, Provenance, Volume};
use svls_core::loss::{cross_entropy_logits, cross_entropy_with, softmax, Reduction};
use svls_core::phantom::{generate_labels, generate_prediction, generate_rater_set, PhantomKind, PhantomSpec};
use svls_core::report::{render, write_report, ReportFormat};
use svls_core::seg_metrics::{parse_region_map, segmentation_scores};
use svls_core::volume::PREDICTION_TOLERANCE;
use svls_core::{
    argmax_labels, calibrate_report, one_hot_encode, svls_weights, CalibrationOptions, LabelVolume,
    Population, RaterSet, SmoothingMethod, SmoothingSpec, SoftLabelVolume,
};

use crate::args::{
    EncodeArgs, EvaluateArgs, FuseArgs, KernelArgs, KernelFormat, LossArgs, PhantomArgs, PredKind,
    ReductionArg,
};
use crate::fail::Failure;

pub const VOLUME_EXTENSION: &str = "svlv";

/// Volume files directly inside `dir`, sorted by name.
fn volume_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == VOLUME_EXTENSION) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::validation(format!("{}: no .{VOLUME_EXTENSION} files", dir.display())));
    }
    Ok(files)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))
}

fn load_labels(path: &Path) -> Result<LabelVolume, Failure> {
    Ok(read_volume(path)?.into_labels()?)
}

/// `(input, output)` pairs: the pair itself for files, or every volume of
/// the input directory mirrored by name into the output directory.
fn batch_pairs(input: &Path, out: &Path) -> Result<Vec<(PathBuf, PathBuf)>, Failure> {
    if !input.is_dir() {
        return Ok(vec![(input.to_path_buf(), out.to_path_buf())]);
    }
    create_dir(out)?;
    Ok(volume_files(input)?
        .into_iter()
        .map(|f| {
            let o = out.join(f.file_name().expect("listed files have names"));
            (f, o)
        })
        .collect())
}

pub fn run_kernel(args: &KernelArgs) -> Result<(), Failure> {
    let kernel = svls_weights(args.rank as usize, args.sigma)?;
    let text = match args.format {
        KernelFormat::Json => render(&kernel, ReportFormat::Json),
        KernelFormat::Text => kernel.to_text(),
    };
    match &args.out {
        Some(path) => Ok(write_atomic(path, text.as_bytes())?),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(format!("stdout: {e}"))),
    }
}

pub fn run_encode(args: &EncodeArgs) -> Result<(), Failure> {
    let spec = SmoothingSpec::new(args.method.into(), args.alpha, args.sigma)?;
    info!("encode: resolved {spec:?}");
    for (input, output) in batch_pairs(&args.input, &args.out)? {
        let labels = load_labels(&input)?;
        let soft = spec.encode(&labels)?;
        let provenance = Provenance {
            method: Some(spec.method.as_str().to_string()),
            alpha: spec.alpha,
            sigma: (spec.method == SmoothingMethod::Svls).then_some(spec.sigma),
            sources: vec![file_name(&input)],
            ..Default::default()
        };
        svls_core::write_volume(&soft.into(), &output, provenance)?;
        debug!("encode: {} -> {}", input.display(), output.display());
    }
    Ok(())
}

pub fn run_fuse(args: &FuseArgs) -> Result<(), Failure> {
    let spec = SmoothingSpec::new(args.method.into(), None, args.sigma)?;
    info!("fuse: resolved {spec:?}");
    let files = match args.inputs.as_slice() {
        [single] if single.is_dir() => volume_files(single)?,
        many => many.to_vec(),
    };
    let raters = files.iter().map(|f| load_labels(f)).collect::<Result<Vec<_>, _>>()?;
    info!("fuse: {} raters", raters.len());
    let fused = spec.fuse(&RaterSet::new(raters)?)?;
    let provenance = Provenance {
        method: Some(spec.method.as_str().to_string()),
        sigma: (spec.method == SmoothingMethod::Msvls).then_some(spec.sigma),
        sources: files.iter().map(|f| file_name(f)).collect(),
        ..Default::default()
    };
    Ok(svls_core::write_volume(&fused.into(), &args.out, provenance)?)
}

fn loss_target(path: &Path) -> Result<SoftLabelVolume, Failure> {
    match read_volume(path)? {
        Volume::Labels(l) => Ok(one_hot_encode(&l)),
        Volume::Probabilities(p) => Ok(p),
        Volume::Logits(_) => Err(Failure::validation(format!(
            "{}: the target must hold labels or probabilities, not logits",
            path.display()
        ))),
    }
}

pub fn run_loss(args: &LossArgs) -> Result<(), Failure> {
    let reduction = match args.reduction {
        ReductionArg::Mean => Reduction::Mean,
        ReductionArg::Sum => Reduction::Sum,
    };
    let jobs = if args.target.is_dir() {
        create_dir(&args.out)?;
        volume_files(&args.target)?
            .into_iter()
            .map(|t| {
                let name = file_name(&t);
                let report = args.out.join(Path::new(&name).with_extension("json"));
                (t, args.pred.join(&name), report)
            })
            .collect()
    } else {
        vec![(args.target.clone(), args.pred.clone(), args.out.clone())]
    };
    for (target, pred, out) in jobs {
        let target = loss_target(&target)?;
        let pred_volume = read_volume_with_tolerance(&pred, PREDICTION_TOLERANCE)?;
        let report = match (args.pred_kind, pred_volume) {
            (None | Some(PredKind::Probs), Volume::Probabilities(p)) => cross_entropy_with(&target, &p, reduction)?,
            (None | Some(PredKind::Logits), Volume::Logits(z)) => cross_entropy_logits(&target, &z, reduction)?,
            (_, other) => {
                return Err(Failure::validation(format!(
                    "{}: prediction holds {}, expected {}",
                    pred.display(),
                    other.dtype().name(),
                    match args.pred_kind {
                        Some(PredKind::Logits) => "logits",
                        _ => "probabilities",
                    }
                )))
            }
        };
        info!("loss: {} = {}", pred.display(), report.total);
        write_report(&report, &out, ReportFormat::Json)?;
    }
    Ok(())
}

/// Hard labels for the overlap metrics and probabilities for calibration.
fn prediction_pair(path: &Path) -> Result<(LabelVolume, SoftLabelVolume), Failure> {
    match read_volume_with_tolerance(path, PREDICTION_TOLERANCE)? {
        Volume::Labels(l) => {
            let p = one_hot_encode(&l);
            Ok((l, p))
        }
        Volume::Probabilities(p) => Ok((argmax_labels(&p)?, p)),
        Volume::Logits(z) => {
            let p = softmax(&z);
            Ok((argmax_labels(&p)?, p))
        }
    }
}

pub const EVALUATE_OUTPUTS: [&str; 4] = ["segmentation.csv", "segmentation.json", "calibration.json", "reliability.csv"];

pub fn run_evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let regions = match &args.region_merge {
        Some(map) => parse_region_map(map)?,
        None => Vec::new(),
    };
    let options = CalibrationOptions {
        num_bins: args.ece_bins,
        tace_threshold: args.tace_threshold,
        tace_ranges: args.tace_ranges,
        population: if args.foreground_only { Population::ForegroundOnly } else { Population::All },
    };
    if !(args.sd_tolerance.is_finite() && args.sd_tolerance >= 0.0) {
        return Err(Failure::validation(format!("--sd-tolerance must be >= 0, got {}", args.sd_tolerance)));
    }
    info!("evaluate: resolved {options:?}, sd tolerance {} mm, {} merged regions", args.sd_tolerance, regions.len());

    let jobs = if args.reference.is_dir() {
        volume_files(&args.reference)?
            .into_iter()
            .map(|r| {
                let name = file_name(&r);
                let stem = Path::new(&name).file_stem().unwrap_or_default().to_owned();
                (r, args.pred.join(&name), args.out.join(stem))
            })
            .collect()
    } else {
        vec![(args.reference.clone(), args.pred.clone(), args.out.clone())]
    };
    for (reference, pred, out) in jobs {
        let reference = load_labels(&reference)?;
        let (hard, soft) = prediction_pair(&pred)?;
        let scores = segmentation_scores(&reference, &hard, args.sd_tolerance, &regions, args.composite)?;
        let calibration = calibrate_report(&reference, &soft, &options)?;
        create_dir(&out)?;
        let [seg_csv, seg_json, cal_json, rel_csv] = EVALUATE_OUTPUTS.map(|n| out.join(n));
        write_report(&scores, seg_csv, ReportFormat::Csv)?;
        write_report(&scores, seg_json, ReportFormat::Json)?;
        write_report(&calibration, cal_json, ReportFormat::Json)?;
        write_report(&calibration, rel_csv, ReportFormat::Csv)?;
        info!("evaluate: {} ece {} tace {}", pred.display(), calibration.ece, calibration.tace);
    }
    Ok(())
}

/// `<dir>/<stem>.ref.svlv` next to a prediction written to `out`.
pub fn reference_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.ref.{VOLUME_EXTENSION}"))
}

pub fn run_phantom(args: &PhantomArgs) -> Result<(), Failure> {
    let min_classes = match args.kind {
        PhantomKind::NestedSpheres | PhantomKind::Fig3Multirater => 3,
        _ => 2,
    };
    let classes = args.classes.unwrap_or(min_classes);
    if args.strength.is_some() && args.kind != PhantomKind::MiscalibratedPred {
        return Err(Failure::validation(format!("--strength only applies to {}", PhantomKind::MiscalibratedPred)));
    }
    let spec = PhantomSpec::new(args.kind, &args.dims.0, classes)
        .with_seed(args.seed)
        .with_strength(args.strength.unwrap_or(0.0));
    info!("phantom: resolved {spec:?}");

    if let (Some(raters), Some(jitter)) = (args.raters, args.jitter) {
        let set = generate_rater_set(&spec, raters, jitter)?;
        create_dir(&args.out)?;
        for (i, rater) in set.raters().iter().enumerate() {
            let path = args.out.join(format!("rater_{i:02}.{VOLUME_EXTENSION}"));
            svls_core::write_volume(&rater.clone().into(), path, Provenance::default())?;
        }
        return Ok(());
    }
    if args.kind == PhantomKind::MiscalibratedPred {
        let (labels, pred) = generate_prediction(&spec)?;
        svls_core::write_volume(&pred.into(), &args.out, Provenance::default())?;
        svls_core::write_volume(&labels.into(), reference_path(&args.out), Provenance::default())?;
        return Ok(());
    }
    Ok(svls_core::write_volume(&generate_labels(&spec)?.into(), &args.out, Provenance::default())?)
}
