//! JSON and CSV serialization of metric reports.
//!
//! Numbers are rounded to six significant digits and fields always appear in
//! the same order, so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::calibration::CalibrationReport;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::kernel::SvlsKernel;
use crate::loss::LossReport;
use crate::seg_metrics::SegmentationScores;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::param("format", format!("unknown report format `{other}`"))),
        }
    }
}

/// `x` with six significant digits in plain decimal notation.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" { "0".into() } else { s }
}

fn round_sig6(x: f64) -> f64 {
    format_sig6(x).parse().unwrap_or(x)
}

/// Recursively rounds every float in a JSON tree.
fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            serde_json::Number::from_f64(round_sig6(n.as_f64().unwrap()))
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&round_json(v)).expect("json value serializes");
    s.push('\n');
    s
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig6).unwrap_or_default()
}

pub trait Report {
    fn to_json(&self) -> String;
    fn to_csv(&self) -> String;
}

impl Report for CalibrationReport {
    fn to_json(&self) -> String {
        to_json_string(self)
    }

    /// The reliability table: one row per bin, empty statistics for empty bins.
    fn to_csv(&self) -> String {
        let mut out = String::from("lower,upper,count,mean_confidence,accuracy\n");
        for b in &self.bins {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_sig6(b.lower),
                format_sig6(b.upper),
                b.count,
                opt(b.mean_confidence),
                opt(b.accuracy)
            );
        }
        out
    }
}

impl Report for SegmentationScores {
    fn to_json(&self) -> String {
        to_json_string(self)
    }

    fn to_csv(&self) -> String {
        let mut out = String::from("name,classes,dsc,sd,tolerance_mm\n");
        for r in &self.rows {
            let classes: Vec<String> = r.classes.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.name,
                classes.join("+"),
                format_sig6(r.dsc),
                format_sig6(r.sd),
                format_sig6(self.tolerance_mm)
            );
        }
        out
    }
}

impl Report for LossReport {
    fn to_json(&self) -> String {
        to_json_string(&self.clone().without_per_voxel())
    }

    fn to_csv(&self) -> String {
        format!(
            "reduction,total,num_voxels\n{},{},{}\n",
            match self.reduction {
                crate::loss::Reduction::Mean => "mean",
                crate::loss::Reduction::Sum => "sum",
            },
            format_sig6(self.total),
            self.num_voxels
        )
    }
}

impl Report for SvlsKernel {
    fn to_json(&self) -> String {
        let taps: Vec<Value> = self
            .offsets()
            .map(|(o, w)| json!({ "offset": o, "weight": w }))
            .collect();
        to_json_string(&json!({
            "rank": self.rank(),
            "sigma": self.sigma(),
            "center": self.center(),
            "total_weight": self.total_weight(),
            "taps": taps,
        }))
    }

    fn to_csv(&self) -> String {
        let mut out = String::from(if self.rank() == 3 { "dz,dy,dx,weight\n" } else { "dy,dx,weight\n" });
        for (o, w) in self.offsets() {
            let cells: Vec<String> = o.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{},{}", cells.join(","), format_sig6(w));
        }
        out
    }
}

pub fn render<R: Report + ?Sized>(report: &R, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv(),
    }
}

/// Writes the rendered report atomically.
pub fn write_report<R: Report + ?Sized>(report: &R, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    write_atomic(path.as_ref(), render(report, format).as_bytes())
}
