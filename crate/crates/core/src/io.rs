//! The `SVLV` volume container and its JSON sidecar.
//!
//! Binary layout, all integers little-endian:
//!
//! | bytes | field                                                  |
//! |-------|--------------------------------------------------------|
//! | 4     | magic `SVLV`                                           |
//! | 1     | version, currently 1                                   |
//! | 1     | dtype: 0 = u8 labels, 1 = f32 probabilities, 2 = f32 logits |
//! | 1     | spatial rank, 2 or 3                                   |
//! | 1     | reserved, 0                                            |
//! | 4     | class count (u32), only for dtypes 1 and 2             |
//! | 4·rank| spatial dims (u32 each), slowest axis first            |
//! | ...   | row-major payload; float volumes lead with the class axis |
//!
//! Spacing, class count of label volumes, class names and provenance live in
//! `<file>.json` next to the volume. Without a sidecar, spacing defaults to
//! 1 mm and a label volume's class count to `max(label) + 1` (at least 2).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::loss::LogitVolume;
use crate::volume::{Geometry, LabelVolume, SoftLabelVolume, SIMPLEX_TOLERANCE};

pub const MAGIC: [u8; 4] = *b"SVLV";
pub const VERSION: u8 = 1;
pub const TOOL_VERSION: &str = concat!("svls ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    Labels = 0,
    Probabilities = 1,
    Logits = 2,
}

impl Dtype {
    fn from_code(code: u8) -> Result<Self, FormatError> {
        match code {
            0 => Ok(Dtype::Labels),
            1 => Ok(Dtype::Probabilities),
            2 => Ok(Dtype::Logits),
            found => Err(FormatError::UnknownDtype { found }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::Labels => "label",
            Dtype::Probabilities => "probability",
            Dtype::Logits => "logit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Volume {
    Labels(LabelVolume),
    Probabilities(SoftLabelVolume),
    Logits(LogitVolume),
}

impl Volume {
    pub fn dtype(&self) -> Dtype {
        match self {
            Volume::Labels(_) => Dtype::Labels,
            Volume::Probabilities(_) => Dtype::Probabilities,
            Volume::Logits(_) => Dtype::Logits,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        match self {
            Volume::Labels(v) => v.geometry(),
            Volume::Probabilities(v) => v.geometry(),
            Volume::Logits(v) => v.geometry(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Volume::Labels(v) => v.num_classes(),
            Volume::Probabilities(v) => v.num_classes(),
            Volume::Logits(v) => v.num_classes(),
        }
    }

    pub fn into_labels(self) -> Result<LabelVolume> {
        match self {
            Volume::Labels(v) => Ok(v),
            other => Err(wrong_kind("label", other.dtype())),
        }
    }

    pub fn into_probabilities(self) -> Result<SoftLabelVolume> {
        match self {
            Volume::Probabilities(v) => Ok(v),
            other => Err(wrong_kind("probability", other.dtype())),
        }
    }
}

fn wrong_kind(expected: &'static str, found: Dtype) -> Error {
    FormatError::WrongKind {
        expected,
        found: found.name(),
    }
    .into()
}

impl From<LabelVolume> for Volume {
    fn from(v: LabelVolume) -> Self {
        Volume::Labels(v)
    }
}

impl From<SoftLabelVolume> for Volume {
    fn from(v: SoftLabelVolume) -> Self {
        Volume::Probabilities(v)
    }
}

impl From<LogitVolume> for Volume {
    fn from(v: LogitVolume) -> Self {
        Volume::Logits(v)
    }
}

/// How a volume was produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Input file names (not full paths).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<String>,
    #[serde(default)]
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidecarMeta {
    pub spacing: Vec<f64>,
    pub num_classes: usize,
    #[serde(default)]
    pub class_names: BTreeMap<String, String>,
    /// Dense class id to the original (possibly sparse) label value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_map: Option<BTreeMap<String, i64>>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl SidecarMeta {
    pub fn for_volume(volume: &Volume, provenance: Provenance) -> Self {
        let n = volume.num_classes();
        Self {
            spacing: volume.geometry().spacing().to_vec(),
            num_classes: n,
            class_names: (0..n).map(|c| (c.to_string(), format!("class_{c}"))).collect(),
            label_map: None,
            provenance: Provenance {
                tool_version: TOOL_VERSION.to_string(),
                ..provenance
            },
        }
    }

    fn validate(&self, rank: usize) -> Result<(), FormatError> {
        let bad = |field, reason: String| FormatError::InvalidSidecar { field, reason };
        if self.spacing.len() != rank {
            return Err(bad("spacing", format!("{} values for rank {rank}", self.spacing.len())));
        }
        if let Some(s) = self.spacing.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(bad("spacing", format!("{s} is not positive")));
        }
        if self.num_classes < 2 {
            return Err(bad("num_classes", format!("{} is below 2", self.num_classes)));
        }
        if !self.class_names.is_empty() {
            let expected: Vec<String> = (0..self.num_classes).map(|c| c.to_string()).collect();
            let mut keys: Vec<&String> = self.class_names.keys().collect();
            keys.sort_by_key(|k| k.parse::<usize>().unwrap_or(usize::MAX));
            if keys.len() != expected.len() || keys.iter().zip(&expected).any(|(k, e)| *k != e) {
                return Err(bad("class_names", format!("keys must cover 0..{}", self.num_classes)));
            }
        }
        Ok(())
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Binary encoding of `volume` (no sidecar).
pub fn encode_volume(volume: &Volume) -> Vec<u8> {
    let geometry = volume.geometry();
    let mut out = Vec::with_capacity(24 + geometry.num_voxels() * 4 * volume.num_classes());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[VERSION, volume.dtype() as u8, geometry.rank() as u8, 0]);
    if volume.dtype() != Dtype::Labels {
        out.extend_from_slice(&(volume.num_classes() as u32).to_le_bytes());
    }
    for &d in geometry.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match volume {
        Volume::Labels(v) => out.extend_from_slice(v.data()),
        Volume::Probabilities(v) => v.data().iter().for_each(|p| out.extend_from_slice(&p.to_le_bytes())),
        Volume::Logits(v) => v
            .data()
            .iter()
            .for_each(|&z| out.extend_from_slice(&(z as f32).to_le_bytes())),
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], FormatError> {
        let rest = self.bytes.len() - self.pos;
        if rest < n {
            return Err(FormatError::Truncated {
                section,
                expected: n,
                found: rest,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }
}

/// Decodes a volume with optional sidecar metadata, checking every invariant.
///
/// `tolerance` bounds the per-voxel probability-sum error accepted for
/// probability volumes.
pub fn decode_volume(bytes: &[u8], sidecar: Option<&SidecarMeta>, tolerance: f64) -> Result<Volume> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic { found: magic }.into());
    }
    let head = r.take(4, "header")?;
    if head[0] != VERSION {
        return Err(FormatError::UnsupportedVersion { found: head[0] }.into());
    }
    let dtype = Dtype::from_code(head[1])?;
    let rank = head[2] as usize;
    if !(2..=3).contains(&rank) {
        return Err(FormatError::InvalidHeader {
            field: "rank",
            reason: format!("{rank} is not 2 or 3"),
        }
        .into());
    }
    if head[3] != 0 {
        return Err(FormatError::InvalidHeader {
            field: "reserved",
            reason: format!("expected 0, found {}", head[3]),
        }
        .into());
    }
    let header_classes = match dtype {
        Dtype::Labels => None,
        _ => Some(r.u32("class count")? as usize),
    };
    let dims = (0..rank)
        .map(|_| r.u32("dims").map(|d| d as usize))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(axis) = dims.iter().position(|&d| d == 0) {
        return Err(FormatError::InvalidHeader {
            field: "dims",
            reason: format!("axis {axis} has zero extent"),
        }
        .into());
    }

    if let Some(meta) = sidecar {
        meta.validate(rank)?;
        if let Some(n) = header_classes {
            if n != meta.num_classes {
                return Err(FormatError::InvalidSidecar {
                    field: "num_classes",
                    reason: format!("{} disagrees with header class count {n}", meta.num_classes),
                }
                .into());
            }
        }
    }
    if let Some(n) = header_classes {
        if n < 2 {
            return Err(FormatError::InvalidHeader {
                field: "class count",
                reason: format!("{n} is below 2"),
            }
            .into());
        }
    }
    let spacing = sidecar.map_or_else(|| vec![1.0; rank], |m| m.spacing.clone());
    let geometry = Geometry::new(dims, spacing).map_err(|e| FormatError::InvalidHeader {
        field: "dims",
        reason: e.to_string(),
    })?;
    let voxels = geometry.num_voxels();
    let elem = if dtype == Dtype::Labels { 1 } else { 4 };
    let count = voxels
        .checked_mul(header_classes.unwrap_or(1))
        .and_then(|c| c.checked_mul(elem))
        .ok_or_else(|| FormatError::InvalidHeader {
            field: "dims",
            reason: "payload size overflows".into(),
        })?;
    let payload = r.take(count, "payload")?;
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes {
            extra: bytes.len() - r.pos,
        }
        .into());
    }

    let invalid_voxel = |geometry: &Geometry, v: usize, reason: String| -> Error {
        FormatError::InvalidVoxel {
            voxel: geometry.coords(v),
            reason,
        }
        .into()
    };
    let floats = || -> Vec<f32> {
        payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect()
    };
    match dtype {
        Dtype::Labels => {
            let classes = match sidecar {
                Some(m) => m.num_classes,
                None => (payload.iter().copied().max().unwrap_or(0) as usize + 1).max(2),
            };
            if let Some(v) = payload.iter().position(|&l| l as usize >= classes) {
                return Err(invalid_voxel(
                    &geometry,
                    v,
                    format!("label {} is not below num_classes {classes}", payload[v]),
                ));
            }
            Ok(Volume::Labels(LabelVolume::new(geometry, classes, payload.to_vec())?))
        }
        Dtype::Probabilities => {
            let classes = header_classes.unwrap();
            let data = floats();
            let unchecked = SoftLabelVolume::with_tolerance(geometry.clone(), classes, data, f64::INFINITY)?;
            if let Some((v, reason)) = unchecked.first_simplex_violation(tolerance) {
                return Err(invalid_voxel(&geometry, v, reason));
            }
            Ok(Volume::Probabilities(unchecked))
        }
        Dtype::Logits => {
            let classes = header_classes.unwrap();
            let data: Vec<f64> = floats().into_iter().map(f64::from).collect();
            if let Some(i) = data.iter().position(|z| !z.is_finite()) {
                return Err(invalid_voxel(&geometry, i % voxels, format!("non-finite logit {}", data[i])));
            }
            Ok(Volume::Logits(LogitVolume::new(geometry, classes, data)?))
        }
    }
}

fn read_sidecar(path: &Path) -> Result<Option<SidecarMeta>> {
    let side = sidecar_path(path);
    match fs::read_to_string(&side) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| {
            FormatError::InvalidSidecar {
                field: "json",
                reason: e.to_string(),
            }
            .into()
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(side, e)),
    }
}

/// Reads a volume and its sidecar, requiring probability sums within 1e-6.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    read_volume_with_tolerance(path, SIMPLEX_TOLERANCE)
}

pub fn read_volume_with_tolerance(path: impl AsRef<Path>, tolerance: f64) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let sidecar = read_sidecar(path)?;
    decode_volume(&bytes, sidecar.as_ref(), tolerance)
}

/// Writes the volume and its sidecar, each through a temporary file and rename.
pub fn write_volume(volume: &Volume, path: impl AsRef<Path>, provenance: Provenance) -> Result<()> {
    let path = path.as_ref();
    let meta = SidecarMeta::for_volume(volume, provenance);
    let mut json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    json.push('\n');
    write_atomic(path, &encode_volume(volume))?;
    write_atomic(&sidecar_path(path), json.as_bytes())
}

/// Replaces `path` with `bytes` so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
