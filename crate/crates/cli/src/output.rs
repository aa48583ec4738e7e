//! Field files, reports and the run manifest.
//!
//! Field records carry every float as a decimal with 17 significant digits,
//! enough to reproduce each `f64` bit for bit when parsed back.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use wigmat::{ComponentErrors, Grid, PhaseSpacePoint, WignerMatrixField, WignerMatrixSample};

/// Column order of both the JSON records and the CSV export.
pub const COLUMNS: [&str; 11] = [
    "re_alpha",
    "im_alpha",
    "w11",
    "w22",
    "re_w12",
    "im_w12",
    "stderr_w11",
    "stderr_w22",
    "stderr_re_w12",
    "stderr_im_w12",
    "leakage_bound",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldRecord {
    pub re_alpha: f64,
    pub im_alpha: f64,
    pub w11: f64,
    pub w22: f64,
    pub re_w12: f64,
    pub im_w12: f64,
    pub stderr_w11: Option<f64>,
    pub stderr_w22: Option<f64>,
    pub stderr_re_w12: Option<f64>,
    pub stderr_im_w12: Option<f64>,
    pub leakage_bound: Option<f64>,
}

impl FieldRecord {
    pub fn from_sample(s: &WignerMatrixSample, leakage_bound: Option<f64>) -> Self {
        let e = s.stderr;
        Self {
            re_alpha: s.alpha.re(),
            im_alpha: s.alpha.im(),
            w11: s.w[0][0].re,
            w22: s.w[1][1].re,
            re_w12: s.w[0][1].re,
            im_w12: s.w[0][1].im,
            stderr_w11: e.map(|e| e.w11),
            stderr_w22: e.map(|e| e.w22),
            stderr_re_w12: e.map(|e| e.re_w12),
            stderr_im_w12: e.map(|e| e.im_w12),
            leakage_bound,
        }
    }

    pub fn to_sample(&self) -> WignerMatrixSample {
        let mut s = WignerMatrixSample::from_components(
            PhaseSpacePoint::new(self.re_alpha, self.im_alpha),
            self.w11,
            self.w22,
            self.re_w12,
            self.im_w12,
        );
        if let (Some(w11), Some(w22), Some(re_w12), Some(im_w12)) =
            (self.stderr_w11, self.stderr_w22, self.stderr_re_w12, self.stderr_im_w12)
        {
            s.stderr = Some(ComponentErrors { w11, w22, re_w12, im_w12 });
        }
        s
    }

    fn values(&self) -> [Option<f64>; 11] {
        [
            Some(self.re_alpha),
            Some(self.im_alpha),
            Some(self.w11),
            Some(self.w22),
            Some(self.re_w12),
            Some(self.im_w12),
            self.stderr_w11,
            self.stderr_w22,
            self.stderr_re_w12,
            self.stderr_im_w12,
            self.leakage_bound,
        ]
    }
}

/// Header of a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMetadata {
    /// `exact` or `sampled`.
    pub kind: String,
    pub grid: Grid,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub dimension: usize,
    pub fock_count: Option<usize>,
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDocument {
    pub metadata: FieldMetadata,
    pub records: Vec<FieldRecord>,
}

/// `{:.16e}`: 17 significant digits. Non-finite values become `null`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn raw(x: Option<f64>) -> Box<RawValue> {
    let text = x.map_or_else(|| "null".to_string(), format_float);
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

struct RawRecord<'a>(&'a FieldRecord);

impl Serialize for RawRecord<'_> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(COLUMNS.len()))?;
        for (k, v) in COLUMNS.iter().zip(self.0.values()) {
            map.serialize_entry(k, &raw(v))?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct RawDocument<'a> {
    metadata: &'a FieldMetadata,
    records: Vec<RawRecord<'a>>,
}

impl FieldDocument {
    pub fn new(metadata: FieldMetadata, field: &WignerMatrixField, leakage_bound: Option<f64>) -> Self {
        Self {
            metadata,
            records: field
                .samples
                .iter()
                .map(|s| FieldRecord::from_sample(s, leakage_bound))
                .collect(),
        }
    }

    pub fn to_field(&self) -> anyhow::Result<WignerMatrixField> {
        Ok(WignerMatrixField::new(
            self.metadata.grid,
            self.records.iter().map(FieldRecord::to_sample).collect(),
        )?)
    }

    pub fn to_json(&self) -> String {
        let doc = RawDocument {
            metadata: &self.metadata,
            records: self.records.iter().map(RawRecord).collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("field document serialises");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let doc: Self = serde_json::from_str(text).context("invalid field document")?;
        if doc.records.len() != doc.metadata.grid.len() {
            bail!(
                "field document holds {} records for a grid of {} points",
                doc.records.len(),
                doc.metadata.grid.len()
            );
        }
        Ok(doc)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for r in &self.records {
            w.write_record(r.values().map(|v| v.map(format_float).unwrap_or_default()))?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn from_csv(metadata: FieldMetadata, text: &str) -> anyhow::Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != COLUMNS {
            bail!("unexpected CSV columns {header:?}");
        }
        let records = rd
            .deserialize::<FieldRecord>()
            .collect::<Result<Vec<_>, _>>()
            .context("invalid CSV record")?;
        Ok(Self { metadata, records })
    }
}

/// Written file with its SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrittenFile {
    pub file: PathBuf,
    pub sha256: String,
}

/// Writes `contents` to `dir/name` and records its digest.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<WrittenFile> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(WrittenFile {
        file: PathBuf::from(name),
        sha256: hex::encode(Sha256::digest(contents.as_bytes())),
    })
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    text
}
