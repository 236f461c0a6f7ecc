//! File formats.
//!
//! - Score matrices: CSV with a header of score names and an optional
//!   leading `sample_id` column. Values are written in the shortest form
//!   that parses back to the same `f64`.
//! - Results, feature bundles: JSON objects with a `schema_version` field.
//! - Fitted statistics: JSON envelope `{schema_version, checksum, payload}`
//!   where `checksum` is the SHA-256 of the payload in canonical form
//!   (compact JSON with sorted keys).
//! - Run configuration: TOML, unknown keys rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::EvaluationReport;
use crate::multiple_testing::{DetectionResult, DetectorConfig, Method};
use crate::score_matrix::ScoreMatrix;
use crate::scores::{ClassStats, FeatureBundle, Ridge};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const STATS_SCHEMA_VERSION: u32 = 1;
pub const FEATURES_SCHEMA_VERSION: u32 = 1;

/// Header of the optional sample-id column.
pub const ID_COLUMN: &str = "sample_id";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_err(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("{source}:{line}"),
        message: message.into(),
    }
}

pub fn read_score_matrix(path: impl AsRef<Path>) -> Result<ScoreMatrix> {
    let path = path.as_ref();
    parse_score_matrix(open(path)?, &path.display().to_string())
}

/// Parses score-matrix CSV from any reader; `source` names it in errors.
pub fn parse_score_matrix<R: Read>(reader: R, source: &str) -> Result<ScoreMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(source, 1, e.to_string()))?
        .clone();
    let mut names: Vec<String> = header.iter().map(str::to_owned).collect();
    if names.iter().all(String::is_empty) {
        return Err(parse_err(source, 1, "empty header"));
    }
    let has_ids = names.first().is_some_and(|n| n == ID_COLUMN);
    if has_ids {
        names.remove(0);
    }
    let width = header.len();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                source,
                line,
                format!("row has {} fields, header has {width}", record.len()),
            ));
        }
        let mut fields = record.iter();
        if has_ids {
            ids.push(fields.next().unwrap_or_default().to_owned());
        }
        let row = fields
            .zip(&names)
            .map(|(f, name)| {
                let v: f64 = f.parse().map_err(|_| {
                    parse_err(
                        source,
                        line,
                        format!("column '{name}': '{f}' is not a number"),
                    )
                })?;
                if !v.is_finite() {
                    return Err(parse_err(
                        source,
                        line,
                        format!("column '{name}': non-finite value {f}"),
                    ));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    ScoreMatrix::with_ids(names, has_ids.then_some(ids), rows)
}

pub fn write_score_matrix(matrix: &ScoreMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let out = create(path)?;
    format_score_matrix(matrix, out).map_err(|e| Error::io(path, e))
}

/// Writes score-matrix CSV to any writer.
pub fn format_score_matrix<W: Write>(matrix: &ScoreMatrix, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ids = matrix.ids();
    let mut header: Vec<&str> = Vec::with_capacity(matrix.k() + 1);
    if ids.is_some() {
        header.push(ID_COLUMN);
    }
    header.extend(matrix.names().iter().map(String::as_str));
    w.write_record(&header)?;
    for (r, row) in matrix.rows().iter().enumerate() {
        let mut record: Vec<String> = Vec::with_capacity(row.len() + 1);
        if let Some(ids) = ids {
            record.push(ids[r].clone());
        }
        // Debug prints the shortest representation that round-trips
        record.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&record)?;
    }
    w.flush()
}

/// One scored test sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(flatten)]
    pub detection: DetectionResult,
}

/// Everything the `detect` and `evaluate` commands report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<DetectorConfig>,
    pub score_names: Vec<String>,
    pub n_cal: usize,
    pub samples: Vec<SampleResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationReport>,
}

impl ResultSet {
    pub fn new(config: Option<DetectorConfig>, score_names: Vec<String>, n_cal: usize) -> Self {
        Self {
            schema_version: RESULTS_SCHEMA_VERSION,
            config,
            score_names,
            n_cal,
            samples: Vec::new(),
            evaluation: None,
        }
    }

    pub fn n_ood(&self) -> usize {
        self.samples.iter().filter(|s| s.detection.is_ood).count()
    }
}

fn json_err(path: &Path, e: serde_json::Error) -> Error {
    if e.is_io() {
        Error::io(path, e.into())
    } else {
        Error::Json {
            path: path.to_owned(),
            source: e,
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| json_err(path, e))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_json_value(path: &Path) -> Result<serde_json::Value> {
    serde_json::from_reader(open(path)?).map_err(|e| json_err(path, e))
}

fn check_version(value: &serde_json::Value, what: &Path, expected: u32) -> Result<()> {
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Parse {
            location: what.display().to_string(),
            message: "missing or invalid schema_version".into(),
        })?;
    if found != expected as u64 {
        return Err(Error::Version {
            what: what.display().to_string(),
            found: found.try_into().unwrap_or(u32::MAX),
            expected,
        });
    }
    Ok(())
}

fn from_value<T: DeserializeOwned>(value: serde_json::Value, path: &Path) -> Result<T> {
    serde_json::from_value(value).map_err(|e| json_err(path, e))
}

pub fn write_results(results: &ResultSet, path: impl AsRef<Path>) -> Result<()> {
    write_json(results, path.as_ref())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<ResultSet> {
    let path = path.as_ref();
    let value = read_json_value(path)?;
    check_version(&value, path, RESULTS_SCHEMA_VERSION)?;
    from_value(value, path)
}

#[derive(Serialize, Deserialize)]
struct StatsEnvelope {
    schema_version: u32,
    checksum: String,
    payload: serde_json::Value,
}

fn canonical_checksum(payload: &serde_json::Value) -> String {
    // Value maps are sorted by key, so this serialization is canonical
    let bytes = serde_json::to_vec(payload).expect("Value always serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn save_class_stats(stats: &ClassStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let payload = serde_json::to_value(stats).map_err(|e| json_err(path, e))?;
    let envelope = StatsEnvelope {
        schema_version: STATS_SCHEMA_VERSION,
        checksum: canonical_checksum(&payload),
        payload,
    };
    write_json(&envelope, path)
}

pub fn load_class_stats(path: impl AsRef<Path>) -> Result<ClassStats> {
    let path = path.as_ref();
    let value = read_json_value(path)?;
    check_version(&value, path, STATS_SCHEMA_VERSION)?;
    let envelope: StatsEnvelope = from_value(value, path)?;
    if canonical_checksum(&envelope.payload) != envelope.checksum {
        return Err(Error::Checksum(path.to_owned()));
    }
    from_value(envelope.payload, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub schema_version: u32,
    pub bundles: Vec<FeatureBundle>,
}

pub fn write_feature_bundles(bundles: &[FeatureBundle], path: impl AsRef<Path>) -> Result<()> {
    write_json(
        &FeatureFile {
            schema_version: FEATURES_SCHEMA_VERSION,
            bundles: bundles.to_vec(),
        },
        path.as_ref(),
    )
}

/// Reads and validates a feature file (shape products, finite values,
/// softmax normalization).
pub fn read_feature_bundles(path: impl AsRef<Path>) -> Result<Vec<FeatureBundle>> {
    let path = path.as_ref();
    let value = read_json_value(path)?;
    check_version(&value, path, FEATURES_SCHEMA_VERSION)?;
    let file: FeatureFile = from_value(value, path)?;
    for (i, b) in file.bundles.iter().enumerate() {
        b.validate().map_err(|e| Error::Parse {
            location: format!("{} bundle {i}", path.display()),
            message: e.to_string(),
        })?;
    }
    Ok(file.bundles)
}

/// `[detector]` section of a run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub k: Option<usize>,
    pub method: Option<Method>,
    pub scan_limit: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub cal: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub ood: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Score-fitting options.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoresSection {
    pub temperature: Option<f64>,
    pub powers: Option<Vec<u32>>,
    pub ridge: Option<Ridge>,
    pub holdout_fraction: Option<f64>,
    pub energy: Option<bool>,
}

/// Run configuration file. Every value is optional; command-line flags take
/// precedence over the file, and the file over built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub scores: ScoresSection,
}

impl RunConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            location: source.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}
