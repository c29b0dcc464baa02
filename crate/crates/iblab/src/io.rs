//! Artifact persistence: datasets as CSV plus metadata, JSON results wrapped in
//! a provenance envelope, and CSV tables with sidecar metadata.

use std::fs;
use std::path::{Path, PathBuf};

use iblab_core::data::{Dataset, Ensemble, Labels};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, HarnessResult};

pub const SCHEMA_VERSION: &str = "1";

/// SHA-256 of the compact JSON form of a configuration.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let bytes = serde_json::to_vec(config).expect("configurations serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Wrapper written around every JSON result.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<C, R> {
    pub schema_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub config: C,
    pub result: R,
}

impl<C: Serialize, R> Envelope<C, R> {
    pub fn new(command: &str, config: C, seed: Option<u64>, result: R) -> Self {
        Envelope {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            config_hash: config_hash(&config),
            seed,
            config,
            result,
        }
    }
}

fn ensure_parent(path: &Path) -> HarnessResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(HarnessError::io(parent))?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> HarnessResult<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(HarnessError::json(path.display().to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(HarnessError::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> HarnessResult<T> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    serde_json::from_str(&text).map_err(HarnessError::json(path.display().to_string()))
}

/// `a/b.csv` → `a/b.meta.json`; any other path gets `.meta.json` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    match s.strip_suffix(".csv") {
        Some(stem) => PathBuf::from(format!("{stem}.meta.json")),
        None => PathBuf::from(format!("{s}.meta.json")),
    }
}

/// Metadata stored next to every CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub schema_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub columns: Vec<String>,
    pub rows: usize,
}

/// Writes a CSV table and its `.meta.json` sidecar.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>], command: &str, config_hash: &str, seed: Option<u64>) -> HarnessResult<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(HarnessError::csv(path))?;
    w.write_record(header).map_err(HarnessError::csv(path))?;
    for row in rows {
        w.write_record(row).map_err(HarnessError::csv(path))?;
    }
    w.flush().map_err(HarnessError::io(path))?;
    let meta = TableMeta {
        schema_version: SCHEMA_VERSION.into(),
        command: command.into(),
        config_hash: config_hash.into(),
        seed,
        columns: header.iter().map(|s| s.to_string()).collect(),
        rows: rows.len(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Writes CSV text produced elsewhere and its sidecar.
pub fn write_csv_text(path: &Path, text: &str, command: &str, config_hash: &str, seed: Option<u64>) -> HarnessResult<()> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    write_table(path, &header, &rows, command, config_hash, seed)
}

/// Contents of `<name>.meta.json` for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: String,
    pub n: usize,
    pub d: usize,
    pub label_kind: LabelKind,
    #[serde(default)]
    pub k: Option<usize>,
    pub ensemble: Ensemble,
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
    pub seed: u64,
    pub rescale: f64,
    #[serde(default)]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Binary,
    Multiclass,
}

/// Strips an optional `.csv` suffix so `data/run1` and `data/run1.csv` agree.
pub fn dataset_prefix(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    PathBuf::from(s.strip_suffix(".csv").unwrap_or(&s).to_string())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", prefix.to_string_lossy()))
}

/// Writes `<prefix>.csv` (features then label) and `<prefix>.meta.json`.
pub fn write_dataset(prefix: &Path, ds: &Dataset, config_hash: Option<String>) -> HarnessResult<(PathBuf, PathBuf)> {
    let prefix = dataset_prefix(prefix);
    let csv_path = with_suffix(&prefix, ".csv");
    let meta_path = with_suffix(&prefix, ".meta.json");
    ensure_parent(&csv_path)?;
    let (n, d) = (ds.n(), ds.d());
    let mut w = csv::Writer::from_path(&csv_path).map_err(HarnessError::csv(&csv_path))?;
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(HarnessError::csv(&csv_path))?;
    let (label_kind, k) = match &ds.labels {
        Labels::Binary { .. } => (LabelKind::Binary, None),
        Labels::Multiclass { k, .. } => (LabelKind::Multiclass, Some(*k)),
    };
    for i in 0..n {
        let mut row: Vec<String> = (0..d).map(|j| ds.x[(i, j)].to_string()).collect();
        row.push(match &ds.labels {
            Labels::Binary { y } => y[i].to_string(),
            Labels::Multiclass { classes, .. } => classes[i].to_string(),
        });
        w.write_record(&row).map_err(HarnessError::csv(&csv_path))?;
    }
    w.flush().map_err(HarnessError::io(&csv_path))?;
    let meta = DatasetMeta {
        schema_version: SCHEMA_VERSION.into(),
        n,
        d,
        label_kind,
        k,
        ensemble: ds.ensemble.clone(),
        lambda: ds.lambda.clone(),
        seed: ds.seed,
        rescale: ds.rescale,
        config_hash,
    };
    write_json(&meta_path, &meta)?;
    Ok((csv_path, meta_path))
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(prefix: &Path) -> HarnessResult<Dataset> {
    let prefix = dataset_prefix(prefix);
    let csv_path = with_suffix(&prefix, ".csv");
    let meta: DatasetMeta = read_json(&with_suffix(&prefix, ".meta.json"))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::Config(format!("unsupported dataset schema version {}", meta.schema_version)));
    }
    let mut r = csv::Reader::from_path(&csv_path).map_err(HarnessError::csv(&csv_path))?;
    let width = r.headers().map_err(HarnessError::csv(&csv_path))?.len();
    if width != meta.d + 1 {
        return Err(HarnessError::Config(format!("{} has {width} columns, metadata says d = {}", csv_path.display(), meta.d)));
    }
    let mut values = Vec::with_capacity(meta.n * meta.d);
    let mut labels = Vec::with_capacity(meta.n);
    for rec in r.records() {
        let rec = rec.map_err(HarnessError::csv(&csv_path))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let parsed = parsed.map_err(|e| HarnessError::Config(format!("{}: {e}", csv_path.display())))?;
        values.extend_from_slice(&parsed[..meta.d]);
        labels.push(parsed[meta.d]);
    }
    if labels.len() != meta.n {
        return Err(HarnessError::Config(format!("{} has {} rows, metadata says n = {}", csv_path.display(), labels.len(), meta.n)));
    }
    let labels = match meta.label_kind {
        LabelKind::Binary => Labels::Binary { y: labels },
        LabelKind::Multiclass => {
            let k = meta.k.ok_or_else(|| HarnessError::Config("multiclass dataset without k".into()))?;
            let classes = labels
                .iter()
                .map(|&v| if v >= 0.0 && v.fract() == 0.0 { Ok(v as usize) } else { Err(HarnessError::Config(format!("bad class label {v}"))) })
                .collect::<HarnessResult<Vec<_>>>()?;
            Labels::Multiclass { classes, k }
        }
    };
    let template = Dataset {
        x: DMatrix::from_row_slice(meta.n, meta.d, &values),
        labels: Labels::Binary { y: vec![1.0; meta.n] },
        lambda: meta.lambda,
        ensemble: meta.ensemble,
        seed: meta.seed,
        rescale: meta.rescale,
    };
    Ok(template.with_labels(labels)?)
}
