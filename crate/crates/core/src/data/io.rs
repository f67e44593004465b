//! Comma-separated tabular files and dataset bundles.
//!
//! A table has a header row, one label column and an optional `id` column;
//! every other column is a numeric feature. Floats are written with 17
//! significant digits so a save/load cycle reproduces every bit.
//!
//! A bundle is a directory holding `features.csv` (label column `label`) and
//! `meta.json`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dataset, Role};
use crate::{Error, Result};

/// Label column name used inside bundles.
pub const LABEL_COLUMN: &str = "label";
const ID_COLUMN: &str = "id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub name: String,
    pub role: Role,
    pub label_column: String,
    /// Original label strings, indexed by dense class id.
    pub classes: Vec<String>,
    pub n_samples: usize,
    pub n_features: usize,
    #[serde(default)]
    pub provenance: Vec<String>,
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a table. Labels are mapped to dense ids in order of first
/// appearance.
pub fn load_tabular(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    load_with_classes(path.as_ref(), label_column, None)
}

fn load_with_classes(
    path: &Path,
    label_column: &str,
    known_classes: Option<&[String]>,
) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(parse_err(path, "empty file"));
    }
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| parse_err(path, format!("missing label column '{label_column}'")))?;
    let id_idx = header.iter().position(|h| h == ID_COLUMN);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| j != label_idx && Some(j) != id_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(parse_err(path, "no feature columns"));
    }

    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut classes: Vec<String> = Vec::new();
    if let Some(known) = known_classes {
        for (i, c) in known.iter().enumerate() {
            class_index.insert(c.clone(), i);
        }
        classes = known.to_vec();
    }

    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        let line = row + 2;
        let raw_label = record.get(label_idx).unwrap_or("").to_string();
        let label = match class_index.get(&raw_label) {
            Some(&c) => c,
            None if known_classes.is_some() => {
                return Err(parse_err(path, format!("line {line}: unknown label '{raw_label}'")))
            }
            None => {
                let c = classes.len();
                class_index.insert(raw_label.clone(), c);
                classes.push(raw_label);
                c
            }
        };
        labels.push(label);
        ids.push(match id_idx {
            Some(j) => record.get(j).unwrap_or("").to_string(),
            None => format!("s{row:05}"),
        });
        for &j in &feature_cols {
            let cell = record.get(j).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("line {line}: non-numeric feature '{cell}' in column '{}'", header[j]),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    format!("line {line}: non-finite feature in column '{}'", header[j]),
                ));
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(parse_err(path, "empty file"));
    }
    let features = DMatrix::from_row_slice(labels.len(), feature_cols.len(), &values);
    let feature_names = feature_cols.iter().map(|&j| header[j].clone()).collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut ds = Dataset::new(
        features,
        labels,
        ids,
        feature_names,
        classes,
        name,
        Role::Original,
    )?;
    ds.provenance
        .push(format!("loaded from {} (label column '{label_column}')", path.display()));
    Ok(ds)
}

fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `id`, the feature columns and `label_column` as a table.
pub fn save_tabular(ds: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e.into()))?;
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(ds.feature_names().iter().cloned());
    header.push(label_column.to_string());
    let io_err = |e: csv::Error| Error::io(format!("writing {}", path.display()), e.into());
    writer.write_record(&header).map_err(io_err)?;
    let x = ds.features();
    for i in 0..ds.n_samples() {
        let mut record = Vec::with_capacity(header.len());
        record.push(ds.sample_ids()[i].clone());
        record.extend((0..ds.n_features()).map(|j| format_float(x[(i, j)])));
        record.push(ds.class_names()[ds.labels()[i]].clone());
        writer.write_record(&record).map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes a bundle directory (`features.csv` + `meta.json`).
pub fn save_bundle(ds: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    save_tabular(ds, dir.join("features.csv"), LABEL_COLUMN)?;
    let meta = BundleMeta {
        name: ds.name.clone(),
        role: ds.role,
        label_column: LABEL_COLUMN.to_string(),
        classes: ds.class_names().to_vec(),
        n_samples: ds.n_samples(),
        n_features: ds.n_features(),
        provenance: ds.provenance.clone(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("bundle metadata serializes");
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, json + "\n")
        .map_err(|e| Error::io(format!("writing {}", meta_path.display()), e))?;
    Ok(dir.to_path_buf())
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let text = fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(format!("reading {}", meta_path.display()), e))?;
    let meta: BundleMeta =
        serde_json::from_str(&text).map_err(|e| parse_err(&meta_path, e.to_string()))?;
    let mut ds = load_with_classes(
        &dir.join("features.csv"),
        &meta.label_column,
        Some(&meta.classes),
    )?;
    if ds.n_samples() != meta.n_samples || ds.n_features() != meta.n_features {
        return Err(parse_err(
            &meta_path,
            format!(
                "shape {}x{} does not match features.csv {}x{}",
                meta.n_samples,
                meta.n_features,
                ds.n_samples(),
                ds.n_features()
            ),
        ));
    }
    ds.name = meta.name;
    ds.role = meta.role;
    ds.provenance = meta.provenance;
    Ok(ds)
}
