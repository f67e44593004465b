//! Datasets, tabular I/O, synthetic generation, fold plans, feature
//! selection and similarity metrics.

mod folds;
mod io;
mod select;
mod similarity;
mod synth;

pub use folds::{kfold, FoldPlan, HeldOut};
pub use io::{load_bundle, load_tabular, save_bundle, save_tabular, BundleMeta, LABEL_COLUMN};
pub use select::{select_features, select_features_with, FeatureMask, TStatistic};
pub use similarity::feature_similarity;
pub use synth::{generate_synthetic, SyntheticRecipe};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Training,
    Generalization,
    Enhanced,
    Original,
}

/// A labeled feature matrix.
///
/// Rows are samples. Labels are dense class ids `0..n_classes`; the original
/// label strings are kept in `class_names` so a dataset can be written back
/// out unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    sample_ids: Vec<String>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    pub name: String,
    pub role: Role,
    /// Free-form record of the transformations applied to this data.
    pub provenance: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with generated sample ids, feature names and class
    /// names.
    pub fn from_parts(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        name: impl Into<String>,
        role: Role,
    ) -> Result<Self> {
        let sample_ids = (0..features.nrows()).map(|i| format!("s{i:05}")).collect();
        let feature_names = (0..features.ncols()).map(|j| format!("f{j}")).collect();
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::new(
            features,
            labels,
            sample_ids,
            feature_names,
            class_names,
            name,
            role,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        sample_ids: Vec<String>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
        name: impl Into<String>,
        role: Role,
    ) -> Result<Self> {
        let ds = Dataset {
            features,
            labels,
            sample_ids,
            feature_names,
            class_names,
            name: name.into(),
            role,
            provenance: Vec::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.features.nrows();
        if n == 0 {
            return Err(Error::data("dataset has no samples"));
        }
        if self.labels.len() != n {
            return Err(Error::data(format!(
                "{} feature rows but {} labels",
                n,
                self.labels.len()
            )));
        }
        if self.sample_ids.len() != n {
            return Err(Error::data("sample id count does not match row count"));
        }
        if self.feature_names.len() != self.features.ncols() {
            return Err(Error::data("feature name count does not match column count"));
        }
        let k = self.class_names.len();
        let mut seen = vec![false; k];
        for &y in &self.labels {
            if y >= k {
                return Err(Error::data(format!("label {y} out of range for {k} classes")));
            }
            seen[y] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::data(format!(
                "class {} has no samples",
                self.class_names[c]
            )));
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            let nrows = self.features.nrows();
            return Err(Error::data(format!(
                "non-finite feature at row {}, column {}",
                pos % nrows,
                pos / nrows
            )));
        }
        Ok(())
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Labels as `-1.0` (class 0) and `+1.0` (class 1). Binary datasets only.
    pub fn signed_labels(&self) -> Result<Vec<f64>> {
        if self.n_classes() != 2 {
            return Err(Error::config(format!(
                "binary labels required, dataset {} has {} classes",
                self.name,
                self.n_classes()
            )));
        }
        Ok(signed(&self.labels))
    }

    /// Same samples and labels with a replacement feature matrix.
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        if features.shape() != self.features.shape() {
            return Err(Error::data(format!(
                "replacement features {:?} do not match {:?}",
                features.shape(),
                self.features.shape()
            )));
        }
        let mut out = self.clone();
        out.features = features;
        out.validate()?;
        Ok(out)
    }

    /// Copy with the given role, name and an extra provenance line.
    pub fn derived(&self, name: impl Into<String>, role: Role, note: impl Into<String>) -> Self {
        let mut out = self.clone();
        out.name = name.into();
        out.role = role;
        out.provenance.push(note.into());
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let n = self.n_samples();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::config(format!("row {bad} out of range for {n} samples")));
        }
        let features = self.features.select_rows(rows.iter());
        let out = Dataset {
            features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            sample_ids: rows.iter().map(|&r| self.sample_ids[r].clone()).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            name: self.name.clone(),
            role: self.role,
            provenance: self.provenance.clone(),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        let d = self.n_features();
        if let Some(&bad) = columns.iter().find(|&&c| c >= d) {
            return Err(Error::config(format!("column {bad} out of range for {d} features")));
        }
        if columns.is_empty() {
            return Err(Error::config("column selection is empty"));
        }
        let mut out = self.clone();
        out.features = self.features.select_columns(columns.iter());
        out.feature_names = columns.iter().map(|&c| self.feature_names[c].clone()).collect();
        Ok(out)
    }

    /// SHA-256 over features (little-endian bits), labels and sample ids.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_samples() as u64).to_le_bytes());
        h.update((self.n_features() as u64).to_le_bytes());
        for v in self.features.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
        for &y in &self.labels {
            h.update((y as u64).to_le_bytes());
        }
        for id in &self.sample_ids {
            h.update(id.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Maps dense binary labels to `-1.0` / `+1.0`.
pub fn signed(labels: &[usize]) -> Vec<f64> {
    labels
        .iter()
        .map(|&y| if y == 1 { 1.0 } else { -1.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        Dataset::from_parts(x, vec![0, 1, 0], 2, "tiny", Role::Training).unwrap()
    }

    #[test]
    fn rejects_missing_class_and_bad_shapes() {
        let x = DMatrix::zeros(2, 2);
        assert!(Dataset::from_parts(x.clone(), vec![0, 0], 2, "x", Role::Training).is_err());
        assert!(Dataset::from_parts(x, vec![0], 1, "x", Role::Training).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut x = DMatrix::zeros(2, 1);
        x[(1, 0)] = f64::NAN;
        let err = Dataset::from_parts(x, vec![0, 1], 2, "x", Role::Training).unwrap_err();
        assert!(err.to_string().contains("non-finite feature"));
    }

    #[test]
    fn hash_tracks_contents() {
        let a = tiny();
        let mut f = a.features().clone();
        assert_eq!(a.content_hash(), a.clone().content_hash());
        f[(0, 0)] += 1e-12;
        let b = a.with_features(f).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn row_and_column_selection() {
        let a = tiny();
        let r = a.select_rows(&[2, 1]).unwrap();
        assert_eq!(r.labels(), &[0, 1]);
        assert_eq!(r.features()[(0, 1)], 6.0);
        let c = a.select_columns(&[1]).unwrap();
        assert_eq!(c.feature_names(), &["f1".to_string()]);
        assert_eq!(c.features()[(2, 0)], 6.0);
        assert!(a.select_rows(&[0, 2]).is_err());
    }
}
