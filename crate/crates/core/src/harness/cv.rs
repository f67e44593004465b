use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold, select_features, Dataset};
use crate::models::{self, ModelSpec};
use crate::{Error, Result};

/// Cross-validation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub n_folds: usize,
    /// One replicate per seed, each with a fresh fold plan.
    pub fold_seeds: Vec<u64>,
    /// Model initialization seeds paired with `fold_seeds` by index; empty
    /// keeps the spec's own seed.
    pub model_seeds: Vec<u64>,
    pub stratified: bool,
    /// When set, features are selected inside each training fold and the
    /// model sees only those columns.
    pub feature_fraction: Option<f64>,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: 10,
            fold_seeds: vec![0],
            model_seeds: Vec::new(),
            stratified: true,
            feature_fraction: None,
        }
    }
}

impl CvOptions {
    pub fn new(n_folds: usize, fold_seeds: Vec<u64>) -> Self {
        CvOptions {
            n_folds,
            fold_seeds,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::config("cross-validation needs at least 2 folds"));
        }
        if self.fold_seeds.is_empty() {
            return Err(Error::config("cross-validation needs at least one seed"));
        }
        if !self.model_seeds.is_empty() && self.model_seeds.len() != self.fold_seeds.len() {
            return Err(Error::config("model_seeds must pair one-to-one with fold_seeds"));
        }
        if let Some(f) = self.feature_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config("feature_fraction must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub mean: f64,
    /// Population standard deviation over replicates.
    pub sd: f64,
    pub per_seed: Vec<f64>,
}

impl CvSummary {
    pub fn from_values(per_seed: Vec<f64>) -> Self {
        let n = per_seed.len() as f64;
        let mean = per_seed.iter().sum::<f64>() / n;
        let var = per_seed.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        CvSummary {
            mean,
            sd: var.sqrt(),
            per_seed,
        }
    }
}

/// Pooled K-fold accuracy (correct over total) per replicate.
pub fn crossval_accuracy(data: &Dataset, spec: &ModelSpec, opts: &CvOptions) -> Result<CvSummary> {
    opts.validate()?;
    let per_seed = opts
        .fold_seeds
        .iter()
        .enumerate()
        .map(|(r, &fold_seed)| {
            let mut spec = spec.clone();
            if let Some(&s) = opts.model_seeds.get(r) {
                spec.seed = s;
            }
            replicate(data, &spec, opts, fold_seed).map_err(|e| e.context(format!("cv replicate {r}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvSummary::from_values(per_seed))
}

fn replicate(data: &Dataset, spec: &ModelSpec, opts: &CvOptions, fold_seed: u64) -> Result<f64> {
    let plan = kfold(data, opts.n_folds, opts.stratified, fold_seed)?;
    let correct = (0..opts.n_folds)
        .into_par_iter()
        .map(|k| {
            let (train, held) = plan.split(data, k)?;
            let model = match opts.feature_fraction {
                Some(f) => models::fit_masked(spec, &train, &select_features(&train, f)?)?,
                None => models::fit(spec, &train)?,
            };
            debug_assert!(!held.labels_read());
            let pred = models::predict(&model, held.features())?;
            held.correct(&pred)
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(correct.iter().sum::<usize>() as f64 / data.n_samples() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Role, SyntheticRecipe};
    use nalgebra::DMatrix;

    #[test]
    fn separable_data_is_learned() {
        let ds = generate_synthetic(&SyntheticRecipe {
            n_per_class: vec![30, 30],
            n_features: 4,
            class_shift: 8.0,
            noise_sd: 1.0,
            seed: 2,
            block_offset: 0,
        })
        .unwrap();
        let s = crossval_accuracy(&ds, &ModelSpec::logistic(1.0), &CvOptions::new(5, vec![1, 2])).unwrap();
        assert!(s.mean >= 0.99);
    }

    #[test]
    fn single_seed_has_zero_sd() {
        let ds = generate_synthetic(&SyntheticRecipe {
            n_per_class: vec![20, 20],
            n_features: 3,
            class_shift: 1.0,
            noise_sd: 1.0,
            seed: 4,
            block_offset: 0,
        })
        .unwrap();
        let s = crossval_accuracy(&ds, &ModelSpec::linear_svm(1.0), &CvOptions::new(4, vec![9])).unwrap();
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.per_seed.len(), 1);
    }

    #[test]
    fn constant_features_give_chance_on_balanced_data() {
        // identical rows: every model predicts one class per fold
        let x = DMatrix::from_element(40, 2, 1.0);
        let labels = (0..40).map(|i| i % 2).collect();
        let ds = Dataset::from_parts(x, labels, 2, "flat", Role::Training).unwrap();
        let s = crossval_accuracy(&ds, &ModelSpec::logistic(1.0), &CvOptions::new(4, vec![3])).unwrap();
        assert!((s.mean - 0.5).abs() <= 0.1, "{}", s.mean);
    }

    #[test]
    fn rejects_bad_options() {
        let ds = Dataset::from_parts(DMatrix::zeros(4, 1), vec![0, 1, 0, 1], 2, "t", Role::Training).unwrap();
        let spec = ModelSpec::logistic(1.0);
        assert!(crossval_accuracy(&ds, &spec, &CvOptions::new(1, vec![0])).is_err());
        assert!(crossval_accuracy(&ds, &spec, &CvOptions::new(2, vec![])).is_err());
        let mut o = CvOptions::new(2, vec![0, 1]);
        o.model_seeds = vec![1];
        assert!(crossval_accuracy(&ds, &spec, &o).is_err());
    }
}
