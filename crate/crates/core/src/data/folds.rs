use std::cell::Cell;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{Error, Result};

/// Assignment of every sample to one of `n_folds` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub assignments: Vec<usize>,
    pub stratified: bool,
    pub seed: u64,
}

/// Shuffles samples (per class when stratified), concatenates the shuffled
/// lists and deals positions round-robin. Dealing by global position keeps
/// fold sizes within one of each other and, when stratified, every class
/// count per fold within one of `n_c / n_folds`.
pub fn kfold(ds: &Dataset, n_folds: usize, stratified: bool, seed: u64) -> Result<FoldPlan> {
    kfold_labels(ds.labels(), ds.n_classes(), n_folds, stratified, seed)
}

pub(crate) fn kfold_labels(
    labels: &[usize],
    n_classes: usize,
    n_folds: usize,
    stratified: bool,
    seed: u64,
) -> Result<FoldPlan> {
    let n = labels.len();
    if n_folds < 2 {
        return Err(Error::config(format!("n_folds must be at least 2, got {n_folds}")));
    }
    if n_folds > n {
        return Err(Error::config(format!(
            "n_folds ({n_folds}) exceeds n_samples ({n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order: Vec<usize> = if stratified {
        let mut order = Vec::with_capacity(n);
        for c in 0..n_classes {
            let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            members.shuffle(&mut rng);
            order.extend(members);
        }
        order
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order
    };
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % n_folds;
    }
    Ok(FoldPlan {
        n_folds,
        assignments,
        stratified,
        seed,
    })
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Training dataset and sealed held-out rows for `fold`.
    pub fn split(&self, ds: &Dataset, fold: usize) -> Result<(Dataset, HeldOut)> {
        if self.assignments.len() != ds.n_samples() {
            return Err(Error::config("fold plan does not match dataset size"));
        }
        if fold >= self.n_folds {
            return Err(Error::config(format!("fold {fold} out of range")));
        }
        let train = ds
            .select_rows(&self.train_indices(fold))
            .map_err(|e| e.context(format!("training split of fold {fold}")))?;
        let test = self.test_indices(fold);
        let held_out = HeldOut {
            features: ds.features().select_rows(test.iter()),
            labels: test.iter().map(|&i| ds.labels()[i]).collect(),
            indices: test,
            labels_read: Cell::new(false),
        };
        Ok((train, held_out))
    }
}

/// Held-out rows of one fold.
///
/// Labels are only reachable through [`HeldOut::labels`], which raises an
/// audit flag, or through [`HeldOut::correct`], which scores predictions.
/// Evaluation code checks the flag is still down after fitting so a model
/// can never have been trained with held-out labels in view.
#[derive(Debug)]
pub struct HeldOut {
    pub indices: Vec<usize>,
    features: DMatrix<f64>,
    labels: Vec<usize>,
    labels_read: Cell<bool>,
}

impl HeldOut {
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Raw labels, for attacks that legitimately use them.
    pub fn labels(&self) -> &[usize] {
        self.labels_read.set(true);
        &self.labels
    }

    pub fn labels_read(&self) -> bool {
        self.labels_read.get()
    }

    /// Number of predictions matching the held-out labels.
    pub fn correct(&self, predictions: &[usize]) -> Result<usize> {
        if predictions.len() != self.labels.len() {
            return Err(Error::config("prediction count does not match held-out rows"));
        }
        Ok(predictions
            .iter()
            .zip(&self.labels)
            .filter(|(p, y)| p == y)
            .count())
    }
}
