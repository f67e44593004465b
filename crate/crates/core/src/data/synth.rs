use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Role};
use crate::{Error, Result};

/// Block-mean Gaussian classes.
///
/// Class `c` has mean `class_shift` on a contiguous block of
/// `ceil(n_features / n_classes)` features (block `c`, rotated right by
/// `block_offset` features) and zero elsewhere. Noise is i.i.d.
/// `N(0, noise_sd^2)`. Samples are ordered by class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecipe {
    pub n_per_class: Vec<usize>,
    pub n_features: usize,
    pub class_shift: f64,
    pub noise_sd: f64,
    pub seed: u64,
    /// Rotation of the class blocks; two recipes differing only here share
    /// part of their discriminative features.
    #[serde(default)]
    pub block_offset: usize,
}

impl SyntheticRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class.is_empty() {
            return Err(Error::config("synthetic recipe has an empty class list"));
        }
        if self.n_per_class.iter().any(|&n| n == 0) {
            return Err(Error::config("every synthetic class needs at least one sample"));
        }
        if self.n_features == 0 {
            return Err(Error::config("n_features must be at least 1"));
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::config("noise_sd must be positive"));
        }
        if !(self.class_shift >= 0.0) || !self.class_shift.is_finite() {
            return Err(Error::config("class_shift must be nonnegative"));
        }
        Ok(())
    }

    /// Feature indices carrying the mean shift of class `c`.
    pub fn block(&self, c: usize) -> Vec<usize> {
        let d = self.n_features;
        let width = d.div_ceil(self.n_per_class.len());
        let start = c * width;
        let end = ((c + 1) * width).min(d);
        (start..end).map(|j| (j + self.block_offset) % d).collect()
    }
}

pub fn generate_synthetic(recipe: &SyntheticRecipe) -> Result<Dataset> {
    recipe.validate()?;
    let k = recipe.n_per_class.len();
    let n: usize = recipe.n_per_class.iter().sum();
    let d = recipe.n_features;
    let noise = Normal::new(0.0, recipe.noise_sd).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);

    let mut x = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (c, &count) in recipe.n_per_class.iter().enumerate() {
        let mut mean = vec![0.0; d];
        for j in recipe.block(c) {
            mean[j] = recipe.class_shift;
        }
        for _ in 0..count {
            for (j, m) in mean.iter().enumerate() {
                x[(row, j)] = m + noise.sample(&mut rng);
            }
            labels.push(c);
            row += 1;
        }
    }
    let mut ds = Dataset::from_parts(x, labels, k, "synthetic", Role::Original)?;
    ds.provenance.push(format!(
        "synthetic: n_per_class={:?} d={} shift={} sd={} seed={} offset={}",
        recipe.n_per_class,
        d,
        recipe.class_shift,
        recipe.noise_sd,
        recipe.seed,
        recipe.block_offset
    ));
    Ok(ds)
}
