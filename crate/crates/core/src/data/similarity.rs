use super::Dataset;
use crate::{Error, Result};

/// Pearson correlation between the flattened feature matrices of two
/// datasets with identical shape and sample order.
pub fn feature_similarity(a: &Dataset, b: &Dataset) -> Result<f64> {
    if a.features().shape() != b.features().shape() {
        return Err(Error::data(format!(
            "shape mismatch: {:?} vs {:?}",
            a.features().shape(),
            b.features().shape()
        )));
    }
    if a.sample_ids() != b.sample_ids() {
        return Err(Error::data("sample order differs between datasets"));
    }
    pearson(a.features().as_slice(), b.features().as_slice())
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::data("correlation needs two nonempty equal-length vectors"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::data("zero variance in flattened features"));
    }
    if x == y {
        return Ok(1.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
