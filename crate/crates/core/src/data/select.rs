use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TStatistic {
    /// Two-sample t with pooled variance.
    #[default]
    Pooled,
    Welch,
}

/// Top-`fraction` features by absolute two-sample t statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub selected: Vec<bool>,
    pub fraction: f64,
    pub statistic: Vec<f64>,
}

impl FeatureMask {
    /// Selected column indices in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.selected.len()).filter(|&j| self.selected[j]).collect()
    }

    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    /// Mask keeping every feature.
    pub fn all(n_features: usize) -> Self {
        FeatureMask {
            selected: vec![true; n_features],
            fraction: 1.0,
            statistic: vec![0.0; n_features],
        }
    }
}

pub fn select_features(train: &Dataset, fraction: f64) -> Result<FeatureMask> {
    select_features_with(train, fraction, TStatistic::Pooled)
}

/// Number of features kept for `fraction` of `d`, i.e. `ceil(fraction * d)`
/// with slack for products like `0.1 * 30` landing one ulp above an integer.
pub(crate) fn selection_count(fraction: f64, d: usize) -> usize {
    let raw = fraction * d as f64;
    let rounded = raw.round();
    let count = if (raw - rounded).abs() <= 1e-9 * raw.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    };
    count.clamp(1, d)
}

pub fn select_features_with(
    train: &Dataset,
    fraction: f64,
    kind: TStatistic,
) -> Result<FeatureMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("feature fraction {fraction} not in (0, 1]")));
    }
    if train.n_classes() != 2 {
        return Err(Error::config(format!(
            "feature selection needs binary labels, got {} classes",
            train.n_classes()
        )));
    }
    let counts = train.class_counts();
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::config("feature selection needs at least 2 samples per class"));
    }
    let x = train.features();
    let labels = train.labels();
    let d = train.n_features();
    let (n0, n1) = (counts[0] as f64, counts[1] as f64);

    let statistic: Vec<f64> = (0..d)
        .map(|j| {
            let col = x.column(j);
            let (mut s0, mut s1) = (0.0, 0.0);
            for (v, &y) in col.iter().zip(labels) {
                if y == 1 {
                    s1 += v;
                } else {
                    s0 += v;
                }
            }
            let (m0, m1) = (s0 / n0, s1 / n1);
            let (mut q0, mut q1) = (0.0, 0.0);
            for (v, &y) in col.iter().zip(labels) {
                if y == 1 {
                    q1 += (v - m1) * (v - m1);
                } else {
                    q0 += (v - m0) * (v - m0);
                }
            }
            let (var0, var1) = (q0 / (n0 - 1.0), q1 / (n1 - 1.0));
            let se2 = match kind {
                TStatistic::Pooled => {
                    let pooled = (q0 + q1) / (n0 + n1 - 2.0);
                    pooled * (1.0 / n0 + 1.0 / n1)
                }
                TStatistic::Welch => var0 / n0 + var1 / n1,
            };
            if se2 > 0.0 {
                (m1 - m0) / se2.sqrt()
            } else {
                0.0
            }
        })
        .collect();

    let keep = selection_count(fraction, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        statistic[b]
            .abs()
            .total_cmp(&statistic[a].abs())
            .then(a.cmp(&b))
    });
    let mut selected = vec![false; d];
    for &j in &order[..keep] {
        selected[j] = true;
    }
    Ok(FeatureMask {
        selected,
        fraction,
        statistic,
    })
}
