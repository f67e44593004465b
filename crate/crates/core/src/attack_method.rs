//! Method enhancement: move held-out samples along the part of one model's
//! gradient that is orthogonal to a competitor's, while pushing against the
//! competitor's own orthogonal component.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack_within::{
    assemble, enhancement_gradients, evaluation_options, finish, EnhancementResult, FoldTrace, ZERO_GRADIENT,
};
use crate::data::{kfold, Dataset, FoldPlan};
use crate::harness::{crossval_accuracy, seeds};
use crate::models::{self, GradientObjective, ModelSpec};
use crate::{Error, Result};

/// `a` minus its projection on `b`; `a` unchanged when `‖b‖ ≤ 1e-12`.
pub fn project_orthogonal(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let bb = b.norm_squared();
    if bb.sqrt() <= 1e-12 {
        return a.clone();
    }
    a - b * (a.dot(b) / bb)
}

/// Unit gradients of the two models at one sample and their mutually
/// orthogonal components.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub g1: DVector<f64>,
    pub g2: DVector<f64>,
    pub g1_perp: DVector<f64>,
    pub g2_perp: DVector<f64>,
}

impl GradientPair {
    /// Normalizes `raw1` and `raw2` (zero vectors stay zero) and projects.
    pub fn new(raw1: &DVector<f64>, raw2: &DVector<f64>) -> Self {
        let unit = |g: &DVector<f64>| {
            let n = g.norm();
            if n <= ZERO_GRADIENT {
                DVector::zeros(g.len())
            } else {
                g / n
            }
        };
        let g1 = unit(raw1);
        let g2 = unit(raw2);
        let g1_perp = project_orthogonal(&g1, &g2);
        let g2_perp = project_orthogonal(&g2, &g1);
        GradientPair { g1, g2, g1_perp, g2_perp }
    }

    /// `max(|<g1_perp, g2>|, |<g2_perp, g1>|)`.
    pub fn orthogonality_residual(&self) -> f64 {
        self.g1_perp.dot(&self.g2).abs().max(self.g2_perp.dot(&self.g1).abs())
    }

    /// `g1_perp - eta * g2_perp`; the sample moves by `-lambda` times this.
    pub fn direction(&self, eta: f64) -> DVector<f64> {
        &self.g1_perp - &self.g2_perp * eta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    /// Model to enhance.
    pub f1: ModelSpec,
    /// Model to hold down.
    pub f2: ModelSpec,
    pub lambda: f64,
    pub eta: f64,
    pub n_folds: usize,
    pub objective: GradientObjective,
    /// Objective for `f2` when it differs from `objective`.
    pub f2_objective: Option<GradientObjective>,
    pub seed: u64,
    pub stratified: bool,
    /// Number of initializations of `f1` whose unit gradients are averaged.
    pub f1_seeds: usize,
    pub evaluate: bool,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            f1: ModelSpec::feed_forward(),
            f2: ModelSpec::linear_svm(1.0),
            lambda: 1.0,
            eta: 1.0,
            n_folds: 10,
            objective: GradientObjective::Loss,
            f2_objective: None,
            seed: 0,
            stratified: true,
            f1_seeds: 1,
            evaluate: true,
        }
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::config("n_folds must be at least 2"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be nonnegative"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta must be nonnegative"));
        }
        if self.f1_seeds == 0 {
            return Err(Error::config("f1_seeds must be at least 1"));
        }
        self.f1.validate()?;
        self.f2.validate()
    }

    fn f1_specs(&self) -> Vec<ModelSpec> {
        (0..self.f1_seeds)
            .map(|i| {
                let mut s = self.f1.clone();
                if i > 0 {
                    s.seed = seeds::derive_seed(self.f1.seed, &format!("init/{i}"));
                }
                s
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    /// Accuracies in here are those of `f1`.
    pub enhancement: EnhancementResult,
    pub f2_accuracy_original: Option<f64>,
    pub f2_accuracy_enhanced: Option<f64>,
    /// Largest orthogonality residual over all processed samples.
    pub max_orthogonality_residual: f64,
}

pub fn enhance_method(data: &Dataset, cfg: &MethodConfig) -> Result<MethodResult> {
    cfg.validate()?;
    let plan = kfold(data, cfg.n_folds, cfg.stratified, cfg.seed)?;
    let folds: Vec<(FoldTrace, DMatrix<f64>, f64)> = (0..cfg.n_folds)
        .into_par_iter()
        .map(|k| method_fold(data, &plan, k, cfg).map_err(|e| e.context(format!("fold {k}"))))
        .collect::<Result<_>>()?;
    let mut x = data.features().clone();
    let mut traces = Vec::with_capacity(folds.len());
    let mut residual = 0.0f64;
    for (trace, rows, res) in folds {
        for (r, &i) in trace.held_out.iter().enumerate() {
            x.set_row(i, &rows.row(r));
        }
        residual = residual.max(res);
        traces.push(trace);
    }
    let enhanced = finish(data, x, "method", cfg.lambda)?;
    let eval = cfg.evaluate.then(|| evaluation_options(cfg.n_folds, cfg.seed, cfg.stratified));
    let (f2o, f2e) = match &eval {
        Some(opts) => (
            Some(crossval_accuracy(data, &cfg.f2, opts)?.mean),
            Some(crossval_accuracy(&enhanced, &cfg.f2, opts)?.mean),
        ),
        None => (None, None),
    };
    let enhancement = assemble(data, enhanced, traces, &cfg.f1, eval, serde_json::to_value(cfg).unwrap())?;
    Ok(MethodResult {
        enhancement,
        f2_accuracy_original: f2o,
        f2_accuracy_enhanced: f2e,
        max_orthogonality_residual: residual,
    })
}

fn method_fold(data: &Dataset, plan: &FoldPlan, k: usize, cfg: &MethodConfig) -> Result<(FoldTrace, DMatrix<f64>, f64)> {
    let (train, held) = plan.split(data, k)?;
    let mut rows = held.features().clone();
    let labels = held.labels().to_vec();
    let f1_specs = cfg.f1_specs();
    let mut g1 = DMatrix::zeros(rows.nrows(), rows.ncols());
    for spec in &f1_specs {
        let m = models::fit(spec, &train)?;
        let g = enhancement_gradients(&m, &rows, &labels, cfg.objective)?;
        for (mut acc, row) in g1.row_iter_mut().zip(g.row_iter()) {
            let n = row.norm();
            if n > ZERO_GRADIENT {
                acc += row / n;
            }
        }
    }
    let m2 = models::fit(&cfg.f2, &train)?;
    let g2 = enhancement_gradients(&m2, &rows, &labels, cfg.f2_objective.unwrap_or(cfg.objective))?;
    let mut trace = FoldTrace {
        fold: k,
        samples_touched: Vec::new(),
        gradient_norms: Vec::with_capacity(rows.nrows()),
        held_out: held.indices.clone(),
        skipped: Vec::new(),
    };
    let mut residual = 0.0f64;
    for r in 0..rows.nrows() {
        let a = g1.row(r).transpose();
        let b = g2.row(r).transpose();
        if !(a.norm().is_finite() && b.norm().is_finite()) {
            return Err(Error::NonFinite(format!("gradient at sample {}", held.indices[r])));
        }
        trace.gradient_norms.push(a.norm());
        let pair = GradientPair::new(&a, &b);
        residual = residual.max(pair.orthogonality_residual());
        if pair.g1.norm() == 0.0 && pair.g2.norm() == 0.0 {
            trace.skipped.push(held.indices[r]);
            continue;
        }
        if cfg.lambda > 0.0 {
            let new = rows.row(r) - (pair.direction(cfg.eta) * cfg.lambda).transpose();
            rows.set_row(r, &new);
            trace.samples_touched.push(held.indices[r]);
        }
    }
    Ok((trace, rows, residual))
}
