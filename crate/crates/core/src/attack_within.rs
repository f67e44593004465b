//! Within-dataset enhancement: every sample, while held out, is pushed a
//! fixed distance along the gradient of a model trained on the other folds.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{feature_similarity, kfold, Dataset, Role};
use crate::harness::{crossval_accuracy, seeds, CvOptions};
use crate::models::{self, GradientObjective, ModelSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WithinConfig {
    pub n_folds: usize,
    /// Length of every per-sample step; the gradient is unit-normalized.
    pub scale: f64,
    pub objective: GradientObjective,
    pub model: ModelSpec,
    pub seed: u64,
    pub stratified: bool,
    /// Re-evaluate original and enhanced data with an independent fold plan.
    pub evaluate: bool,
}

impl Default for WithinConfig {
    fn default() -> Self {
        WithinConfig {
            n_folds: 10,
            scale: 1.0,
            objective: GradientObjective::Loss,
            model: ModelSpec::default(),
            seed: 0,
            stratified: true,
            evaluate: true,
        }
    }
}

impl WithinConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::config("n_folds must be at least 2"));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::config(format!("scale must be nonnegative, got {}", self.scale)));
        }
        self.model.validate()
    }
}

/// What one fold of an attack did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldTrace {
    pub fold: usize,
    /// Dataset row indices perturbed in this fold.
    pub samples_touched: Vec<usize>,
    /// Raw gradient norm per held-out row, in `held_out` order.
    pub gradient_norms: Vec<f64>,
    pub held_out: Vec<usize>,
    /// Rows left unchanged because their gradient vanished.
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct EnhancementResult {
    pub enhanced: Dataset,
    /// `enhanced - original`.
    pub delta: DMatrix<f64>,
    pub similarity_r: f64,
    /// Independent cross-validated accuracy, when evaluated.
    pub accuracy_original: Option<f64>,
    pub accuracy_enhanced: Option<f64>,
    pub per_fold_trace: Vec<FoldTrace>,
    pub config: serde_json::Value,
}

/// Per-row gradients whose negative improves the model at `(x, y)`: the
/// loss gradient, or minus the gradient of the label-signed decision value.
pub(crate) fn enhancement_gradients(
    model: &models::TrainedModel,
    x: &DMatrix<f64>,
    labels: &[usize],
    objective: GradientObjective,
) -> Result<DMatrix<f64>> {
    let g = models::input_gradients(model, x, labels, objective)?;
    Ok(match objective {
        GradientObjective::Loss => g,
        GradientObjective::DecisionFunction => -g,
    })
}

/// Rows whose gradient norm is at or below this are skipped.
pub(crate) const ZERO_GRADIENT: f64 = 1e-300;

pub fn enhance_within(data: &Dataset, cfg: &WithinConfig) -> Result<EnhancementResult> {
    cfg.validate()?;
    let plan = kfold(data, cfg.n_folds, cfg.stratified, cfg.seed)?;
    let folds: Vec<(FoldTrace, DMatrix<f64>)> = (0..cfg.n_folds)
        .into_par_iter()
        .map(|k| within_fold(data, &plan, k, cfg).map_err(|e| e.context(format!("fold {k}"))))
        .collect::<Result<_>>()?;
    let mut x = data.features().clone();
    let mut traces = Vec::with_capacity(folds.len());
    for (trace, rows) in folds {
        for (r, &i) in trace.held_out.iter().enumerate() {
            x.set_row(i, &rows.row(r));
        }
        traces.push(trace);
    }
    let enhanced = finish(data, x, "within", cfg.scale)?;
    let eval = cfg.evaluate.then(|| evaluation_options(cfg.n_folds, cfg.seed, cfg.stratified));
    assemble(data, enhanced, traces, &cfg.model, eval, serde_json::to_value(cfg).unwrap())
}

fn within_fold(
    data: &Dataset,
    plan: &crate::data::FoldPlan,
    k: usize,
    cfg: &WithinConfig,
) -> Result<(FoldTrace, DMatrix<f64>)> {
    let (train, held) = plan.split(data, k)?;
    let model = models::fit(&cfg.model, &train)?;
    let mut rows = held.features().clone();
    let grads = enhancement_gradients(&model, &rows, held.labels(), cfg.objective)?;
    let mut trace = FoldTrace {
        fold: k,
        samples_touched: Vec::new(),
        gradient_norms: Vec::with_capacity(held.len()),
        held_out: held.indices.clone(),
        skipped: Vec::new(),
    };
    for r in 0..rows.nrows() {
        let g = grads.row(r);
        let norm = g.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("gradient at sample {}", held.indices[r])));
        }
        trace.gradient_norms.push(norm);
        if norm <= ZERO_GRADIENT {
            trace.skipped.push(held.indices[r]);
            continue;
        }
        if cfg.scale > 0.0 {
            let step = g * (cfg.scale / norm);
            let new = rows.row(r) - step;
            rows.set_row(r, &new);
            trace.samples_touched.push(held.indices[r]);
        }
    }
    Ok((trace, rows))
}

/// Fold plan for re-evaluating attacked data, independent of the attack's.
pub(crate) fn evaluation_options(n_folds: usize, attack_seed: u64, stratified: bool) -> CvOptions {
    let mut eval_seed = seeds::derive_seed(attack_seed, "evaluation");
    if eval_seed == attack_seed {
        eval_seed = eval_seed.wrapping_add(1);
    }
    CvOptions {
        n_folds,
        fold_seeds: vec![eval_seed],
        stratified,
        ..Default::default()
    }
}

pub(crate) fn finish(data: &Dataset, x: DMatrix<f64>, kind: &str, step: f64) -> Result<Dataset> {
    Ok(data
        .with_features(x)?
        .derived(format!("{}_enhanced", data.name), Role::Enhanced, format!("{kind} attack, step {step}")))
}

pub(crate) fn assemble(
    data: &Dataset,
    enhanced: Dataset,
    traces: Vec<FoldTrace>,
    eval_model: &ModelSpec,
    eval: Option<CvOptions>,
    config: serde_json::Value,
) -> Result<EnhancementResult> {
    let delta = enhanced.features() - data.features();
    let similarity_r = feature_similarity(data, &enhanced)?;
    let (accuracy_original, accuracy_enhanced) = match eval {
        Some(opts) => (
            Some(crossval_accuracy(data, eval_model, &opts)?.mean),
            Some(crossval_accuracy(&enhanced, eval_model, &opts)?.mean),
        ),
        None => (None, None),
    };
    Ok(EnhancementResult {
        enhanced,
        delta,
        similarity_r,
        accuracy_original,
        accuracy_enhanced,
        per_fold_trace: traces,
        config,
    })
}
