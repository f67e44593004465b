//! Back-gradient descent: differentiate a truncated full-batch gradient
//! descent run with respect to one training input by walking the run
//! backwards with Hessian-vector products.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_inputs, GenRows, InfluenceGradient};
use crate::data::{Dataset, FeatureMask};
use crate::models::ffn::{self, Head};
use crate::models::{row_major, Activation, ModelKind, ModelSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HvpMode {
    /// Forward-mode differentiation of the backward pass.
    #[default]
    AnalyticDoubleBackprop,
    /// Central differences of gradients.
    FiniteDifference,
}

/// Source of the intermediate weights during the reverse walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    /// Weights recorded on the forward run; exact.
    #[default]
    Stored,
    /// Weights recovered backwards as `w_{t-1} = w_t + α ∇𝓛(w_t)`; no
    /// storage, approximate.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackGradConfig {
    /// Number of training steps `T` to reverse.
    pub steps: usize,
    /// Step size `α` of the training run.
    pub inner_rate: f64,
    pub hvp_mode: HvpMode,
    pub trajectory: Trajectory,
}

impl Default for BackGradConfig {
    fn default() -> Self {
        BackGradConfig {
            steps: 400,
            inner_rate: 0.1,
            hvp_mode: HvpMode::AnalyticDoubleBackprop,
            trajectory: Trajectory::Stored,
        }
    }
}

impl BackGradConfig {
    /// Steps and rate taken from a full-batch network spec.
    pub fn from_spec(spec: &ModelSpec) -> Self {
        BackGradConfig {
            steps: spec.inner_iters,
            inner_rate: spec.learning_rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("back-gradient needs at least one step"));
        }
        if !(self.inner_rate >= 0.0 && self.inner_rate.is_finite()) {
            return Err(Error::config("inner_rate must be nonnegative"));
        }
        Ok(())
    }
}

pub(crate) struct BackGradOutput {
    /// `∇_{x_e} A` in model coordinates.
    pub gradient: DVector<f64>,
    pub loss: f64,
    /// Weights after the forward run.
    pub params: Vec<f64>,
}

struct Problem<'a> {
    widths: &'a [usize],
    act: Activation,
    x: &'a [f64],
    labels: &'a [usize],
    n: usize,
    e: usize,
}

impl Problem<'_> {
    fn head(&self) -> Head<'_> {
        Head::CrossEntropy {
            labels: self.labels,
            scale: 1.0 / self.n as f64,
        }
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        ffn::backward(self.widths, self.act, w, self.x, self.n, self.head(), false).params
    }

    /// `(H_ww v, H_{x_e w} v)` of the training loss at `w`.
    fn hvp(&self, w: &[f64], v: &[f64], mode: HvpMode) -> (Vec<f64>, Vec<f64>) {
        let d = self.widths[0];
        let row = self.e * d..(self.e + 1) * d;
        match mode {
            HvpMode::AnalyticDoubleBackprop => {
                let (hw, hx) = ffn::hvp(self.widths, self.act, w, v, self.x, self.n, self.head());
                (hw, hx[row].to_vec())
            }
            HvpMode::FiniteDifference => {
                let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if vn == 0.0 {
                    return (vec![0.0; w.len()], vec![0.0; d]);
                }
                let eps = 1e-5 / vn;
                let at = |sign: f64| {
                    let wp: Vec<f64> = w.iter().zip(v).map(|(a, b)| a + sign * eps * b).collect();
                    ffn::backward(self.widths, self.act, &wp, self.x, self.n, self.head(), true)
                };
                let (p, m) = (at(1.0), at(-1.0));
                let diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
                    a.iter().zip(b).map(|(u, l)| (u - l) / (2.0 * eps)).collect()
                };
                let hx = diff(&p.inputs.as_ref().unwrap()[row.clone()], &m.inputs.as_ref().unwrap()[row]);
                (diff(&p.params, &m.params), hx)
            }
        }
    }
}

/// A forward gradient-descent run, with its trajectory when stored.
pub(crate) struct ForwardRun {
    pub params: Vec<f64>,
    /// `stored[t]` holds `w_t`; empty for [`Trajectory::Reversed`].
    stored: Vec<Vec<f64>>,
}

pub(crate) fn forward_run(
    widths: &[usize],
    act: Activation,
    init: Vec<f64>,
    x: &DMatrix<f64>,
    labels: &[usize],
    cfg: &BackGradConfig,
) -> Result<ForwardRun> {
    cfg.validate()?;
    let xr = row_major(x);
    let mut stored = Vec::new();
    let record = (cfg.trajectory == Trajectory::Stored).then_some(&mut stored);
    let params = ffn::train_gd(widths, act, init, &xr, labels, cfg.inner_rate, cfg.steps, record)?;
    Ok(ForwardRun { params, stored })
}

/// Back-gradient of the mean cross-entropy on `(gen_x, gen_labels)` after
/// `cfg.steps` steps of gradient descent from `init` on the training rows.
#[allow(clippy::too_many_arguments)]
pub(crate) fn back_gradient_matrix(
    widths: &[usize],
    act: Activation,
    init: Vec<f64>,
    x: &DMatrix<f64>,
    labels: &[usize],
    e: usize,
    gen_x: &DMatrix<f64>,
    gen_labels: &[usize],
    cfg: &BackGradConfig,
) -> Result<BackGradOutput> {
    let run = forward_run(widths, act, init, x, labels, cfg)?;
    let (gradient, loss) = reverse_run(widths, act, &run, x, labels, e, gen_x, gen_labels, cfg)?;
    Ok(BackGradOutput {
        gradient,
        loss,
        params: run.params,
    })
}

/// Walks `run` backwards; returns `∇_{x_e} A` and the outer loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn reverse_run(
    widths: &[usize],
    act: Activation,
    run: &ForwardRun,
    x: &DMatrix<f64>,
    labels: &[usize],
    e: usize,
    gen_x: &DMatrix<f64>,
    gen_labels: &[usize],
    cfg: &BackGradConfig,
) -> Result<(DVector<f64>, f64)> {
    cfg.validate()?;
    if cfg.trajectory == Trajectory::Stored && run.stored.len() != cfg.steps {
        return Err(Error::config("forward run does not match the back-gradient config"));
    }
    let xr = row_major(x);
    let prob = Problem {
        widths,
        act,
        x: &xr,
        labels,
        n: labels.len(),
        e,
    };
    let alpha = cfg.inner_rate;
    let gx = row_major(gen_x);
    let m = gen_labels.len();
    let outer = ffn::backward(
        widths,
        act,
        &run.params,
        &gx,
        m,
        Head::CrossEntropy {
            labels: gen_labels,
            scale: 1.0 / m as f64,
        },
        false,
    );
    let mut dw = outer.params;
    let mut dx = vec![0.0; widths[0]];
    let mut w = run.params.clone();
    for t in (0..cfg.steps).rev() {
        // w becomes w_t, the weights the forward step t+1 started from
        match cfg.trajectory {
            Trajectory::Stored => w.clone_from(&run.stored[t]),
            Trajectory::Reversed => {
                let g = prob.gradient(&w);
                for (a, b) in w.iter_mut().zip(&g) {
                    *a += alpha * b;
                }
            }
        }
        let (hw, hx) = prob.hvp(&w, &dw, cfg.hvp_mode);
        for (a, b) in dx.iter_mut().zip(&hx) {
            *a -= alpha * b;
        }
        for (a, b) in dw.iter_mut().zip(&hw) {
            *a -= alpha * b;
        }
        if dx.iter().chain(&dw).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("back-gradient at reverse step {}", t + 1)));
        }
    }
    Ok((DVector::from_vec(dx), outer.loss))
}

/// Back-gradient of a full-batch network spec with respect to training
/// point `e`, on all features.
pub fn ffn_back_gradient(
    spec: &ModelSpec,
    train: &Dataset,
    e: usize,
    gen: &Dataset,
    cfg: &BackGradConfig,
) -> Result<InfluenceGradient> {
    ffn_back_gradient_masked(spec, train, e, gen, None, cfg)
}

/// As [`ffn_back_gradient`] with the network reading only the masked
/// columns.
pub fn ffn_back_gradient_masked(
    spec: &ModelSpec,
    train: &Dataset,
    e: usize,
    gen: &Dataset,
    mask: Option<&FeatureMask>,
    cfg: &BackGradConfig,
) -> Result<InfluenceGradient> {
    ffn_back_gradient_rows(spec, train, e, GenRows::of(gen), mask, cfg).map(|(g, _)| g)
}

/// Back-gradient together with the trained parameters `w_T`.
pub(crate) fn ffn_back_gradient_rows(
    spec: &ModelSpec,
    train: &Dataset,
    e: usize,
    gen: GenRows<'_>,
    mask: Option<&FeatureMask>,
    cfg: &BackGradConfig,
) -> Result<(InfluenceGradient, Vec<f64>)> {
    if spec.kind != ModelKind::FeedForward {
        return Err(Error::config("back-gradient needs a feed-forward spec"));
    }
    if spec.standardize {
        return Err(Error::config("back-gradient needs an unstandardized spec"));
    }
    spec.validate()?;
    let cols: Vec<usize> = match mask {
        Some(m) => m.indices(),
        None => (0..train.n_features()).collect(),
    };
    let x = train.features().select_columns(cols.iter());
    let gx = gen.x.select_columns(cols.iter());
    let widths = spec.network_widths(cols.len(), 2)?;
    // shape checks shared with the linear routines
    let probe = crate::models::TrainedModel {
        spec: spec.clone(),
        n_features: train.n_features(),
        n_classes: 2,
        standardizer: None,
        feature_mask: mask.cloned(),
        params: crate::models::ModelParams::Network(crate::models::Network {
            widths: widths.clone(),
            activation: spec.activation,
            params: Vec::new(),
        }),
    };
    check_inputs(&probe, train, e, gen)?;
    let out = back_gradient_matrix(
        &widths,
        spec.activation,
        ffn::init_params(&widths, spec.seed),
        &x,
        train.labels(),
        e,
        &gx,
        gen.labels,
        cfg,
    )?;
    let g = InfluenceGradient {
        gradient: super::lift(&probe, out.gradient),
        loss: out.loss,
        non_support: false,
    };
    Ok((g, out.params))
}
