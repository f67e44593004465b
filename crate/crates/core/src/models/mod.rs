//! Linear SVM, logistic regression and a feed-forward network behind one
//! interface: fit, decision function, prediction and input gradients.

pub(crate) mod dual;
pub(crate) mod ffn;
pub(crate) mod logistic;
mod persist;
pub(crate) mod svm;

pub use ffn::{Activation, Network};
pub use persist::MODEL_FORMAT_VERSION;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMask};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    LinearSvm,
    LogisticRegression,
    FeedForward,
}

impl ModelKind {
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::LinearSvm => "svm",
            ModelKind::LogisticRegression => "lr",
            ModelKind::FeedForward => "ffn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Mini-batch Adam for `epochs` passes.
    #[default]
    Adam,
    /// Full-batch gradient descent for `inner_iters` steps.
    FullBatchGd,
}

/// Declarative classifier configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Weight on the data term (SVM hinge, logistic loss); the regularizer
    /// has unit weight.
    #[serde(rename = "C")]
    pub c: f64,
    /// Network widths including input and output; `0` at either end is
    /// filled from the data.
    pub layers: Vec<usize>,
    pub activation: Activation,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub inner_iters: usize,
    pub seed: u64,
    /// Z-score features with training statistics before fitting.
    pub standardize: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::LinearSvm,
            c: 1.0,
            layers: vec![0, 64, 32, 0],
            activation: Activation::Relu,
            optimizer: Optimizer::Adam,
            learning_rate: 0.001,
            epochs: 10,
            batch_size: 10,
            inner_iters: 400,
            seed: 0,
            standardize: false,
        }
    }
}

impl ModelSpec {
    pub fn linear_svm(c: f64) -> Self {
        ModelSpec {
            kind: ModelKind::LinearSvm,
            c,
            ..Default::default()
        }
    }

    pub fn logistic(c: f64) -> Self {
        ModelSpec {
            kind: ModelKind::LogisticRegression,
            c,
            ..Default::default()
        }
    }

    /// Three fully connected ReLU layers trained with Adam (lr 0.001,
    /// batch 10, 10 epochs).
    pub fn feed_forward() -> Self {
        ModelSpec {
            kind: ModelKind::FeedForward,
            ..Default::default()
        }
    }

    /// One sigmoid hidden layer of 100 units, full-batch gradient descent
    /// with lr 0.1 for 400 steps.
    pub fn feed_forward_full_batch() -> Self {
        ModelSpec {
            kind: ModelKind::FeedForward,
            layers: vec![0, 100, 0],
            activation: Activation::Sigmoid,
            optimizer: Optimizer::FullBatchGd,
            learning_rate: 0.1,
            inner_iters: 400,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config(format!("C must be positive, got {}", self.c)));
        }
        if self.kind == ModelKind::FeedForward {
            if self.layers.len() < 2 {
                return Err(Error::config("network needs at least input and output widths"));
            }
            if self.layers[1..self.layers.len() - 1].contains(&0) {
                return Err(Error::config("hidden layer widths must be positive"));
            }
            if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
                return Err(Error::config("learning_rate must be positive"));
            }
            if self.epochs == 0 || self.batch_size == 0 || self.inner_iters == 0 {
                return Err(Error::config("epochs, batch_size and inner_iters must be positive"));
            }
        }
        Ok(())
    }

    /// Concrete network widths for `d` inputs and `k` classes.
    pub fn network_widths(&self, d: usize, k: usize) -> Result<Vec<usize>> {
        let mut w = self.layers.clone();
        let last = w.len() - 1;
        for (idx, expect) in [(0, d), (last, k)] {
            if w[idx] == 0 {
                w[idx] = expect;
            } else if w[idx] != expect {
                return Err(Error::config(format!(
                    "network layer {idx} has width {} but data needs {expect}",
                    w[idx]
                )));
            }
        }
        Ok(w)
    }
}

/// Quantity whose input gradient drives an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientObjective {
    /// The model's training loss at `(x, y)`.
    #[default]
    Loss,
    /// The decision function: label-signed for binary models, the target
    /// class score for one-vs-rest SVMs.
    DecisionFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mean[j]);
            col /= self.scale[j];
        }
        z
    }
}

/// Linear parameters: one weight row for binary problems (positive scores
/// mean class 1), one row per class otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    /// SVM dual coefficients, one vector per weight row.
    pub dual: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Linear(LinearParams),
    Network(Network),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    /// Input dimension the model expects (before masking).
    pub n_features: usize,
    pub n_classes: usize,
    pub standardizer: Option<Standardizer>,
    /// Columns the model reads; gradients are zero elsewhere.
    pub feature_mask: Option<FeatureMask>,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn linear(&self) -> Option<&LinearParams> {
        match &self.params {
            ModelParams::Linear(p) => Some(p),
            ModelParams::Network(_) => None,
        }
    }

    pub fn network(&self) -> Option<&Network> {
        match &self.params {
            ModelParams::Network(n) => Some(n),
            ModelParams::Linear(_) => None,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.n_classes == 2
    }

    /// Columns read, transformed: the matrix the parameters act on.
    pub(crate) fn prepare(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::config(format!(
                "model expects {} features, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        let masked = match &self.feature_mask {
            Some(m) => x.select_columns(m.indices().iter()),
            None => x.clone(),
        };
        Ok(match &self.standardizer {
            Some(s) => s.apply(&masked),
            None => masked,
        })
    }

    /// Maps gradients in model space back to raw input coordinates.
    pub(crate) fn lift_gradient(&self, g: DMatrix<f64>) -> DMatrix<f64> {
        let mut g = g;
        if let Some(s) = &self.standardizer {
            for (j, mut col) in g.column_iter_mut().enumerate() {
                col /= s.scale[j];
            }
        }
        match &self.feature_mask {
            Some(m) => {
                let mut full = DMatrix::zeros(g.nrows(), self.n_features);
                for (k, j) in m.indices().into_iter().enumerate() {
                    full.set_column(j, &g.column(k));
                }
                full
            }
            None => g,
        }
    }
}

pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<TrainedModel> {
    fit_inner(spec, train.features(), train.labels(), train.n_classes(), None, None)
}

/// Refit starting from `previous` (same spec and data shape); used when the
/// training data changed slightly.
pub fn fit_warm(spec: &ModelSpec, train: &Dataset, previous: &TrainedModel) -> Result<TrainedModel> {
    fit_inner(
        spec,
        train.features(),
        train.labels(),
        train.n_classes(),
        Some(previous),
        None,
    )
}

/// Fits on the masked columns of `train`; the model accepts full-width
/// input.
pub fn fit_masked(spec: &ModelSpec, train: &Dataset, mask: &FeatureMask) -> Result<TrainedModel> {
    fit_inner(
        spec,
        train.features(),
        train.labels(),
        train.n_classes(),
        None,
        Some(mask),
    )
}

pub(crate) fn fit_matrix(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    warm: Option<&TrainedModel>,
) -> Result<TrainedModel> {
    fit_inner(spec, x, labels, n_classes, warm, None)
}

fn fit_inner(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    warm: Option<&TrainedModel>,
    mask: Option<&FeatureMask>,
) -> Result<TrainedModel> {
    spec.validate()?;
    if x.nrows() == 0 || x.nrows() != labels.len() {
        return Err(Error::data("training set is empty or mislabeled"));
    }
    let mut present = vec![false; n_classes];
    for &y in labels {
        if y >= n_classes {
            return Err(Error::data(format!("label {y} out of range")));
        }
        present[y] = true;
    }
    let n_present = present.iter().filter(|&&p| p).count();
    if n_present < 2 {
        return Err(Error::data("training set contains a single class"));
    }
    if n_present < n_classes {
        return Err(Error::data("training set is missing a class"));
    }
    if let Some(m) = mask {
        if m.selected.len() != x.ncols() {
            return Err(Error::config("feature mask width does not match data"));
        }
    }
    let masked = match mask {
        Some(m) => x.select_columns(m.indices().iter()),
        None => x.clone(),
    };
    let standardizer = spec.standardize.then(|| Standardizer::fit(&masked));
    let z = match &standardizer {
        Some(s) => s.apply(&masked),
        None => masked,
    };
    let warm = warm.filter(|w| {
        w.spec.kind == spec.kind && w.n_classes == n_classes && w.n_features == x.ncols() && w.feature_mask.is_none()
    });
    let params = match spec.kind {
        ModelKind::LinearSvm => ModelParams::Linear(fit_svm(spec, &z, labels, n_classes, warm)?),
        ModelKind::LogisticRegression => {
            ModelParams::Linear(fit_logistic(spec, &z, labels, n_classes, warm)?)
        }
        ModelKind::FeedForward => ModelParams::Network(fit_network(spec, &z, labels, n_classes)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        n_features: x.ncols(),
        n_classes,
        standardizer,
        feature_mask: mask.cloned(),
        params,
    })
}

fn one_vs_rest_targets(labels: &[usize], n_classes: usize) -> Vec<Vec<f64>> {
    if n_classes == 2 {
        vec![crate::data::signed(labels)]
    } else {
        (0..n_classes)
            .map(|c| labels.iter().map(|&y| if y == c { 1.0 } else { -1.0 }).collect())
            .collect()
    }
}

fn fit_svm(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    warm: Option<&TrainedModel>,
) -> Result<LinearParams> {
    let gram = x * x.transpose();
    let targets = one_vs_rest_targets(labels, n_classes);
    let warm_dual = warm.and_then(|m| m.linear()).and_then(|p| p.dual.clone());
    let d = x.ncols();
    let mut weights = DMatrix::zeros(targets.len(), d);
    let mut bias = DVector::zeros(targets.len());
    let mut duals = Vec::with_capacity(targets.len());
    for (r, y) in targets.iter().enumerate() {
        let start = warm_dual
            .as_ref()
            .and_then(|w| w.get(r))
            .filter(|a| a.len() == y.len())
            .map(|a| a.as_slice());
        let sol = svm::solve(&gram, y, spec.c, start, svm::SmoOptions::default())?;
        log::trace!("smo: {} iterations, duality gap {:.2e}", sol.iterations, sol.duality_gap);
        let w = svm::weights(x, y, &sol.alpha);
        weights.set_row(r, &w.transpose());
        bias[r] = sol.bias;
        duals.push(sol.alpha);
    }
    Ok(LinearParams {
        weights,
        bias,
        dual: Some(duals),
    })
}

fn fit_logistic(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    warm: Option<&TrainedModel>,
) -> Result<LinearParams> {
    let warm = warm.and_then(|m| m.linear());
    if n_classes == 2 {
        let s = crate::data::signed(labels);
        let start = warm.map(|p| (p.weights.row(0).transpose(), p.bias[0]));
        let fit = logistic::fit_binary(x, &s, spec.c, start.as_ref().map(|(w, b)| (w, *b)))?;
        log::trace!("newton: {} iterations, gradient norm {:.2e}", fit.iterations, fit.grad_norm);
        Ok(LinearParams {
            weights: DMatrix::from_row_slice(1, fit.w.len(), fit.w.as_slice()),
            bias: DVector::from_element(1, fit.b),
            dual: None,
        })
    } else {
        let start = warm.map(|p| (&p.weights, &p.bias));
        let fit = logistic::fit_multinomial(x, labels, n_classes, spec.c, start)?;
        log::trace!("newton: {} iterations, gradient norm {:.2e}", fit.iterations, fit.grad_norm);
        Ok(LinearParams {
            weights: fit.w,
            bias: fit.b,
            dual: None,
        })
    }
}

/// Row-major copy of a matrix.
pub(crate) fn row_major(x: &DMatrix<f64>) -> Vec<f64> {
    x.transpose().as_slice().to_vec()
}

fn fit_network(spec: &ModelSpec, x: &DMatrix<f64>, labels: &[usize], n_classes: usize) -> Result<Network> {
    let widths = spec.network_widths(x.ncols(), n_classes)?;
    let init = ffn::init_params(&widths, spec.seed);
    let xr = row_major(x);
    let params = match spec.optimizer {
        Optimizer::Adam => ffn::train_adam(
            &widths,
            spec.activation,
            init,
            &xr,
            labels,
            ffn::AdamConfig {
                learning_rate: spec.learning_rate,
                epochs: spec.epochs,
                batch_size: spec.batch_size,
                seed: spec.seed,
            },
        )?,
        Optimizer::FullBatchGd => ffn::train_gd(
            &widths,
            spec.activation,
            init,
            &xr,
            labels,
            spec.learning_rate,
            spec.inner_iters,
            None,
        )?,
    };
    Ok(Network {
        widths,
        activation: spec.activation,
        params,
    })
}

/// Per-class scores: the signed margin `w.x + b` for binary linear models
/// (one column), one score per class for multiclass linear models, and
/// pre-softmax logits for networks.
pub fn decision_function(model: &TrainedModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let z = model.prepare(x)?;
    Ok(match &model.params {
        ModelParams::Linear(p) => {
            let mut s = &z * p.weights.transpose();
            for mut row in s.row_iter_mut() {
                row += p.bias.transpose();
            }
            s
        }
        ModelParams::Network(net) => {
            let n = z.nrows();
            let k = *net.widths.last().unwrap();
            let l = ffn::logits(&net.widths, net.activation, &net.params, &row_major(&z), n);
            DMatrix::from_row_slice(n, k, &l)
        }
    })
}

/// Scalar decision value of a binary model: positive means class 1.
pub fn binary_decision(model: &TrainedModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !model.is_binary() {
        return Err(Error::config("binary decision requested from a multiclass model"));
    }
    let s = decision_function(model, x)?;
    Ok(match model.params {
        ModelParams::Linear(_) => s.column(0).iter().copied().collect(),
        ModelParams::Network(_) => s.row_iter().map(|r| r[1] - r[0]).collect(),
    })
}

pub fn predict(model: &TrainedModel, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    let s = decision_function(model, x)?;
    if s.ncols() == 1 {
        return Ok(s.iter().map(|&v| usize::from(v > 0.0)).collect());
    }
    Ok(s.row_iter()
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

pub fn accuracy(model: &TrainedModel, x: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    let p = predict(model, x)?;
    let correct = p.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Gradient of `objective` with respect to one input row.
pub fn input_gradient(
    model: &TrainedModel,
    x: &[f64],
    y: usize,
    objective: GradientObjective,
) -> Result<DVector<f64>> {
    let xm = DMatrix::from_row_slice(1, x.len(), x);
    let g = input_gradients(model, &xm, &[y], objective)?;
    Ok(g.row(0).transpose())
}

/// Per-row input gradients of `objective` (one row per sample).
pub fn input_gradients(
    model: &TrainedModel,
    x: &DMatrix<f64>,
    labels: &[usize],
    objective: GradientObjective,
) -> Result<DMatrix<f64>> {
    if labels.len() != x.nrows() {
        return Err(Error::config("label count does not match rows"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= model.n_classes) {
        return Err(Error::config(format!("label {bad} out of range")));
    }
    let z = model.prepare(x)?;
    let n = z.nrows();
    let g = match &model.params {
        ModelParams::Linear(p) => linear_input_gradients(model, p, &z, labels, objective)?,
        ModelParams::Network(net) => {
            let xr = row_major(&z);
            let signs;
            let head = match objective {
                GradientObjective::Loss => ffn::Head::CrossEntropy { labels, scale: 1.0 },
                GradientObjective::DecisionFunction => {
                    if !model.is_binary() {
                        return Err(Error::config(
                            "decision-function gradient of a multiclass network needs a target class; use the loss objective",
                        ));
                    }
                    signs = crate::data::signed(labels);
                    ffn::Head::Margin { signs: &signs, scale: 1.0 }
                }
            };
            let out = ffn::backward(&net.widths, net.activation, &net.params, &xr, n, head, true);
            DMatrix::from_row_slice(n, z.ncols(), &out.inputs.unwrap())
        }
    };
    Ok(model.lift_gradient(g))
}

fn linear_input_gradients(
    model: &TrainedModel,
    p: &LinearParams,
    z: &DMatrix<f64>,
    labels: &[usize],
    objective: GradientObjective,
) -> Result<DMatrix<f64>> {
    let n = z.nrows();
    let d = z.ncols();
    let mut scores = z * p.weights.transpose();
    for mut row in scores.row_iter_mut() {
        row += p.bias.transpose();
    }
    let binary = p.weights.nrows() == 1;
    // coefficient of each weight row in the gradient of each sample
    let mut coef = DMatrix::zeros(n, p.weights.nrows());
    for i in 0..n {
        let y = labels[i];
        match (objective, model.spec.kind, binary) {
            (GradientObjective::DecisionFunction, _, true) => {
                coef[(i, 0)] = if y == 1 { 1.0 } else { -1.0 };
            }
            (GradientObjective::DecisionFunction, ModelKind::LinearSvm, false) => {
                coef[(i, y)] = 1.0;
            }
            (GradientObjective::DecisionFunction, _, false) => {
                return Err(Error::config(
                    "decision-function gradient is only defined for binary or one-vs-rest models",
                ));
            }
            (GradientObjective::Loss, ModelKind::LinearSvm, _) => {
                // sum of one-vs-rest hinge losses
                for r in 0..p.weights.nrows() {
                    let s = if binary {
                        if y == 1 { 1.0 } else { -1.0 }
                    } else if r == y {
                        1.0
                    } else {
                        -1.0
                    };
                    if s * scores[(i, r)] < 1.0 {
                        coef[(i, r)] = -s;
                    }
                }
            }
            (GradientObjective::Loss, _, true) => {
                let s = if y == 1 { 1.0 } else { -1.0 };
                coef[(i, 0)] = -s * (1.0 - logistic::sigmoid(s * scores[(i, 0)]));
            }
            (GradientObjective::Loss, _, false) => {
                let row = scores.row(i);
                let m = row.max();
                let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
                let zsum: f64 = e.iter().sum();
                for r in 0..e.len() {
                    coef[(i, r)] = e[r] / zsum - if r == y { 1.0 } else { 0.0 };
                }
            }
        }
    }
    let g = coef * &p.weights;
    debug_assert_eq!(g.ncols(), d);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Role, SyntheticRecipe};

    fn two_points() -> Dataset {
        let x = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        Dataset::from_parts(x, vec![0, 1], 2, "two", Role::Training).unwrap()
    }

    fn blobs(k: usize, seed: u64) -> Dataset {
        generate_synthetic(&SyntheticRecipe {
            n_per_class: vec![15; k],
            n_features: 6,
            class_shift: 1.5,
            noise_sd: 1.0,
            seed,
            block_offset: 0,
        })
        .unwrap()
    }

    #[test]
    fn svm_on_two_points() {
        let m = fit(&ModelSpec::linear_svm(1.0), &two_points()).unwrap();
        let p = m.linear().unwrap();
        assert!(p.weights[(0, 0)] > 0.0);
        let alpha = &p.dual.as_ref().unwrap()[0];
        assert!(alpha.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn logistic_on_two_points() {
        let ds = two_points();
        let m = fit(&ModelSpec::logistic(1.0), &ds).unwrap();
        let df = binary_decision(&m, ds.features()).unwrap();
        assert!(df[0] < 0.0 && df[1] > 0.0);
    }

    #[test]
    fn boundary_and_linearity() {
        let ds = two_points();
        let m = fit(&ModelSpec::linear_svm(1.0), &ds).unwrap();
        let p = m.linear().unwrap();
        let on_boundary = -p.bias[0] / p.weights[(0, 0)];
        let df = binary_decision(&m, &DMatrix::from_element(1, 1, on_boundary)).unwrap();
        assert!(df[0].abs() <= 1e-12);
        let mut zero_bias = m.clone();
        if let ModelParams::Linear(lp) = &mut zero_bias.params {
            lp.bias[0] = 0.0;
        }
        let x = DMatrix::from_element(1, 1, 0.37);
        let a = binary_decision(&zero_bias, &x).unwrap()[0];
        let b = binary_decision(&zero_bias, &(x * 2.0)).unwrap()[0];
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn rejects_single_class_and_bad_dimensions() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(fit_matrix(&ModelSpec::logistic(1.0), &x, &[1, 1], 2, None).is_err());
        let m = fit(&ModelSpec::logistic(1.0), &two_points()).unwrap();
        assert!(predict(&m, &DMatrix::zeros(1, 3)).is_err());
        assert!(input_gradient(&m, &[0.0, 0.0], 0, GradientObjective::Loss).is_err());
    }

    #[test]
    fn linear_decision_gradient_is_the_weight_vector() {
        let ds = blobs(2, 1);
        for spec in [ModelSpec::linear_svm(1.0), ModelSpec::logistic(1.0)] {
            let m = fit(&spec, &ds).unwrap();
            let w = m.linear().unwrap().weights.row(0).transpose();
            for i in [0, 7, 20] {
                let x: Vec<f64> = ds.features().row(i).iter().copied().collect();
                let g = input_gradient(&m, &x, 1, GradientObjective::DecisionFunction).unwrap();
                assert_eq!(g, w);
                let g0 = input_gradient(&m, &x, 0, GradientObjective::DecisionFunction).unwrap();
                assert_eq!(g0, -&w);
            }
        }
    }

    #[test]
    fn saturated_logistic_loss_has_vanishing_gradient() {
        let ds = two_points();
        let m = fit(&ModelSpec::logistic(1.0), &ds).unwrap();
        let p = m.linear().unwrap();
        // a point at margin 20 on the positive side
        let x = (20.0 - p.bias[0]) / p.weights[(0, 0)];
        let g = input_gradient(&m, &[x], 1, GradientObjective::Loss).unwrap();
        assert!(g.norm() <= 1e-8, "{}", g.norm());
    }

    #[test]
    fn multiclass_models_predict_their_training_blobs() {
        let ds = blobs(3, 5);
        for spec in [ModelSpec::linear_svm(1.0), ModelSpec::logistic(1.0)] {
            let m = fit(&spec, &ds).unwrap();
            assert!(accuracy(&m, ds.features(), ds.labels()).unwrap() > 0.8);
        }
        let mut spec = ModelSpec::feed_forward();
        spec.epochs = 200;
        spec.learning_rate = 0.01;
        let m = fit(&spec, &ds).unwrap();
        assert!(accuracy(&m, ds.features(), ds.labels()).unwrap() > 0.8);
    }

    #[test]
    fn decision_function_gradient_errors_for_multiclass_networks() {
        let ds = blobs(3, 2);
        let m = fit(&ModelSpec::feed_forward(), &ds).unwrap();
        let x: Vec<f64> = ds.features().row(0).iter().copied().collect();
        assert!(input_gradient(&m, &x, 0, GradientObjective::DecisionFunction).is_err());
        assert!(input_gradient(&m, &x, 0, GradientObjective::Loss).is_ok());
        let lr = fit(&ModelSpec::logistic(1.0), &ds).unwrap();
        assert!(input_gradient(&lr, &x, 0, GradientObjective::DecisionFunction).is_err());
        let svm = fit(&ModelSpec::linear_svm(1.0), &ds).unwrap();
        let g = input_gradient(&svm, &x, 2, GradientObjective::DecisionFunction).unwrap();
        assert_eq!(g, svm.linear().unwrap().weights.row(2).transpose());
    }

    #[test]
    fn standardized_and_masked_gradients_match_finite_differences() {
        let ds = blobs(2, 9);
        let mask = crate::data::select_features(&ds, 0.5).unwrap();
        let mut spec = ModelSpec::logistic(0.5);
        spec.standardize = true;
        let m = fit_masked(&spec, &ds, &mask).unwrap();
        let x: Vec<f64> = ds.features().row(3).iter().copied().collect();
        let g = input_gradient(&m, &x, 0, GradientObjective::Loss).unwrap();
        let loss = |v: &[f64]| {
            let df = binary_decision(&m, &DMatrix::from_row_slice(1, v.len(), v)).unwrap()[0];
            logistic::softplus(df)
        };
        for j in 0..x.len() {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7);
            if !mask.selected[j] {
                assert_eq!(g[j], 0.0);
            }
        }
    }
}
