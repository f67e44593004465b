//! Gradients of a generalization loss with respect to one training point,
//! through the dependence of the trained model on that point.
//!
//! All three routines return `∇_{x_e} A`, the gradient of the outer loss
//! `A` (mean hinge, mean logistic or mean cross-entropy over the supplied
//! generalization subset, matching each model's own training loss). An
//! attacker lowers `A` by stepping against it. Gradients are returned in
//! raw input coordinates; components outside a model's feature mask are
//! zero.

mod backgrad;
mod logistic;
mod svm;

pub use backgrad::{ffn_back_gradient, ffn_back_gradient_masked, BackGradConfig, HvpMode, Trajectory};
pub use logistic::{lr_influence_gradient, LrInfluenceState};
pub use svm::{svm_influence_gradient, SvmInfluenceState};

pub(crate) use backgrad::{forward_run, reverse_run, ForwardRun};
pub(crate) use logistic::lr_influence_rows;
pub(crate) use svm::svm_influence_rows;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::models::TrainedModel;
use crate::{Error, Result};

/// Ridge added to the inverted blocks (`Q_ss`, the logistic Hessian).
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGradient {
    pub gradient: DVector<f64>,
    /// Outer loss at the current model.
    pub loss: f64,
    /// The enhancement point has no dual weight, so the model does not
    /// depend on it and the gradient is zero.
    pub non_support: bool,
}

/// Generalization rows in raw input coordinates. Unlike a [`Dataset`],
/// a subset may hold a single class.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GenRows<'a> {
    pub x: &'a DMatrix<f64>,
    pub labels: &'a [usize],
}

impl<'a> GenRows<'a> {
    pub fn of(gen: &'a Dataset) -> Self {
        GenRows {
            x: gen.features(),
            labels: gen.labels(),
        }
    }
}

fn check_inputs(model: &TrainedModel, train: &Dataset, e: usize, gen: GenRows<'_>) -> Result<()> {
    if e >= train.n_samples() {
        return Err(Error::config(format!(
            "enhancement index {e} out of range for {} training samples",
            train.n_samples()
        )));
    }
    if gen.labels.is_empty() {
        return Err(Error::config("generalization subset is empty"));
    }
    if gen.labels.len() != gen.x.nrows() {
        return Err(Error::config("generalization labels do not match rows"));
    }
    if !model.is_binary() || train.n_classes() != 2 || gen.labels.iter().any(|&y| y > 1) {
        return Err(Error::config("influence gradients need binary labels"));
    }
    if model.standardizer.is_some() {
        return Err(Error::config("influence gradients need an unstandardized model"));
    }
    if train.n_features() != model.n_features || gen.x.ncols() != model.n_features {
        return Err(Error::config("feature dimension differs from the model's"));
    }
    Ok(())
}

/// Gradient in model coordinates lifted back to raw input coordinates.
fn lift(model: &TrainedModel, g: DVector<f64>) -> DVector<f64> {
    let m = nalgebra::DMatrix::from_row_slice(1, g.len(), g.as_slice());
    model.lift_gradient(m).row(0).transpose()
}
