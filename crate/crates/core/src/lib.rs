//! Enhancement attacks on classifiers.
//!
//! An enhancement attack perturbs a dataset so that models trained and
//! evaluated on it look better than they are. Three attack families are
//! provided:
//!
//! - [`attack_within`]: push every sample along a gradient of a model trained
//!   without it, inflating cross-validated accuracy.
//! - [`attack_method`]: the same, but with mutually orthogonal gradient
//!   components so one model gains while a competitor is held down.
//! - [`attack_cross`]: perturb a handful of low-confidence training points so
//!   a model generalizes better to an untouched external dataset, using the
//!   implicit gradients in [`influence`].
//!
//! [`models`] holds the classifiers (linear SVM, logistic regression, a small
//! feed-forward network), [`data`] the dataset plumbing, and [`harness`] the
//! experiment runner that produces result tables and plot data.

pub mod attack_cross;
pub mod attack_method;
pub mod attack_within;
pub mod data;
pub mod error;
pub mod harness;
pub mod influence;
pub(crate) mod linalg;
pub mod models;

pub use error::{Error, Result};
