use nalgebra::{DMatrix, DVector};

use super::{check_inputs, lift, GenRows, InfluenceGradient, RIDGE};
use crate::data::{signed, Dataset};
use crate::models::{ModelKind, TrainedModel};
use crate::{Error, Result};

/// Margin support vectors have `tol < α_i < C - tol` with `tol = 1e-6 C`.
const BOUND_TOL: f64 = 1e-6;

/// Quantities of the implicit derivative of a linear SVM at its optimum.
///
/// Only margin support vectors `s` move when a training point moves;
/// points at either bound keep their dual weight. With the linear kernel,
/// `Q = yy' ∘ XX'`, `v = Q_ss⁻¹ y_s` and `ζ = y_s' v`.
#[derive(Debug, Clone)]
pub struct SvmInfluenceState {
    /// Training inputs in model coordinates.
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub alpha: Vec<f64>,
    pub c: f64,
    pub weights: DVector<f64>,
    pub bias: f64,
    /// Margin support vector indices.
    pub support: Vec<usize>,
    /// LU factor of the bordered system `[Q_ss + ridge I, y_s; y_s', 0]`.
    bordered: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub v: DVector<f64>,
    pub zeta: f64,
}

impl SvmInfluenceState {
    pub fn new(model: &TrainedModel, train: &Dataset) -> Result<Self> {
        if model.spec.kind != ModelKind::LinearSvm {
            return Err(Error::config("svm influence needs a linear SVM"));
        }
        let p = model.linear().unwrap();
        let alpha = p
            .dual
            .as_ref()
            .map(|d| d[0].clone())
            .ok_or_else(|| Error::config("model carries no dual coefficients"))?;
        if alpha.len() != train.n_samples() {
            return Err(Error::config("model was not trained on this training set"));
        }
        let x = model.prepare(train.features())?;
        let y = signed(train.labels());
        let c = model.spec.c;
        let tol = BOUND_TOL * c;
        let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > tol && alpha[i] < c - tol).collect();
        if support.is_empty() {
            return Err(Error::Singular("no margin support vectors".into()));
        }
        let xs = x.select_rows(support.iter());
        let ys = DVector::from_iterator(support.len(), support.iter().map(|&i| y[i]));
        let mut q = &xs * xs.transpose();
        for a in 0..support.len() {
            for b in 0..support.len() {
                q[(a, b)] *= ys[a] * ys[b];
            }
            q[(a, a)] += RIDGE;
        }
        let chol = q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("Q_ss is not positive definite".into()))?;
        let v = chol.solve(&ys);
        let ns = support.len();
        let mut b = DMatrix::zeros(ns + 1, ns + 1);
        b.view_mut((0, 0), (ns, ns)).copy_from(&q);
        for a in 0..ns {
            b[(a, ns)] = ys[a];
            b[(ns, a)] = ys[a];
        }
        let bordered = b.lu();
        if !bordered.is_invertible() {
            return Err(Error::Singular("bordered margin system".into()));
        }
        let zeta = ys.dot(&v);
        if !(zeta.abs() > 0.0 && zeta.is_finite()) {
            return Err(Error::Singular("y_s' Q_ss^-1 y_s vanishes".into()));
        }
        Ok(SvmInfluenceState {
            x,
            y,
            alpha,
            c,
            weights: p.weights.row(0).transpose(),
            bias: p.bias[0],
            support,
            bordered,
            v,
            zeta,
        })
    }

    /// `M_k = -(1/ζ)(Q_ks(ζ Q_ss⁻¹ - vv') + y_k v')` for a point `x_k`
    /// with label `y_k`, as a row over `s`.
    ///
    /// Evaluated through the bordered system, which stays well posed when
    /// `Q_ss` is rank deficient (more margin vectors than features).
    pub fn m_k(&self, x_k: &DVector<f64>, y_k: f64) -> DVector<f64> {
        let ns = self.support.len();
        let mut q = DVector::zeros(ns + 1);
        for (a, &j) in self.support.iter().enumerate() {
            q[a] = y_k * self.y[j] * self.x.row(j).transpose().dot(x_k);
        }
        q[ns] = y_k;
        let sol = self.bordered.solve(&q).expect("bordered system checked invertible");
        -sol.rows(0, ns).into_owned()
    }

    /// `∂(Q_s· α)/∂x_e`: one row per margin support vector.
    fn coupling(&self, e: usize) -> DMatrix<f64> {
        let d = self.x.ncols();
        let (ye, ae) = (self.y[e], self.alpha[e]);
        let mut r = DMatrix::zeros(self.support.len(), d);
        for (a, &j) in self.support.iter().enumerate() {
            if j == e {
                let row = &self.weights * ye + self.x.row(e).transpose() * ae;
                r.set_row(a, &row.transpose());
            } else {
                r.set_row(a, &(self.x.row(j) * (self.y[j] * ye * ae)));
            }
        }
        r
    }
}

/// Gradient of the mean hinge loss over `gen` with respect to training
/// point `e` of a binary linear SVM.
pub fn svm_influence_gradient(model: &TrainedModel, train: &Dataset, e: usize, gen: &Dataset) -> Result<InfluenceGradient> {
    let state = SvmInfluenceState::new(model, train)?;
    svm_influence_rows(&state, model, train, e, GenRows::of(gen))
}

pub(crate) fn svm_influence_rows(
    state: &SvmInfluenceState,
    model: &TrainedModel,
    train: &Dataset,
    e: usize,
    gen: GenRows<'_>,
) -> Result<InfluenceGradient> {
    check_inputs(model, train, e, gen)?;
    let xg = model.prepare(gen.x)?;
    let yg = signed(gen.labels);
    let m = yg.len() as f64;
    let margins: Vec<f64> = (0..yg.len())
        .map(|k| yg[k] * (xg.row(k).transpose().dot(&state.weights) + state.bias))
        .collect();
    let loss = margins.iter().map(|&t| (1.0 - t).max(0.0)).sum::<f64>() / m;
    let d = xg.ncols();
    if state.alpha[e] <= 0.0 {
        return Ok(InfluenceGradient {
            gradient: DVector::zeros(model.n_features),
            loss,
            non_support: true,
        });
    }
    let r = state.coupling(e);
    let mut total = DVector::zeros(d);
    for k in 0..yg.len() {
        if margins[k] >= 1.0 {
            continue;
        }
        let xk = xg.row(k).transpose();
        let mk = state.m_k(&xk, yg[k]);
        total += r.tr_mul(&mk) + xk * (yg[k] * state.y[e] * state.alpha[e]);
    }
    let g = -total / m;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svm influence gradient".into()));
    }
    Ok(InfluenceGradient {
        gradient: lift(model, g),
        loss,
        non_support: false,
    })
}
