use nalgebra::{DMatrix, DVector};

use super::{check_inputs, lift, GenRows, InfluenceGradient, RIDGE};
use crate::data::{signed, Dataset};
use crate::linalg::{spd_solve, symmetric_condition};
use crate::models::logistic::{binary_hessian, sigmoid, softplus};
use crate::models::{ModelKind, TrainedModel};
use crate::{Error, Result};

/// Largest accepted condition number of the ridged Hessian.
pub const MAX_CONDITION: f64 = 1e12;

/// Second-order quantities of binary logistic regression at its optimum.
///
/// The training objective is `0.5‖w‖² + C Σ log(1 + exp(-y_i(w·x_i + b)))`
/// with an unpenalized bias; `σ_i = σ(y_i(w·x_i + b))` and
/// `z_i = σ_i(1 - σ_i)`.
#[derive(Debug, Clone)]
pub struct LrInfluenceState {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub w: DVector<f64>,
    pub b: f64,
    pub c: f64,
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
    /// `[I + C X'ZX, C X'z; C z'X, C Σz]`, bias last.
    pub hessian: DMatrix<f64>,
}

impl LrInfluenceState {
    pub fn new(model: &TrainedModel, train: &Dataset) -> Result<Self> {
        if model.spec.kind != ModelKind::LogisticRegression {
            return Err(Error::config("logistic influence needs a logistic regression model"));
        }
        let p = model.linear().unwrap();
        let x = model.prepare(train.features())?;
        let y = signed(train.labels());
        let w = p.weights.row(0).transpose();
        let b = p.bias[0];
        let c = model.spec.c;
        let sigma: Vec<f64> = (0..y.len())
            .map(|i| sigmoid(y[i] * (x.row(i).transpose().dot(&w) + b)))
            .collect();
        let z: Vec<f64> = sigma.iter().map(|s| s * (1.0 - s)).collect();
        let h = binary_hessian(&x, &y, c, &w, b);
        Ok(LrInfluenceState { x, y, w, b, c, sigma, z, hessian: h })
    }

    /// `∂(∇_θ 𝓛)/∂x_e`, `(d+1) x d`: rows for `w` then `b`.
    pub fn mixed_derivative(&self, e: usize) -> DMatrix<f64> {
        let d = self.x.ncols();
        let xe = self.x.row(e).transpose();
        let mut m = DMatrix::zeros(d + 1, d);
        let ww = &xe * self.w.transpose() * (self.c * self.z[e]);
        m.view_mut((0, 0), (d, d)).copy_from(&ww);
        for j in 0..d {
            m[(j, j)] += self.c * (self.sigma[e] - 1.0) * self.y[e];
            m[(d, j)] = self.c * self.z[e] * self.w[j];
        }
        m
    }
}

/// Gradient of the mean logistic loss over `gen` with respect to training
/// point `e` of a binary logistic regression.
pub fn lr_influence_gradient(model: &TrainedModel, train: &Dataset, e: usize, gen: &Dataset) -> Result<InfluenceGradient> {
    let st = LrInfluenceState::new(model, train)?;
    lr_influence_rows(&st, model, train, e, GenRows::of(gen))
}

pub(crate) fn lr_influence_rows(
    st: &LrInfluenceState,
    model: &TrainedModel,
    train: &Dataset,
    e: usize,
    gen: GenRows<'_>,
) -> Result<InfluenceGradient> {
    check_inputs(model, train, e, gen)?;
    let xg = model.prepare(gen.x)?;
    let yg = signed(gen.labels);
    let m = yg.len() as f64;
    let d = xg.ncols();
    let mut grad_theta = DVector::zeros(d + 1);
    let mut loss = 0.0;
    for k in 0..yg.len() {
        let t = yg[k] * (xg.row(k).transpose().dot(&st.w) + st.b);
        loss += softplus(-t);
        let coef = -yg[k] * (1.0 - sigmoid(t)) / m;
        for j in 0..d {
            grad_theta[j] += coef * xg[(k, j)];
        }
        grad_theta[d] += coef;
    }
    loss /= m;
    let mut ridged = st.hessian.clone();
    for i in 0..=d {
        ridged[(i, i)] += RIDGE;
    }
    let cond = symmetric_condition(&ridged);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular(format!("logistic Hessian condition number {cond:.3e}")));
    }
    let rhs = DMatrix::from_column_slice(d + 1, 1, grad_theta.as_slice());
    let solved = spd_solve(&st.hessian, &rhs, RIDGE, "logistic Hessian")?;
    let g = -(st.mixed_derivative(e).tr_mul(&solved)).column(0).into_owned();
    Ok(InfluenceGradient {
        gradient: lift(model, g),
        loss,
        non_support: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Role, SyntheticRecipe};
    use crate::models::{binary_decision, fit, ModelSpec};

    fn instance(seed: u64) -> (Dataset, Dataset) {
        let recipe = SyntheticRecipe {
            n_per_class: vec![10, 10],
            n_features: 5,
            class_shift: 1.0,
            noise_sd: 1.0,
            seed,
            block_offset: 0,
        };
        let train = generate_synthetic(&recipe).unwrap();
        let gen = generate_synthetic(&SyntheticRecipe { seed: seed + 50, ..recipe })
            .unwrap()
            .derived("gen", Role::Generalization, "");
        (train, gen)
    }

    fn mean_logistic(model: &TrainedModel, gen: &Dataset) -> f64 {
        let df = binary_decision(model, gen.features()).unwrap();
        let y = signed(gen.labels());
        df.iter().zip(&y).map(|(f, y)| softplus(-y * f)).sum::<f64>() / y.len() as f64
    }

    fn finite_difference(spec: &ModelSpec, train: &Dataset, e: usize, gen: &Dataset) -> DVector<f64> {
        let h = 1e-3;
        DVector::from_iterator(
            train.n_features(),
            (0..train.n_features()).map(|j| {
                let loss = |sign: f64| {
                    let mut x = train.features().clone();
                    x[(e, j)] += sign * h;
                    mean_logistic(&fit(spec, &train.with_features(x).unwrap()).unwrap(), gen)
                };
                (loss(1.0) - loss(-1.0)) / (2.0 * h)
            }),
        )
    }

    #[test]
    fn matches_retrained_finite_differences() {
        let (train, gen) = instance(1);
        let spec = ModelSpec::logistic(0.7);
        let model = fit(&spec, &train).unwrap();
        for e in [0, 7, 15] {
            let g = lr_influence_gradient(&model, &train, e, &gen).unwrap();
            let fd = finite_difference(&spec, &train, e, &gen);
            let rel = (&g.gradient - &fd).norm() / fd.norm();
            assert!(rel <= 1e-2, "point {e}: relative error {rel}");
        }
    }

    #[test]
    fn mixed_derivative_matches_gradient_differences() {
        let (train, _) = instance(2);
        let model = fit(&ModelSpec::logistic(1.3), &train).unwrap();
        let st = LrInfluenceState::new(&model, &train).unwrap();
        let e = 4;
        let grad = |x: &DMatrix<f64>| {
            crate::models::logistic::binary_gradient(x, &st.y, st.c, &st.w, st.b)
        };
        let m = st.mixed_derivative(e);
        for j in 0..5 {
            let h = 1e-6;
            let mut xp = st.x.clone();
            let mut xm = st.x.clone();
            xp[(e, j)] += h;
            xm[(e, j)] -= h;
            let fd = (grad(&xp) - grad(&xm)) / (2.0 * h);
            assert!((fd - m.column(j)).amax() < 1e-6);
        }
    }

    #[test]
    fn confident_generalization_set_gives_vanishing_gradient() {
        let (train, _) = instance(3);
        let model = fit(&ModelSpec::logistic(1.0), &train).unwrap();
        let p = model.linear().unwrap();
        let w = p.weights.row(0).transpose();
        // points placed at margin 40 on their own side
        let mut x = DMatrix::zeros(4, 5);
        let labels = vec![0, 1, 0, 1];
        for (i, &l) in labels.iter().enumerate() {
            let s = if l == 1 { 1.0 } else { -1.0 };
            let t = (s * 40.0 - p.bias[0]) / w.norm_squared();
            x.set_row(i, &(w.transpose() * t));
        }
        let gen = Dataset::from_parts(x, labels, 2, "far", Role::Generalization).unwrap();
        let g = lr_influence_gradient(&model, &train, 2, &gen).unwrap();
        assert!(g.gradient.norm() <= 1e-8);
    }

    #[test]
    fn continuous_in_the_regularization_weight() {
        let (train, gen) = instance(4);
        let g1 = lr_influence_gradient(&fit(&ModelSpec::logistic(1.0), &train).unwrap(), &train, 3, &gen).unwrap();
        let g2 = lr_influence_gradient(&fit(&ModelSpec::logistic(1.01), &train).unwrap(), &train, 3, &gen).unwrap();
        let cos = g1.gradient.dot(&g2.gradient) / (g1.gradient.norm() * g2.gradient.norm());
        assert!(cos > 0.99);
        assert!((&g1.gradient - &g2.gradient).norm() < 0.05 * g1.gradient.norm());
    }
}
