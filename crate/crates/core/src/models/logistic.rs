//! L2-regularized logistic regression.
//!
//! The objective is `0.5 ||W||^2 + C * sum_i loss_i` with an unpenalized
//! bias. Binary problems use a dense Newton method on `(w, b)`; multinomial
//! problems use truncated Newton with conjugate-gradient inner solves on
//! Hessian-vector products.

use nalgebra::{DMatrix, DVector};

use crate::linalg::spd_solve;
use crate::{Error, Result};

pub(crate) const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 200;

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
pub(crate) fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BinaryFit {
    pub w: DVector<f64>,
    pub b: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn binary_objective(x: &DMatrix<f64>, s: &[f64], c: f64, w: &DVector<f64>, b: f64) -> f64 {
    let f = x * w;
    let loss: f64 = (0..s.len()).map(|i| softplus(-s[i] * (f[i] + b))).sum();
    0.5 * w.norm_squared() + c * loss
}

/// Gradient of the binary objective with respect to `(w, b)`.
pub(crate) fn binary_gradient(
    x: &DMatrix<f64>,
    s: &[f64],
    c: f64,
    w: &DVector<f64>,
    b: f64,
) -> DVector<f64> {
    let n = s.len();
    let f = x * w;
    let r = DVector::from_iterator(n, (0..n).map(|i| -c * s[i] * (1.0 - sigmoid(s[i] * (f[i] + b)))));
    let gw = w + x.tr_mul(&r);
    let mut g = DVector::zeros(w.len() + 1);
    g.rows_mut(0, w.len()).copy_from(&gw);
    g[w.len()] = r.sum();
    g
}

/// Hessian of the binary objective in `(w, b)`, bias last.
pub(crate) fn binary_hessian(
    x: &DMatrix<f64>,
    s: &[f64],
    c: f64,
    w: &DVector<f64>,
    b: f64,
) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let f = x * w;
    let z: Vec<f64> = (0..n)
        .map(|i| {
            let p = sigmoid(s[i] * (f[i] + b));
            p * (1.0 - p)
        })
        .collect();
    let mut xz = x.clone();
    for i in 0..n {
        let sc = (c * z[i]).sqrt();
        xz.row_mut(i).scale_mut(sc);
    }
    let mut h = DMatrix::zeros(d + 1, d + 1);
    h.view_mut((0, 0), (d, d)).copy_from(&xz.tr_mul(&xz));
    for j in 0..d {
        h[(j, j)] += 1.0;
        let v: f64 = (0..n).map(|i| c * z[i] * x[(i, j)]).sum();
        h[(j, d)] = v;
        h[(d, j)] = v;
    }
    h[(d, d)] = c * z.iter().sum::<f64>();
    h
}

pub(crate) fn fit_binary(
    x: &DMatrix<f64>,
    s: &[f64],
    c: f64,
    warm: Option<(&DVector<f64>, f64)>,
) -> Result<BinaryFit> {
    let d = x.ncols();
    let (mut w, mut b) = match warm {
        Some((w0, b0)) if w0.len() == d => (w0.clone(), b0),
        _ => (DVector::zeros(d), 0.0),
    };
    let mut obj = binary_objective(x, s, c, &w, b);
    let mut g = binary_gradient(x, s, c, &w, b);
    let mut gnorm = g.norm();
    for it in 0..MAX_NEWTON {
        if gnorm <= GRAD_TOL {
            return Ok(BinaryFit {
                w,
                b,
                grad_norm: gnorm,
                iterations: it,
            });
        }
        let h = binary_hessian(x, s, c, &w, b);
        let rhs = DMatrix::from_column_slice(d + 1, 1, (-&g).as_slice());
        let p = match spd_solve(&h, &rhs, 0.0, "logistic Hessian") {
            Ok(p) => p,
            Err(_) => spd_solve(&h, &rhs, 1e-10, "logistic Hessian")?,
        };
        let p = p.column(0).into_owned();
        let slope = g.dot(&p);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new = &w + p.rows(0, d) * t;
            let b_new = b + t * p[d];
            let obj_new = binary_objective(x, s, c, &w_new, b_new);
            let armijo = obj_new <= obj + 1e-4 * t * slope;
            let g_new = if armijo || t == 1.0 {
                Some(binary_gradient(x, s, c, &w_new, b_new))
            } else {
                None
            };
            // Near the optimum the objective stops resolving the decrease;
            // a full step that shrinks the gradient is still progress.
            let shrinks = t == 1.0 && g_new.as_ref().is_some_and(|gn| gn.norm() < gnorm);
            if armijo || shrinks {
                w = w_new;
                b = b_new;
                obj = obj_new;
                g = g_new.unwrap();
                gnorm = g.norm();
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !gnorm.is_finite() {
            return Err(Error::NonFinite("logistic regression gradient".into()));
        }
        if !accepted {
            break;
        }
    }
    if gnorm <= GRAD_TOL {
        return Ok(BinaryFit {
            w,
            b,
            grad_norm: gnorm,
            iterations: MAX_NEWTON,
        });
    }
    Err(Error::NonConvergence {
        solver: "logistic-newton",
        iterations: MAX_NEWTON,
        residual: gnorm,
    })
}

#[derive(Debug, Clone)]
pub(crate) struct MultinomialFit {
    /// `K x d`.
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

struct Multinomial<'a> {
    x: &'a DMatrix<f64>,
    labels: &'a [usize],
    k: usize,
    c: f64,
}

impl Multinomial<'_> {
    fn probabilities(&self, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
        let mut scores = self.x * w.transpose();
        for mut row in scores.row_iter_mut() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v + b[j] - m).exp();
                z += *v;
            }
            row /= z;
        }
        scores
    }

    fn objective(&self, w: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
        let scores = self.x * w.transpose();
        let mut loss = 0.0;
        for (i, row) in scores.row_iter().enumerate() {
            let vals: Vec<f64> = (0..self.k).map(|j| row[j] + b[j]).collect();
            let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - vals[self.labels[i]];
        }
        0.5 * w.norm_squared() + self.c * loss
    }

    /// Gradient blocks and the probabilities they were computed from.
    fn gradient(&self, w: &DMatrix<f64>, b: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let p = self.probabilities(w, b);
        let mut r = p.clone();
        for (i, &y) in self.labels.iter().enumerate() {
            r[(i, y)] -= 1.0;
        }
        r *= self.c;
        let gw = w + r.tr_mul(self.x);
        let gb = DVector::from_iterator(self.k, r.column_iter().map(|col| col.sum()));
        (gw, gb, p)
    }

    fn hvp(&self, p: &DMatrix<f64>, v: &DMatrix<f64>, vb: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let mut s = self.x * v.transpose();
        for mut row in s.row_iter_mut() {
            for j in 0..self.k {
                row[j] += vb[j];
            }
        }
        let n = self.x.nrows();
        let mut dmat = DMatrix::zeros(n, self.k);
        for i in 0..n {
            let ps: f64 = (0..self.k).map(|j| p[(i, j)] * s[(i, j)]).sum();
            for j in 0..self.k {
                dmat[(i, j)] = self.c * p[(i, j)] * (s[(i, j)] - ps);
            }
        }
        let hw = v + dmat.tr_mul(self.x);
        // The softmax bias has a null direction (a common shift); a vanishing
        // ridge keeps CG from wandering along it.
        let hb = DVector::from_iterator(self.k, dmat.column_iter().map(|col| col.sum())) + vb * 1e-12;
        (hw, hb)
    }
}

fn norm2(w: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    (w.norm_squared() + b.norm_squared()).sqrt()
}

fn center(b: &mut DVector<f64>) {
    let m = b.mean();
    b.add_scalar_mut(-m);
}

pub(crate) fn fit_multinomial(
    x: &DMatrix<f64>,
    labels: &[usize],
    k: usize,
    c: f64,
    warm: Option<(&DMatrix<f64>, &DVector<f64>)>,
) -> Result<MultinomialFit> {
    let d = x.ncols();
    let prob = Multinomial { x, labels, k, c };
    let (mut w, mut b) = match warm {
        Some((w0, b0)) if w0.shape() == (k, d) => (w0.clone(), b0.clone()),
        _ => (DMatrix::zeros(k, d), DVector::zeros(k)),
    };
    let mut obj = prob.objective(&w, &b);
    let (mut gw, mut gb, mut p) = prob.gradient(&w, &b);
    let mut gnorm = norm2(&gw, &gb);
    for it in 0..MAX_NEWTON {
        if gnorm <= GRAD_TOL {
            return Ok(MultinomialFit {
                w,
                b,
                grad_norm: gnorm,
                iterations: it,
            });
        }
        // CG on H s = -g.
        let forcing = gnorm.sqrt().min(0.1);
        let mut sw = DMatrix::zeros(k, d);
        let mut sb = DVector::zeros(k);
        let mut rw = -&gw;
        let mut rb = -&gb;
        let mut pw = rw.clone();
        let mut pb = rb.clone();
        let mut rr = rw.norm_squared() + rb.norm_squared();
        for _ in 0..500 {
            if rr.sqrt() <= forcing * gnorm {
                break;
            }
            let (hw, hb) = prob.hvp(&p, &pw, &pb);
            let curv = pw.dot(&hw) + pb.dot(&hb);
            if curv <= 0.0 {
                break;
            }
            let a = rr / curv;
            sw += &pw * a;
            sb += &pb * a;
            rw -= &hw * a;
            rb -= &hb * a;
            let rr_new = rw.norm_squared() + rb.norm_squared();
            let beta = rr_new / rr;
            pw = &rw + &pw * beta;
            pb = &rb + &pb * beta;
            rr = rr_new;
        }
        if sw.norm_squared() + sb.norm_squared() == 0.0 {
            sw = -&gw;
            sb = -&gb;
        }
        let slope = gw.dot(&sw) + gb.dot(&sb);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new = &w + &sw * t;
            let mut b_new = &b + &sb * t;
            center(&mut b_new);
            let obj_new = prob.objective(&w_new, &b_new);
            let armijo = obj_new <= obj + 1e-4 * t * slope;
            let shrinks = !armijo && t == 1.0 && {
                let (g1, g2, _) = prob.gradient(&w_new, &b_new);
                norm2(&g1, &g2) < gnorm
            };
            if armijo || shrinks {
                w = w_new;
                b = b_new;
                obj = obj_new;
                (gw, gb, p) = prob.gradient(&w, &b);
                gnorm = norm2(&gw, &gb);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !gnorm.is_finite() {
            return Err(Error::NonFinite("multinomial logistic gradient".into()));
        }
        if !accepted {
            break;
        }
    }
    if gnorm <= GRAD_TOL {
        return Ok(MultinomialFit {
            w,
            b,
            grad_norm: gnorm,
            iterations: MAX_NEWTON,
        });
    }
    Err(Error::NonConvergence {
        solver: "multinomial-newton-cg",
        iterations: MAX_NEWTON,
        residual: gnorm,
    })
}
