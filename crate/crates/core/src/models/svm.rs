//! Soft-margin linear SVM solved in the dual by SMO.
//!
//! The dual is `min 0.5 a'Qa - 1'a` subject to `0 <= a_i <= C` and
//! `y'a = 0`, with `Q_ij = y_i y_j <x_i, x_j>`. Working pairs are chosen
//! with second-order information (maximal violating `i`, then the `j` with
//! the largest guaranteed objective decrease), following LIBSVM.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SmoOptions {
    /// Stopping threshold on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions {
            tol: 1e-9,
            max_iter: 20_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub duality_gap: f64,
}

/// Solves the dual for Gram matrix `gram` and labels `y` in `{-1, +1}`,
/// tightening the violation threshold until the duality gap is at most
/// `1e-6 * n`.
pub(crate) fn solve(
    gram: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    warm: Option<&[f64]>,
    opts: SmoOptions,
) -> Result<SmoSolution> {
    let n = y.len();
    let mut alpha = match warm {
        Some(a) if a.len() == n => a.to_vec(),
        _ => vec![0.0; n],
    };
    let gap_limit = 1e-6 * n as f64;
    let mut tol = opts.tol;
    let mut total = 0;
    loop {
        let (bias, its) = smo(gram, y, c, &mut alpha, tol, opts.max_iter - total)?;
        total += its;
        let gap = duality_gap(gram, y, c, &alpha, bias);
        if gap <= gap_limit {
            return Ok(SmoSolution {
                alpha,
                bias,
                iterations: total,
                duality_gap: gap,
            });
        }
        if tol < 1e-15 || total >= opts.max_iter {
            return Err(Error::NonConvergence {
                solver: "svm-smo",
                iterations: total,
                residual: gap,
            });
        }
        tol *= 1e-2;
    }
}

fn smo(
    k: &DMatrix<f64>,
    y: &[f64],
    c: f64,
    alpha: &mut [f64],
    eps: f64,
    max_iter: usize,
) -> Result<(f64, usize)> {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];
    let qd: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    let mut g = vec![-1.0; n];
    for j in 0..n {
        if alpha[j] != 0.0 {
            for i in 0..n {
                g[i] += q(i, j) * alpha[j];
            }
        }
    }
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iter = 0;
    loop {
        // i: maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = if y[t] > 0.0 {
                if upper(alpha[t]) {
                    continue;
                }
                -g[t]
            } else {
                if lower(alpha[t]) {
                    continue;
                }
                g[t]
            };
            if v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }
        // j: second-order choice in I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        if i_sel != usize::MAX {
            let i = i_sel;
            for t in 0..n {
                let (grad_diff, quad) = if y[t] > 0.0 {
                    if lower(alpha[t]) {
                        continue;
                    }
                    gmax2 = gmax2.max(g[t]);
                    (gmax + g[t], qd[i] + qd[t] - 2.0 * y[i] * q(i, t))
                } else {
                    if upper(alpha[t]) {
                        continue;
                    }
                    gmax2 = gmax2.max(-g[t]);
                    (gmax - g[t], qd[i] + qd[t] + 2.0 * y[i] * q(i, t))
                };
                if grad_diff > 0.0 {
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax + gmax2 < eps {
            break;
        }
        if iter >= max_iter {
            return Err(Error::NonConvergence {
                solver: "svm-smo",
                iterations: iter,
                residual: gmax + gmax2,
            });
        }
        iter += 1;

        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok((-rho, iter))
}

/// Primal objective minus dual objective at `(alpha, bias)`.
pub(crate) fn duality_gap(k: &DMatrix<f64>, y: &[f64], c: f64, alpha: &[f64], bias: f64) -> f64 {
    let n = y.len();
    let ay = DVector::from_iterator(n, (0..n).map(|i| alpha[i] * y[i]));
    let f = k * &ay;
    let wnorm2 = ay.dot(&f);
    let hinge: f64 = (0..n).map(|i| (1.0 - y[i] * (f[i] + bias)).max(0.0)).sum();
    let primal = 0.5 * wnorm2 + c * hinge;
    let dual = alpha.iter().sum::<f64>() - 0.5 * wnorm2;
    primal - dual
}

/// `w = sum_i alpha_i y_i x_i`.
pub(crate) fn weights(x: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> DVector<f64> {
    let ay = DVector::from_iterator(y.len(), y.iter().zip(alpha).map(|(a, b)| a * b));
    x.tr_mul(&ay)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_point_problem() {
        let x = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let y = [-1.0, 1.0];
        let k = &x * x.transpose();
        let sol = solve(&k, &y, 1.0, None, SmoOptions::default()).unwrap();
        // Margin 1 at both points: w = 1, b = 0, alpha = 0.5 each.
        assert!((sol.alpha[0] - 0.5).abs() < 1e-12);
        assert!((sol.alpha[1] - 0.5).abs() < 1e-12);
        assert!(sol.bias.abs() < 1e-12);
        let w = weights(&x, &y, &sol.alpha);
        assert!((w[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_constraint_caps_alpha() {
        let x = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let y = [-1.0, 1.0];
        let k = &x * x.transpose();
        let sol = solve(&k, &y, 0.1, None, SmoOptions::default()).unwrap();
        assert_eq!(sol.alpha, vec![0.1, 0.1]);
        assert!(sol.duality_gap <= 2e-6);
    }
}
