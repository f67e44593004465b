//! Fully connected network with softmax cross-entropy.
//!
//! Parameters live in one flat vector, layer by layer: the `out x in`
//! weight matrix (row-major) followed by the `out` biases. Every routine is
//! generic over [`Real`] so the same backward pass, run on dual numbers,
//! yields Hessian-vector products.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dual::{Dual, Real};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// Layer widths, input first, logits last.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

/// What the backward pass differentiates.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Head<'a> {
    /// `scale * sum_i CE(logits_i, labels_i)`.
    CrossEntropy { labels: &'a [usize], scale: f64 },
    /// `scale * sum_i signs_i * (logit_1 - logit_0)`; two outputs only.
    Margin { signs: &'a [f64], scale: f64 },
}

pub(crate) struct Backward<T> {
    pub loss: T,
    pub params: Vec<T>,
    /// `n x d`, row-major, when requested.
    pub inputs: Option<Vec<T>>,
}

pub(crate) fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
pub(crate) fn init_params(widths: &[usize], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(param_count(widths));
    for w in widths.windows(2) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        for _ in 0..(w[1] * w[0] + w[1]) {
            params.push(rng.random_range(-bound..bound));
        }
    }
    params
}

fn activate<T: Real>(act: Activation, z: T) -> T {
    match act {
        Activation::Relu => {
            if z.value() > 0.0 {
                z
            } else {
                T::zero()
            }
        }
        Activation::Sigmoid => T::from_f64(1.0) / (T::from_f64(1.0) + (-z).exp()),
    }
}

/// Derivative of the activation given pre-activation `z` and output `a`.
fn activate_grad<T: Real>(act: Activation, z: T, a: T) -> T {
    match act {
        Activation::Relu => T::from_f64(if z.value() > 0.0 { 1.0 } else { 0.0 }),
        Activation::Sigmoid => a * (T::from_f64(1.0) - a),
    }
}

struct Forward<T> {
    /// Pre-activations per layer (`n x width`).
    pre: Vec<Vec<T>>,
    /// Activations per layer, input first.
    post: Vec<Vec<T>>,
}

fn forward<T: Real>(widths: &[usize], act: Activation, params: &[T], x: &[T], n: usize) -> Forward<T> {
    let layers = widths.len() - 1;
    let mut pre = Vec::with_capacity(layers);
    let mut post = Vec::with_capacity(layers + 1);
    post.push(x.to_vec());
    let mut off = 0;
    for l in 0..layers {
        let (din, dout) = (widths[l], widths[l + 1]);
        let w = &params[off..off + dout * din];
        let b = &params[off + dout * din..off + dout * din + dout];
        off += dout * din + dout;
        let a_prev = &post[l];
        let mut z = vec![T::zero(); n * dout];
        for i in 0..n {
            let arow = &a_prev[i * din..(i + 1) * din];
            for o in 0..dout {
                let wrow = &w[o * din..(o + 1) * din];
                let mut s = b[o];
                for k in 0..din {
                    s += arow[k] * wrow[k];
                }
                z[i * dout + o] = s;
            }
        }
        let a = if l + 1 < layers {
            z.iter().map(|&v| activate(act, v)).collect()
        } else {
            z.clone()
        };
        pre.push(z);
        post.push(a);
    }
    Forward { pre, post }
}

/// Loss and gradients for `head` over the `n` rows of `x`.
pub(crate) fn backward<T: Real>(
    widths: &[usize],
    act: Activation,
    params: &[T],
    x: &[T],
    n: usize,
    head: Head<'_>,
    want_inputs: bool,
) -> Backward<T> {
    let layers = widths.len() - 1;
    let k = widths[layers];
    let fw = forward(widths, act, params, x, n);
    let logits = &fw.post[layers];

    let mut loss = T::zero();
    let mut dz = vec![T::zero(); n * k];
    match head {
        Head::CrossEntropy { labels, scale } => {
            for i in 0..n {
                let row = &logits[i * k..(i + 1) * k];
                let m = row.iter().map(|v| v.value()).fold(f64::NEG_INFINITY, f64::max);
                let shift = T::from_f64(m);
                let e: Vec<T> = row.iter().map(|&v| (v - shift).exp()).collect();
                let mut z = T::zero();
                for &v in &e {
                    z += v;
                }
                loss += (z.ln() + shift - row[labels[i]]).scale(scale);
                for j in 0..k {
                    let p = e[j] / z;
                    let target = if j == labels[i] { 1.0 } else { 0.0 };
                    dz[i * k + j] = (p - T::from_f64(target)).scale(scale);
                }
            }
        }
        Head::Margin { signs, scale } => {
            for i in 0..n {
                let s = signs[i] * scale;
                loss += (logits[i * k + 1] - logits[i * k]).scale(s);
                dz[i * k] = T::from_f64(-s);
                dz[i * k + 1] = T::from_f64(s);
            }
        }
    }

    let mut grads = vec![T::zero(); params.len()];
    let mut offsets = Vec::with_capacity(layers);
    let mut off = 0;
    for l in 0..layers {
        offsets.push(off);
        off += widths[l + 1] * widths[l] + widths[l + 1];
    }
    let mut inputs = None;
    for l in (0..layers).rev() {
        let (din, dout) = (widths[l], widths[l + 1]);
        let off = offsets[l];
        let a_prev = &fw.post[l];
        {
            let (gw, gb) = grads[off..off + dout * din + dout].split_at_mut(dout * din);
            for i in 0..n {
                let arow = &a_prev[i * din..(i + 1) * din];
                for o in 0..dout {
                    let g = dz[i * dout + o];
                    gb[o] += g;
                    let grow = &mut gw[o * din..(o + 1) * din];
                    for kk in 0..din {
                        grow[kk] += g * arow[kk];
                    }
                }
            }
        }
        if l == 0 && !want_inputs {
            break;
        }
        let w = &params[off..off + dout * din];
        let mut da = vec![T::zero(); n * din];
        for i in 0..n {
            let drow = &mut da[i * din..(i + 1) * din];
            for o in 0..dout {
                let g = dz[i * dout + o];
                let wrow = &w[o * din..(o + 1) * din];
                for kk in 0..din {
                    drow[kk] += g * wrow[kk];
                }
            }
        }
        if l == 0 {
            inputs = Some(da);
            break;
        }
        let z_prev = &fw.pre[l - 1];
        let a = &fw.post[l];
        dz = (0..n * din)
            .map(|idx| da[idx] * activate_grad(act, z_prev[idx], a[idx]))
            .collect();
    }
    Backward {
        loss,
        params: grads,
        inputs,
    }
}

/// Hessian-vector products of `head`'s loss: `(H_ww v, H_xw v)` where the
/// second block is `n x d` row-major. Forward-mode over the backward pass.
pub(crate) fn hvp(
    widths: &[usize],
    act: Activation,
    params: &[f64],
    direction: &[f64],
    x: &[f64],
    n: usize,
    head: Head<'_>,
) -> (Vec<f64>, Vec<f64>) {
    let p: Vec<Dual> = params
        .iter()
        .zip(direction)
        .map(|(&v, &t)| Dual::new(v, t))
        .collect();
    let xd: Vec<Dual> = x.iter().map(|&v| Dual::from_f64(v)).collect();
    let out = backward(widths, act, &p, &xd, n, head, true);
    let hw = out.params.iter().map(|g| g.t).collect();
    let hx = out.inputs.unwrap().iter().map(|g| g.t).collect();
    (hw, hx)
}

pub(crate) fn logits(widths: &[usize], act: Activation, params: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    forward(widths, act, params, x, n).post.pop().unwrap()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AdamConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Mini-batch Adam on mean cross-entropy, batches reshuffled every epoch.
pub(crate) fn train_adam(
    widths: &[usize],
    act: Activation,
    mut params: Vec<f64>,
    x: &[f64],
    labels: &[usize],
    cfg: AdamConfig,
) -> Result<Vec<f64>> {
    use rand::seq::SliceRandom;
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let d = widths[0];
    let n = labels.len();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba7c_u64);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0i32;
    let mut xb = Vec::with_capacity(cfg.batch_size * d);
    let mut yb = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            xb.clear();
            yb.clear();
            for &i in batch {
                xb.extend_from_slice(&x[i * d..(i + 1) * d]);
                yb.push(labels[i]);
            }
            let head = Head::CrossEntropy {
                labels: &yb,
                scale: 1.0 / batch.len() as f64,
            };
            let g = backward(widths, act, &params, &xb, batch.len(), head, false).params;
            step += 1;
            let c1 = 1.0 - b1.powi(step);
            let c2 = 1.0 - b2.powi(step);
            for j in 0..params.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                params[j] -= cfg.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            }
        }
    }
    check_finite(&params)?;
    Ok(params)
}

/// Full-batch gradient descent on mean cross-entropy. When `trajectory` is
/// given, the parameters before every step are appended to it.
pub(crate) fn train_gd(
    widths: &[usize],
    act: Activation,
    mut params: Vec<f64>,
    x: &[f64],
    labels: &[usize],
    learning_rate: f64,
    steps: usize,
    mut trajectory: Option<&mut Vec<Vec<f64>>>,
) -> Result<Vec<f64>> {
    let n = labels.len();
    let head = Head::CrossEntropy {
        labels,
        scale: 1.0 / n as f64,
    };
    for _ in 0..steps {
        if let Some(traj) = trajectory.as_deref_mut() {
            traj.push(params.clone());
        }
        let g = backward(widths, act, &params, x, n, head, false).params;
        for (p, gj) in params.iter_mut().zip(&g) {
            *p -= learning_rate * gj;
        }
    }
    check_finite(&params)?;
    Ok(params)
}

fn check_finite(params: &[f64]) -> Result<()> {
    if params.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("network parameters after training".into()))
    }
}
