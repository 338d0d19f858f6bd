//! Bias-corrected Adam over the encoder parameters and topic embeddings.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::encoder::{EncoderGrads, EncoderParams};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Moments1 {
    m: Array1<f64>,
    v: Array1<f64>,
}

#[derive(Debug, Clone)]
struct Moments2 {
    m: Array2<f64>,
    v: Array2<f64>,
}

impl Moments1 {
    fn like(a: &Array1<f64>) -> Self {
        Moments1 {
            m: Array1::zeros(a.len()),
            v: Array1::zeros(a.len()),
        }
    }
}

impl Moments2 {
    fn like(a: &Array2<f64>) -> Self {
        Moments2 {
            m: Array2::zeros(a.raw_dim()),
            v: Array2::zeros(a.raw_dim()),
        }
    }
}

/// First and second moment accumulators for every trained tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub t: u64,
    w1: Moments2,
    b1: Moments1,
    bn_gamma: Moments1,
    bn_beta: Moments1,
    w2: Moments2,
    b2: Moments1,
    g: Moments2,
}

impl AdamState {
    pub fn new(params: &EncoderParams, topic_embeddings: &Array2<f64>) -> Self {
        AdamState {
            t: 0,
            w1: Moments2::like(&params.w1),
            b1: Moments1::like(&params.b1),
            bn_gamma: Moments1::like(&params.bn_gamma),
            bn_beta: Moments1::like(&params.bn_beta),
            w2: Moments2::like(&params.w2),
            b2: Moments1::like(&params.b2),
            g: Moments2::like(topic_embeddings),
        }
    }
}

fn update1(
    param: &mut Array1<f64>,
    grad: &Array1<f64>,
    mom: &mut Moments1,
    cfg: &AdamConfig,
    c1: f64,
    c2: f64,
) {
    for i in 0..param.len() {
        let g = grad[i];
        mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
        mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
        let mhat = mom.m[i] / c1;
        let vhat = mom.v[i] / c2;
        param[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
    }
}

fn update2(
    param: &mut Array2<f64>,
    grad: &Array2<f64>,
    mom: &mut Moments2,
    cfg: &AdamConfig,
    c1: f64,
    c2: f64,
) {
    for ((p, &g), (m, v)) in param
        .iter_mut()
        .zip(grad.iter())
        .zip(mom.m.iter_mut().zip(mom.v.iter_mut()))
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
    }
}

/// One optimizer step over the encoder and the topic embeddings jointly.
pub fn adam_step(
    params: &mut EncoderParams,
    topic_embeddings: &mut Array2<f64>,
    enc_grads: &EncoderGrads,
    g_grad: &Array2<f64>,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);

    update2(&mut params.w1, &enc_grads.w1, &mut state.w1, cfg, c1, c2);
    update1(&mut params.b1, &enc_grads.b1, &mut state.b1, cfg, c1, c2);
    update1(&mut params.bn_gamma, &enc_grads.bn_gamma, &mut state.bn_gamma, cfg, c1, c2);
    update1(&mut params.bn_beta, &enc_grads.bn_beta, &mut state.bn_beta, cfg, c1, c2);
    update2(&mut params.w2, &enc_grads.w2, &mut state.w2, cfg, c1, c2);
    update1(&mut params.b2, &enc_grads.b2, &mut state.b2, cfg, c1, c2);
    update2(topic_embeddings, g_grad, &mut state.g, cfg, c1, c2);

    if !params.all_finite() || topic_embeddings.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite parameter after optimizer step"));
    }
    Ok(())
}
