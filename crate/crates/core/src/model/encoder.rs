//! The inference network: linear -> ReLU -> dropout -> batch norm ->
//! linear -> column softmax, with hand-written forward and backward passes.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

const BN_EPS: f64 = 1e-5;

/// Dropout setting. The rate is read as the probability of zeroing a unit
/// unless `rate_is_keep_prob` flips the interpretation.
#[derive(Debug, Clone, Copy)]
pub struct DropoutConfig {
    pub rate: f64,
    pub rate_is_keep_prob: bool,
}

impl Default for DropoutConfig {
    fn default() -> Self {
        DropoutConfig {
            rate: 0.75,
            rate_is_keep_prob: false,
        }
    }
}

impl DropoutConfig {
    pub fn drop_prob(&self) -> f64 {
        if self.rate_is_keep_prob {
            1.0 - self.rate
        } else {
            self.rate
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) || self.drop_prob() >= 1.0 {
            return Err(Error::data(format!(
                "dropout rate {} leaves no active units",
                self.rate
            )));
        }
        Ok(())
    }
}

/// All learnable encoder parameters plus the batch-norm running statistics.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    /// Hidden weights, H x V.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub bn_gamma: Array1<f64>,
    pub bn_beta: Array1<f64>,
    pub bn_running_mean: Array1<f64>,
    pub bn_running_var: Array1<f64>,
    /// Output weights, K x H.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub dropout: DropoutConfig,
    pub bn_momentum: f64,
}

impl EncoderParams {
    /// Fan-scaled symmetric initialization; biases zero, batch norm at
    /// identity with unit running variance.
    pub fn init(
        vocab_size: usize,
        hidden: usize,
        n_topics: usize,
        dropout: DropoutConfig,
        bn_momentum: f64,
        seed_root: u64,
    ) -> Self {
        let mut rng = seed::rng(seed_root, "model/encoder-init");
        let mut uniform_matrix = |rows: usize, cols: usize| {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..a))
        };
        let w1 = uniform_matrix(hidden, vocab_size);
        let w2 = uniform_matrix(n_topics, hidden);
        EncoderParams {
            w1,
            b1: Array1::zeros(hidden),
            bn_gamma: Array1::ones(hidden),
            bn_beta: Array1::zeros(hidden),
            bn_running_mean: Array1::zeros(hidden),
            bn_running_var: Array1::ones(hidden),
            w2,
            b2: Array1::zeros(n_topics),
            dropout,
            bn_momentum,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_topics(&self) -> usize {
        self.w2.nrows()
    }

    pub fn all_finite(&self) -> bool {
        self.w1.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.bn_gamma.iter().all(|v| v.is_finite())
            && self.bn_beta.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
    }

    /// Training-mode forward pass: seeded dropout, batch statistics, and a
    /// running-statistics update. Requires at least two documents so the
    /// batch variance is meaningful.
    pub fn forward_train(
        &mut self,
        xnorm: &Array2<f64>,
        dropout_seed: u64,
    ) -> Result<(Array2<f64>, EncoderCache)> {
        let b = xnorm.ncols();
        if b < 2 {
            return Err(Error::data(
                "training-mode forward needs a batch of at least 2 documents",
            ));
        }
        let (z, cache, stats) = self.forward_impl(xnorm, Some(dropout_seed))?;
        if let Some((mean, var)) = stats {
            let momentum = self.bn_momentum;
            for i in 0..self.hidden() {
                self.bn_running_mean[i] =
                    momentum * self.bn_running_mean[i] + (1.0 - momentum) * mean[i];
                self.bn_running_var[i] =
                    momentum * self.bn_running_var[i] + (1.0 - momentum) * var[i];
            }
        }
        Ok((z, cache))
    }

    /// Inference-mode forward pass: no dropout, running statistics.
    pub fn forward_infer(&self, xnorm: &Array2<f64>) -> Result<Array2<f64>> {
        let (z, _) = self.forward_infer_cached(xnorm)?;
        Ok(z)
    }

    /// Inference-mode forward that also returns the activation cache, used
    /// by gradient checks that need backprop without dropout noise.
    pub fn forward_infer_cached(&self, xnorm: &Array2<f64>) -> Result<(Array2<f64>, EncoderCache)> {
        let (z, cache, _) = self.forward_impl(xnorm, None)?;
        Ok((z, cache))
    }

    #[allow(clippy::type_complexity)]
    fn forward_impl(
        &self,
        xnorm: &Array2<f64>,
        dropout_seed: Option<u64>,
    ) -> Result<(Array2<f64>, EncoderCache, Option<(Array1<f64>, Array1<f64>)>)> {
        let v = self.vocab_size();
        if xnorm.nrows() != v {
            return Err(Error::data(format!(
                "input has {} rows, encoder expects {v}",
                xnorm.nrows()
            )));
        }
        let train = dropout_seed.is_some();
        let h = self.hidden();
        let b = xnorm.ncols();

        let mut h1 = self.w1.dot(xnorm);
        for (mut row, &bias) in h1.axis_iter_mut(Axis(0)).zip(self.b1.iter()) {
            row.mapv_inplace(|x| x + bias);
        }
        let relu = h1.mapv(|x| x.max(0.0));

        let (dropped, mask) = if train {
            let p = self.dropout.drop_prob();
            if p > 0.0 {
                let mut rng = seed::rng(dropout_seed.unwrap(), "model/dropout-mask");
                let scale = 1.0 / (1.0 - p);
                let mask =
                    Array2::from_shape_simple_fn((h, b), || {
                        if rng.random::<f64>() < p {
                            0.0
                        } else {
                            scale
                        }
                    });
                (&relu * &mask, Some(mask))
            } else {
                (relu.clone(), None)
            }
        } else {
            (relu.clone(), None)
        };

        // Batch norm over the batch axis, one statistic per hidden unit.
        let (mean, inv_std, batch_stats) = if train {
            let mean = dropped.mean_axis(Axis(1)).expect("b >= 2");
            let mut var = Array1::zeros(h);
            for (i, row) in dropped.axis_iter(Axis(0)).enumerate() {
                let mu = mean[i];
                var[i] = row.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / b as f64;
            }
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let stats = (mean.clone(), var);
            (mean, inv_std, Some(stats))
        } else {
            let inv_std = self.bn_running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            (self.bn_running_mean.clone(), inv_std, None)
        };

        let mut xhat = dropped.clone();
        for (i, mut row) in xhat.axis_iter_mut(Axis(0)).enumerate() {
            let mu = mean[i];
            let is = inv_std[i];
            row.mapv_inplace(|x| (x - mu) * is);
        }
        let mut y = xhat.clone();
        for (i, mut row) in y.axis_iter_mut(Axis(0)).enumerate() {
            let g = self.bn_gamma[i];
            let be = self.bn_beta[i];
            row.mapv_inplace(|x| g * x + be);
        }

        let mut logits = self.w2.dot(&y);
        for (mut row, &bias) in logits.axis_iter_mut(Axis(0)).zip(self.b2.iter()) {
            row.mapv_inplace(|x| x + bias);
        }
        let z = softmax_columns(&logits);

        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite encoder activation"));
        }

        let cache = EncoderCache {
            xnorm: xnorm.clone(),
            h1,
            mask,
            bn_xhat: xhat,
            bn_inv_std: inv_std,
            bn_train_mode: train,
            y,
            z: z.clone(),
        };
        Ok((z, cache, batch_stats))
    }
}

/// Activations saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    xnorm: Array2<f64>,
    h1: Array2<f64>,
    mask: Option<Array2<f64>>,
    bn_xhat: Array2<f64>,
    bn_inv_std: Array1<f64>,
    bn_train_mode: bool,
    y: Array2<f64>,
    pub z: Array2<f64>,
}

/// Parameter gradients mirroring [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub bn_gamma: Array1<f64>,
    pub bn_beta: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Backpropagate a gradient on Z through the whole encoder.
pub fn encoder_backward(
    params: &EncoderParams,
    cache: &EncoderCache,
    dz: &Array2<f64>,
) -> Result<EncoderGrads> {
    if dz.dim() != cache.z.dim() {
        return Err(Error::data(format!(
            "upstream gradient is {:?}, expected {:?}",
            dz.dim(),
            cache.z.dim()
        )));
    }
    let b = cache.z.ncols();

    // Softmax: dlogits = z * (dz - <z, dz>_col)
    let mut dlogits = cache.z.clone();
    for col in 0..b {
        let zc = cache.z.column(col);
        let dc = dz.column(col);
        let inner: f64 = zc.dot(&dc);
        for (out, (&zv, &dv)) in dlogits
            .column_mut(col)
            .iter_mut()
            .zip(zc.iter().zip(dc.iter()))
        {
            *out = zv * (dv - inner);
        }
    }

    let dw2 = dlogits.dot(&cache.y.t());
    let db2 = dlogits.sum_axis(Axis(1));
    let dy = params.w2.t().dot(&dlogits);

    // Batch norm.
    let dgamma = (&dy * &cache.bn_xhat).sum_axis(Axis(1));
    let dbeta = dy.sum_axis(Axis(1));
    let mut dbn_in = Array2::zeros(dy.raw_dim());
    if cache.bn_train_mode {
        let bf = b as f64;
        for (i, row_dy) in dy.axis_iter(Axis(0)).enumerate() {
            let g = params.bn_gamma[i];
            let is = cache.bn_inv_std[i];
            let xhat_row = cache.bn_xhat.row(i);
            let mean_dy: f64 = row_dy.sum() / bf;
            let mean_dy_xhat: f64 = row_dy
                .iter()
                .zip(xhat_row.iter())
                .map(|(&a, &x)| a * x)
                .sum::<f64>()
                / bf;
            for (out, (&dyv, &xh)) in dbn_in
                .row_mut(i)
                .iter_mut()
                .zip(row_dy.iter().zip(xhat_row.iter()))
            {
                *out = g * is * (dyv - mean_dy - xh * mean_dy_xhat);
            }
        }
    } else {
        for (i, row_dy) in dy.axis_iter(Axis(0)).enumerate() {
            let scale = params.bn_gamma[i] * cache.bn_inv_std[i];
            for (out, &dyv) in dbn_in.row_mut(i).iter_mut().zip(row_dy.iter()) {
                *out = scale * dyv;
            }
        }
    }

    let dropped_back = match &cache.mask {
        Some(mask) => &dbn_in * mask,
        None => dbn_in,
    };

    // ReLU gate on the pre-activation sign.
    let mut dh1 = dropped_back;
    for (out, &pre) in dh1.iter_mut().zip(cache.h1.iter()) {
        if pre <= 0.0 {
            *out = 0.0;
        }
    }

    let dw1 = dh1.dot(&cache.xnorm.t());
    let db1 = dh1.sum_axis(Axis(1));

    Ok(EncoderGrads {
        w1: dw1,
        b1: db1,
        bn_gamma: dgamma,
        bn_beta: dbeta,
        w2: dw2,
        b2: db2,
    })
}

/// Numerically safe column-wise softmax.
pub fn softmax_columns(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in col.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in col.iter_mut() {
            *v /= sum;
        }
    }
    out
}
