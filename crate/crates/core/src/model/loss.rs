//! The training objective: per-document Sinkhorn transport cost minus a
//! weighted reconstruction likelihood through the virtual decoder
//! softmax((2 - M) z), averaged over the batch and minimized.

use ndarray::{Array1, Array2};

use crate::embeddings::CostMatrix;
use crate::error::{Error, Result};
use crate::model::encoder::softmax_columns;
use crate::ot::{sinkhorn_backward, sinkhorn_batch, SinkhornConfig, SinkhornState};

/// Project topic distributions back onto the word simplex without a learned
/// decoder: column b is softmax((2 - M) z_b). Strictly positive.
pub fn virtual_decoder(m: &CostMatrix, z: &Array2<f64>) -> Result<Array2<f64>> {
    let logits = decoder_logits(m.matrix(), z)?;
    Ok(softmax_columns(&logits))
}

fn decoder_logits(m: &Array2<f64>, z: &Array2<f64>) -> Result<Array2<f64>> {
    let (v, k) = m.dim();
    if z.nrows() != k {
        return Err(Error::data(format!(
            "topic distributions have {} rows, cost matrix has {k} columns",
            z.nrows()
        )));
    }
    let mut two_minus_m = Array2::from_elem((v, k), 2.0);
    two_minus_m -= m;
    Ok(two_minus_m.dot(z))
}

/// Loss value split into its reported components.
///
/// `total = sinkhorn - epsilon * likelihood`, every term a batch mean;
/// `likelihood` is the (usually negative) mean of x^T log phi(z).
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub total: f64,
    pub likelihood: f64,
    pub sinkhorn: f64,
    /// Per-document transport cost, length B.
    pub per_doc_cost: Array1<f64>,
    /// Per-document log likelihood, length B.
    pub per_doc_likelihood: Array1<f64>,
}

/// Evaluate the joint objective on one batch.
pub fn joint_loss<'a>(
    xnorm: &'a Array2<f64>,
    z: &'a Array2<f64>,
    m: &'a Array2<f64>,
    epsilon: f64,
    cfg: &SinkhornConfig,
) -> Result<(LossBreakdown, SinkhornState<'a>)> {
    if epsilon < 0.0 {
        return Err(Error::data(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let (per_doc_cost, state) = sinkhorn_batch(xnorm, z, m, cfg)?;
    let per_doc_likelihood = decoder_log_likelihood(xnorm, z, m)?;
    let b = xnorm.ncols() as f64;
    let sinkhorn = per_doc_cost.sum() / b;
    let likelihood = per_doc_likelihood.sum() / b;
    Ok((
        LossBreakdown {
            total: sinkhorn - epsilon * likelihood,
            likelihood,
            sinkhorn,
            per_doc_cost,
            per_doc_likelihood,
        },
        state,
    ))
}

/// x_b^T log phi(z_b) for every document, computed through a shifted
/// log-sum-exp so no probability is ever materialized at zero.
pub fn decoder_log_likelihood(
    xnorm: &Array2<f64>,
    z: &Array2<f64>,
    m: &Array2<f64>,
) -> Result<Array1<f64>> {
    let logits = decoder_logits(m, z)?;
    let b = xnorm.ncols();
    let mut out = Array1::zeros(b);
    for col in 0..b {
        let s = logits.column(col);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse: f64 = s.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
        // x^T log softmax(s) = x^T s - lse, since x sums to one.
        out[col] = xnorm.column(col).dot(&s) - lse;
    }
    Ok(out)
}

/// Gradients of the batch-mean joint loss with respect to Z and M.
///
/// The transport term is differentiated through the unrolled Sinkhorn
/// iterations in `state`; the likelihood term contributes through both the
/// decoder softmax (Z path) and the cost matrix itself (M path).
pub fn loss_backward(
    state: &SinkhornState,
    epsilon: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let xnorm = state.xnorm;
    let z = state.z;
    let m = state.cost;
    let b = xnorm.ncols();
    let bf = b as f64;

    let upstream = Array1::from_elem(b, 1.0 / bf);
    let (mut dz, mut dm) = sinkhorn_backward(state, &upstream)?;

    if epsilon > 0.0 {
        // d total / d s = -(epsilon/B) (x - phi) for the decoder logits s.
        let logits = decoder_logits(m, z)?;
        let phi = softmax_columns(&logits);
        let mut ds = Array2::zeros(logits.raw_dim());
        for col in 0..b {
            let scale = -epsilon / bf;
            for (out, (&xv, &pv)) in ds
                .column_mut(col)
                .iter_mut()
                .zip(xnorm.column(col).iter().zip(phi.column(col).iter()))
            {
                *out = scale * (xv - pv);
            }
        }
        // s = (2 - M) z: gradient splits into the Z path and the M path.
        let mut two_minus_m = Array2::from_elem(m.raw_dim(), 2.0);
        two_minus_m -= m;
        dz += &two_minus_m.t().dot(&ds);
        dm += &(-ds.dot(&z.t()));
    }

    Ok((dz, dm))
}
