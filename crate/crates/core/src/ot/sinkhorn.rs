//! Batched Sinkhorn iterations in the plain kernel form, plus reverse-mode
//! gradients obtained by unrolling the scaling updates.
//!
//! Shapes follow the document-batch convention: costs are V x K, word
//! distributions V x B, topic distributions K x B. Column b of the scaling
//! matrices belongs to document b, and the per-document transport cost is
//! the diagonal of Psi2^T (H o M) Psi1 -- the off-diagonal entries of that
//! product mix scaling vectors of different documents and correspond to no
//! transport plan.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::ot::{check_cost_range, check_simplex_columns, SinkhornConfig, TransportPlan};

const SIMPLEX_TOL: f64 = 1e-6;

/// Everything the forward pass leaves behind: final scalings, the kernel,
/// and the trailing iterates needed to differentiate through the loop.
#[derive(Debug, Clone)]
pub struct SinkhornState<'a> {
    pub xnorm: &'a Array2<f64>,
    pub z: &'a Array2<f64>,
    pub cost: &'a Array2<f64>,
    /// Kernel e^(-M/alpha), V x K.
    pub kernel: Array2<f64>,
    /// Final column scalings, K x B; strictly positive where z is.
    pub psi1: Array2<f64>,
    /// Final row scalings, V x B; zero exactly where xnorm is zero.
    pub psi2: Array2<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub config: SinkhornConfig,
    /// Trailing Psi1 iterates, oldest first; the last entry equals `psi1`.
    history: VecDeque<Array2<f64>>,
}

impl SinkhornState<'_> {
    /// Release the iterate history when no gradient will be taken.
    pub fn drop_history(&mut self) {
        self.history.clear();
    }

    pub fn unrolled_iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

/// Elementwise `num / den` with the zero-support convention: a zero
/// numerator yields zero regardless of the denominator. A positive
/// numerator over a vanishing denominator is a numerical failure.
fn guarded_div(num: &Array2<f64>, den: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(num.raw_dim());
    for ((o, &n), &d) in out.iter_mut().zip(num.iter()).zip(den.iter()) {
        if n == 0.0 {
            continue;
        }
        let q = n / d;
        if !q.is_finite() {
            return Err(Error::numerical(
                "Sinkhorn scaling overflowed or divided by zero; \
                 use the log-domain variant for small alpha",
            ));
        }
        *o = q;
    }
    Ok(out)
}

/// Run the scaling iterations for a whole batch.
///
/// Returns the per-document transport cost and the converged state. The
/// stopping rule is the largest relative change across strictly positive
/// Psi1 entries dropping below `cfg.tol`.
pub fn sinkhorn_batch<'a>(
    xnorm: &'a Array2<f64>,
    z: &'a Array2<f64>,
    cost: &'a Array2<f64>,
    cfg: &SinkhornConfig,
) -> Result<(Array1<f64>, SinkhornState<'a>)> {
    cfg.validate()?;
    let (v, b) = xnorm.dim();
    let (k, b2) = z.dim();
    if b != b2 {
        return Err(Error::data(format!("batch sizes differ: {b} vs {b2}")));
    }
    if cost.dim() != (v, k) {
        return Err(Error::data(format!(
            "cost matrix is {:?}, expected ({v}, {k})",
            cost.dim()
        )));
    }
    check_simplex_columns("xnorm", xnorm, SIMPLEX_TOL)?;
    check_simplex_columns("z", z, SIMPLEX_TOL)?;
    check_cost_range(cost)?;

    let kernel = cost.mapv(|m| (-m / cfg.alpha).exp());
    if kernel.iter().any(|&h| h == 0.0) {
        return Err(Error::numerical(format!(
            "kernel e^(-M/alpha) underflowed at alpha = {}; use the log-domain variant",
            cfg.alpha
        )));
    }

    let mut psi1 = Array2::from_elem((k, b), 1.0 / k as f64);
    let mut psi2 = Array2::zeros((v, b));
    let mut history: VecDeque<Array2<f64>> = VecDeque::with_capacity(cfg.unroll_cap + 1);
    history.push_back(psi1.clone());

    let mut converged = false;
    let mut iterations_used = 0;
    for iter in 1..=cfg.max_iter {
        let a = kernel.dot(&psi1);
        psi2 = guarded_div(xnorm, &a)?;
        let cden = kernel.t().dot(&psi2);
        let psi1_new = guarded_div(z, &cden)?;

        let mut delta = 0.0f64;
        for (&old, &new) in psi1.iter().zip(psi1_new.iter()) {
            if old > 0.0 {
                delta = delta.max((new - old).abs() / old);
            }
        }

        psi1 = psi1_new;
        if history.len() > cfg.unroll_cap {
            history.pop_front();
        }
        history.push_back(psi1.clone());

        iterations_used = iter;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    let state = SinkhornState {
        xnorm,
        z,
        cost,
        kernel,
        psi1,
        psi2,
        iterations_used,
        converged,
        config: cfg.clone(),
        history,
    };
    let per_doc = per_doc_cost(&state);
    if per_doc.iter().any(|c| !c.is_finite()) {
        return Err(Error::numerical(
            "non-finite Sinkhorn cost; use the log-domain variant",
        ));
    }
    Ok((per_doc, state))
}

/// diag of Psi2^T (H o M) Psi1, one entry per document.
fn per_doc_cost(state: &SinkhornState) -> Array1<f64> {
    let weighted = &state.kernel * state.cost;
    let lifted = weighted.dot(&state.psi1); // V x B
    (&lifted * &state.psi2).sum_axis(Axis(0))
}

/// Reconstruct document `doc`'s transport plan diag(psi2) H diag(psi1).
pub fn transport_plan_from_state(state: &SinkhornState, doc: usize) -> Result<TransportPlan> {
    if !state.converged {
        return Err(Error::numerical(
            "Sinkhorn did not converge; the scaling state is not a valid plan",
        ));
    }
    let b = state.psi1.ncols();
    if doc >= b {
        return Err(Error::data(format!("document index {doc} outside batch of {b}")));
    }
    let (v, k) = state.kernel.dim();
    let mut plan = Array2::zeros((v, k));
    for i in 0..v {
        let s2 = state.psi2[[i, doc]];
        if s2 == 0.0 {
            continue;
        }
        for j in 0..k {
            plan[[i, j]] = s2 * state.kernel[[i, j]] * state.psi1[[j, doc]];
        }
    }
    Ok(TransportPlan {
        plan,
        row_marginal: state.xnorm.column(doc).to_owned(),
        col_marginal: state.z.column(doc).to_owned(),
    })
}

/// Gradients of the weighted per-document costs with respect to Z and M.
///
/// `upstream[b]` weights document b's cost. Differentiation runs backwards
/// through the retained iterates; if the forward pass ran longer than the
/// unroll cap, the earliest retained iterate is treated as a constant start.
pub fn sinkhorn_backward(
    state: &SinkhornState,
    upstream: &Array1<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if state.history.len() < 2 {
        return Err(Error::data(
            "no retained Sinkhorn iterates; the forward state was stripped",
        ));
    }
    let b = state.psi1.ncols();
    if upstream.len() != b {
        return Err(Error::data(format!(
            "upstream has {} entries for a batch of {b}",
            upstream.len()
        )));
    }

    let kernel = &state.kernel;
    let weighted = kernel * state.cost; // H o M

    let scale_cols = |mut a: Array2<f64>| -> Array2<f64> {
        for (mut col, &u) in a.axis_iter_mut(Axis(1)).zip(upstream.iter()) {
            col.mapv_inplace(|x| x * u);
        }
        a
    };

    // Direct gradients of cost_b = psi2_b^T (H o M) psi1_b.
    let mut psi1_bar = scale_cols(weighted.t().dot(&state.psi2));
    let psi2_bar_direct = scale_cols(weighted.dot(&state.psi1));
    let outer = scale_cols(state.psi2.clone()).dot(&state.psi1.t()); // V x K
    let mut cost_bar = &outer * kernel;
    let mut kernel_bar = &outer * state.cost;
    let mut z_bar = Array2::zeros(state.z.raw_dim());

    let transitions = state.history.len() - 1;
    for idx in (0..transitions).rev() {
        let psi1_prev = &state.history[idx];
        let psi1_t = &state.history[idx + 1];

        // Recompute the intermediates of transition idx+1 exactly as the
        // forward pass produced them.
        let a = kernel.dot(psi1_prev);
        let psi2_t = guarded_div(state.xnorm, &a)?;
        let cden = kernel.t().dot(&psi2_t);

        // psi1_t = z / cden
        z_bar += &(&psi1_bar / &cden);
        let c_bar = -(&psi1_bar * psi1_t) / &cden;

        // cden = H^T psi2_t
        let mut psi2_bar = kernel.dot(&c_bar);
        if idx + 1 == transitions {
            psi2_bar += &psi2_bar_direct;
        }
        kernel_bar += &psi2_t.dot(&c_bar.t());

        // psi2_t = xnorm / a, zero entries stay identically zero
        let a_bar = -(&psi2_bar * &psi2_t) / &a;

        // a = H psi1_prev
        kernel_bar += &a_bar.dot(&psi1_prev.t());
        psi1_bar = kernel.t().dot(&a_bar);
    }

    // H = e^(-M/alpha)
    cost_bar += &(&kernel_bar * kernel * (-1.0 / state.config.alpha));

    if z_bar.iter().any(|g| !g.is_finite()) || cost_bar.iter().any(|g| !g.is_finite()) {
        return Err(Error::numerical("non-finite Sinkhorn gradient"));
    }
    Ok((z_bar, cost_bar))
}
