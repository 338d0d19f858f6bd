//! Optimal transport between discrete distributions.
//!
//! Three routes to the same quantity, used for different jobs:
//! - [`exact_ot`] solves the linear program with the transportation simplex
//!   and serves as the ground-truth oracle;
//! - [`sinkhorn_batch`] runs the entropically smoothed scaling iterations on
//!   whole document batches, with reverse-mode gradients through the loop;
//! - [`sinkhorn_log_domain`] is the numerically stabilized equivalent for
//!   small smoothing temperatures where the plain kernel underflows.

mod exact;
mod log_domain;
mod sinkhorn;

pub use exact::exact_ot;
pub use log_domain::{sinkhorn_log_domain, DualPotentials};
pub use sinkhorn::{
    sinkhorn_backward, sinkhorn_batch, transport_plan_from_state, SinkhornState,
};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// A coupling between two discrete distributions together with the
/// marginals it is meant to satisfy.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// Nonnegative D_r x D_c matrix.
    pub plan: Array2<f64>,
    /// Target row marginal (length D_r).
    pub row_marginal: Array1<f64>,
    /// Target column marginal (length D_c).
    pub col_marginal: Array1<f64>,
}

impl TransportPlan {
    /// L1 distance of the plan's actual marginals from the targets.
    pub fn marginal_violation(&self) -> (f64, f64) {
        let rows = self.plan.nrows();
        let cols = self.plan.ncols();
        let mut row_err = 0.0;
        for i in 0..rows {
            let sum: f64 = self.plan.row(i).sum();
            row_err += (sum - self.row_marginal[i]).abs();
        }
        let mut col_err = 0.0;
        for j in 0..cols {
            let sum: f64 = self.plan.column(j).sum();
            col_err += (sum - self.col_marginal[j]).abs();
        }
        (row_err, col_err)
    }

    /// Transport cost `<P, M>` under the given cost matrix.
    pub fn cost(&self, cost: &Array2<f64>) -> f64 {
        (&self.plan * cost).sum()
    }
}

/// Settings for the Sinkhorn iterations.
#[derive(Debug, Clone)]
pub struct SinkhornConfig {
    /// Smoothing temperature of the kernel e^(-M/alpha). Larger values give
    /// smoother plans and faster convergence.
    pub alpha: f64,
    pub max_iter: usize,
    /// Stop when the largest relative change of the strictly positive
    /// scaling entries falls below this.
    pub tol: f64,
    /// How many trailing iterations keep their iterates for reverse-mode
    /// differentiation; anything earlier is treated as constant.
    pub unroll_cap: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            alpha: 20.0,
            max_iter: 1000,
            tol: 0.005,
            unroll_cap: 50,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::data(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.max_iter == 0 {
            return Err(Error::data("max_iter must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::data(format!("tol must be positive, got {}", self.tol)));
        }
        if self.unroll_cap == 0 {
            return Err(Error::data("unroll_cap must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_simplex_columns(name: &str, x: &Array2<f64>, tol: f64) -> Result<()> {
    for (b, col) in x.columns().into_iter().enumerate() {
        let mut sum = 0.0;
        for &v in col {
            if !(v >= 0.0) {
                return Err(Error::data(format!(
                    "{name}: column {b} has a negative or NaN entry ({v})"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::data(format!(
                "{name}: column {b} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_cost_range(m: &Array2<f64>) -> Result<()> {
    const SLACK: f64 = 1e-9;
    for &v in m {
        if !v.is_finite() || !(-SLACK..=2.0 + SLACK).contains(&v) {
            return Err(Error::data(format!("cost entry {v} outside [0, 2]")));
        }
    }
    Ok(())
}
