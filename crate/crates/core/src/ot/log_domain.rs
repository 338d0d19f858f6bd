//! Log-domain Sinkhorn iterations.
//!
//! Mathematically the same fixed point as the plain kernel form, but the
//! scalings are carried as dual potentials and every product becomes a
//! log-sum-exp, so the iterations stay finite at temperatures where
//! e^(-M/alpha) underflows. Small target temperatures are reached through a
//! geometric temperature schedule that warm-starts the potentials, which
//! cuts the iteration count by orders of magnitude without changing the
//! answer.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::ot::{check_cost_range, check_simplex_columns, SinkhornConfig};

const SIMPLEX_TOL: f64 = 1e-6;
/// Iterations spent on each intermediate temperature level.
const WARMUP_ITERS: usize = 40;

/// Kantorovich-style dual potentials, one column per document.
#[derive(Debug, Clone)]
pub struct DualPotentials {
    /// Topic-side potentials, K x B. -inf where z is zero.
    pub f1: Array2<f64>,
    /// Word-side potentials, V x B. -inf where xnorm is zero.
    pub f2: Array2<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl DualPotentials {
    /// Plan entry (v, k) for document b: exp((f2 + f1 - m) / alpha).
    pub fn plan(&self, cost: &Array2<f64>, alpha: f64, doc: usize) -> Array2<f64> {
        let (v, k) = cost.dim();
        let mut plan = Array2::zeros((v, k));
        for i in 0..v {
            let f2 = self.f2[[i, doc]];
            if f2 == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..k {
                let f1 = self.f1[[j, doc]];
                if f1 == f64::NEG_INFINITY {
                    continue;
                }
                plan[[i, j]] = ((f2 + f1 - cost[[i, j]]) / alpha).exp();
            }
        }
        plan
    }
}

fn lse_by<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for t in 0..n {
        let v = term(t);
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for t in 0..n {
        sum += (term(t) - max).exp();
    }
    max + sum.ln()
}

/// Stabilized Sinkhorn. Returns per-document costs and the dual potentials.
///
/// Stops when every document's row marginal is within `cfg.tol` of xnorm in
/// L1, or after `cfg.max_iter` iterations at the target temperature.
pub fn sinkhorn_log_domain(
    xnorm: &Array2<f64>,
    z: &Array2<f64>,
    cost: &Array2<f64>,
    cfg: &SinkhornConfig,
) -> Result<(Array1<f64>, DualPotentials)> {
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

    let log_x = xnorm.mapv(f64::ln); // ln 0 = -inf is the wanted sentinel
    let log_z = z.mapv(f64::ln);

    let mut f1 = Array2::<f64>::zeros((k, b));
    let mut f2 = Array2::<f64>::zeros((v, b));
    let mut iterations = 0usize;
    let mut converged = false;

    // Temperature schedule: halve from 1.0 down to the target. At mild
    // targets the schedule collapses to the single final level.
    let mut levels = Vec::new();
    let mut level = 1.0f64;
    while level > cfg.alpha {
        levels.push(level);
        level *= 0.5;
    }
    levels.push(cfg.alpha);

    let mut s2 = Array2::<f64>::zeros((v, b));
    let mut s1 = Array2::<f64>::zeros((k, b));

    for (li, &alpha) in levels.iter().enumerate() {
        let last_level = li + 1 == levels.len();
        let budget = if last_level { cfg.max_iter } else { WARMUP_ITERS };
        for _ in 0..budget {
            iterations += 1;
            // s2[v][b] = lse_k((f1[k][b] - m[v][k]) / alpha)
            for i in 0..v {
                for col in 0..b {
                    s2[[i, col]] = lse_by(k, |j| (f1[[j, col]] - cost[[i, j]]) / alpha);
                }
            }

            if last_level {
                // Row marginal with the current f2 and fresh s2.
                let mut worst = 0.0f64;
                for col in 0..b {
                    let mut err = 0.0;
                    for i in 0..v {
                        let log_row = f2[[i, col]] / alpha + s2[[i, col]];
                        let row = if log_row == f64::NEG_INFINITY { 0.0 } else { log_row.exp() };
                        err += (row - xnorm[[i, col]]).abs();
                    }
                    worst = worst.max(err);
                }
                if worst < cfg.tol {
                    converged = true;
                    break;
                }
            }

            for i in 0..v {
                for col in 0..b {
                    f2[[i, col]] = match log_x[[i, col]] {
                        f64::NEG_INFINITY => f64::NEG_INFINITY,
                        lx => alpha * (lx - s2[[i, col]]),
                    };
                }
            }
            for j in 0..k {
                for col in 0..b {
                    s1[[j, col]] = lse_by(v, |i| (f2[[i, col]] - cost[[i, j]]) / alpha);
                }
            }
            for j in 0..k {
                for col in 0..b {
                    f1[[j, col]] = match log_z[[j, col]] {
                        f64::NEG_INFINITY => f64::NEG_INFINITY,
                        lz => alpha * (lz - s1[[j, col]]),
                    };
                }
            }
        }
    }

    let alpha = cfg.alpha;
    let mut per_doc = Array1::zeros(b);
    for col in 0..b {
        let mut total = 0.0;
        for i in 0..v {
            let f2v = f2[[i, col]];
            if f2v == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..k {
                let f1k = f1[[j, col]];
                if f1k == f64::NEG_INFINITY {
                    continue;
                }
                let m = cost[[i, j]];
                total += ((f2v + f1k - m) / alpha).exp() * m;
            }
        }
        per_doc[col] = total;
    }
    if per_doc.iter().any(|c| !c.is_finite()) {
        return Err(Error::numerical("non-finite log-domain Sinkhorn cost"));
    }

    Ok((
        per_doc,
        DualPotentials {
            f1,
            f2,
            iterations_used: iterations,
            converged,
        },
    ))
}
