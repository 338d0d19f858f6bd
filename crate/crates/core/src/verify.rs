//! Randomized verification suites: the transport bound behind the loss
//! design, gradient correctness against finite differences, and Sinkhorn
//! agreement with the exact solver.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::embeddings::{cost_matrix_grad_g, CostMatrix, TopicEmbeddings, WordEmbeddings};
use crate::error::Result;
use crate::model::{
    encoder_backward, joint_loss, loss_backward, DropoutConfig, EncoderParams,
};
use crate::ot::{exact_ot, sinkhorn_log_domain, SinkhornConfig};
use crate::seed;

/// Random point on the probability simplex (Dirichlet(1)).
pub fn random_simplex(n: usize, rng: &mut impl Rng) -> Array1<f64> {
    let mut v = Array1::from_shape_simple_fn(n, || -> f64 {
        let u: f64 = rng.random::<f64>();
        -(u.max(1e-300)).ln()
    });
    let total = v.sum();
    v.mapv_inplace(|x| x / total);
    v
}

fn random_cost(vdim: usize, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((vdim, k), || rng.random_range(0.0..2.0))
}

// ---------------------------------------------------------------------
// Bound suite
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub trials: usize,
    pub violations: usize,
    /// min over trials of (-x^T log phi(z)) - exact_ot(x, z, M); the bound
    /// holds when this stays above -tolerance.
    pub min_slack: f64,
    pub tolerance: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Check that the exact transport cost never exceeds the negative decoder
/// log-likelihood on random instances with at least 8 words and costs in
/// [0, 2].
pub fn bound_suite(seed_root: u64, trials: usize) -> Result<BoundReport> {
    let tolerance = 1e-9;
    let mut rng = seed::rng(seed_root, "verify/bound");
    let mut min_slack = f64::INFINITY;
    let mut violations = 0usize;
    for _ in 0..trials {
        let v = rng.random_range(8..=50);
        let k = rng.random_range(2..=10);
        let m = random_cost(v, k, &mut rng);
        let x = random_simplex(v, &mut rng);
        let z = random_simplex(k, &mut rng);

        let (distance, _) = exact_ot(&x, &z, &m)?;
        let z2 = z.clone().insert_axis(ndarray::Axis(1));
        let x2 = x.clone().insert_axis(ndarray::Axis(1));
        let nll = -crate::model::loss::decoder_log_likelihood(&x2, &z2, &m)?[0];

        let slack = nll - distance;
        if slack < min_slack {
            min_slack = slack;
        }
        if slack < -tolerance {
            violations += 1;
        }
    }
    Ok(BoundReport {
        trials,
        violations,
        min_slack,
        tolerance,
    })
}

// ---------------------------------------------------------------------
// Gradient suite
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub trials: usize,
    pub parameters_checked: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub failures: usize,
    /// Analytic and finite-difference values at the worst entry.
    pub worst_pair: (f64, f64),
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct GradInstance {
    encoder: EncoderParams,
    words: WordEmbeddings,
    topics: TopicEmbeddings,
    xnorm: Array2<f64>,
    epsilon: f64,
    sinkhorn: SinkhornConfig,
}

impl GradInstance {
    /// Loss with dropout off and batch norm on running statistics, so the
    /// objective is a deterministic function of the parameters.
    fn loss(&self) -> Result<f64> {
        let (z, _) = self.encoder.forward_infer_cached(&self.xnorm)?;
        let m = crate::embeddings::cost_matrix(&self.words, &self.topics)?;
        let (breakdown, _) =
            joint_loss(&self.xnorm, &z, m.matrix(), self.epsilon, &self.sinkhorn)?;
        Ok(breakdown.total)
    }

    fn analytic_grads(&self) -> Result<(crate::model::EncoderGrads, Array2<f64>)> {
        let (z, cache) = self.encoder.forward_infer_cached(&self.xnorm)?;
        let m = crate::embeddings::cost_matrix(&self.words, &self.topics)?;
        let (_, state) = joint_loss(&self.xnorm, &z, m.matrix(), self.epsilon, &self.sinkhorn)?;
        let (dz, dm) = loss_backward(&state, self.epsilon)?;
        let enc = encoder_backward(&self.encoder, &cache, &dz)?;
        let dg = cost_matrix_grad_g(&self.words, &self.topics, &dm)?;
        Ok((enc, dg))
    }
}

// Central differences of an O(1) loss measure slopes no finer than
// eps * |f| / (2h) ~ 5e-12, so entries below the floor are compared
// absolutely at floor * tolerance instead of relatively.
const GRAD_FLOOR: f64 = 1e-6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(GRAD_FLOOR, f64::max(a.abs(), b.abs()))
}

/// Compare every parameter gradient of the joint loss against central
/// finite differences on small random instances.
pub fn gradcheck_suite(seed_root: u64, trials: usize) -> Result<GradcheckReport> {
    gradcheck_suite_with_step(seed_root, trials, 1e-5)
}

pub fn gradcheck_suite_with_step(
    seed_root: u64,
    trials: usize,
    step: f64,
) -> Result<GradcheckReport> {
    let tolerance = 1e-4;
    let mut max_rel_err = 0.0f64;
    let mut failures = 0usize;
    let mut parameters_checked = 0usize;
    let mut worst_pair = (0.0, 0.0);

    for trial in 0..trials {
        let mut rng = seed::rng(seed_root, &format!("verify/gradcheck/{trial}"));
        let mut inst = random_instance(&mut rng)?;
        let (enc_grads, g_grad) = inst.analytic_grads()?;

        // Walk every tensor entry: perturb, re-evaluate, restore. A
        // measurement that misses at the primary step is re-probed at a
        // smaller one: the loss has ReLU kinks, and a central difference
        // straddling a kink is not a derivative estimate. A genuinely wrong
        // gradient disagrees at every step; a kink artifact shrinks with it.
        let mut check = |analytic: f64,
                         write: &mut dyn FnMut(&mut GradInstance, f64),
                         read: &dyn Fn(&GradInstance) -> f64|
         -> Result<()> {
            let original = read(&inst);
            let mut measure = |h: f64, inst: &mut GradInstance| -> Result<f64> {
                write(inst, original + h);
                let up = inst.loss()?;
                write(inst, original - h);
                let down = inst.loss()?;
                write(inst, original);
                Ok((up - down) / (2.0 * h))
            };
            let fd = measure(step, &mut inst)?;
            let mut err = rel_err(fd, analytic);
            let mut reported_fd = fd;
            if err > tolerance {
                let fd_fine = measure(step / 10.0, &mut inst)?;
                let err_fine = rel_err(fd_fine, analytic);
                if err_fine <= tolerance {
                    err = err_fine;
                    reported_fd = fd_fine;
                }
            }
            if err > max_rel_err {
                max_rel_err = err;
                worst_pair = (analytic, reported_fd);
            }
            if err > tolerance {
                failures += 1;
            }
            parameters_checked += 1;
            Ok(())
        };

        macro_rules! check_matrix {
            ($grad:expr, $get:ident, $field:ident) => {
                for idx in 0..$grad.len() {
                    let g = $grad.as_slice().expect("contiguous")[idx];
                    check(
                        g,
                        &mut |inst, v| {
                            inst.$get.$field.as_slice_mut().expect("contiguous")[idx] = v
                        },
                        &|inst| inst.$get.$field.as_slice().expect("contiguous")[idx],
                    )?;
                }
            };
        }

        check_matrix!(enc_grads.w1, encoder, w1);
        check_matrix!(enc_grads.b1, encoder, b1);
        check_matrix!(enc_grads.bn_gamma, encoder, bn_gamma);
        check_matrix!(enc_grads.bn_beta, encoder, bn_beta);
        check_matrix!(enc_grads.w2, encoder, w2);
        check_matrix!(enc_grads.b2, encoder, b2);

        for idx in 0..g_grad.len() {
            let g = g_grad.as_slice().expect("contiguous")[idx];
            check(
                g,
                &mut |inst, v| {
                    inst.topics.matrix_mut().as_slice_mut().expect("contiguous")[idx] = v
                },
                &|inst| inst.topics.matrix().as_slice().expect("contiguous")[idx],
            )?;
        }
    }

    Ok(GradcheckReport {
        trials,
        parameters_checked,
        max_rel_err,
        tolerance,
        failures,
        worst_pair,
    })
}

fn random_instance(rng: &mut ChaCha8Rng) -> Result<GradInstance> {
    let (v, k, b, l) = (10, 4, 3, 6);
    let hidden = 200;
    let seed_inner: u64 = rng.random();
    let mut encoder = EncoderParams::init(
        v,
        hidden,
        k,
        DropoutConfig {
            rate: 0.0,
            rate_is_keep_prob: false,
        },
        0.99,
        seed_inner,
    );
    // Random batch-norm statistics so the inference path is exercised away
    // from the identity.
    for i in 0..hidden {
        encoder.bn_running_mean[i] = rng.random_range(-0.2..0.2);
        encoder.bn_running_var[i] = rng.random_range(0.5..1.5);
        encoder.bn_gamma[i] = rng.random_range(0.8..1.2);
        encoder.bn_beta[i] = rng.random_range(-0.2..0.2);
    }
    let words = WordEmbeddings::from_matrix(Array2::from_shape_simple_fn((l, v), || {
        rng.random_range(-1.0..1.0)
    }))?;
    let topics = TopicEmbeddings::from_matrix(Array2::from_shape_simple_fn((l, k), || {
        rng.random_range(-0.5..0.5)
    }));
    let mut xnorm = Array2::zeros((v, b));
    for col in 0..b {
        let s = random_simplex(v, rng);
        xnorm.column_mut(col).assign(&s);
    }
    Ok(GradInstance {
        encoder,
        words,
        topics,
        xnorm,
        epsilon: 0.07,
        sinkhorn: SinkhornConfig {
            alpha: 20.0,
            max_iter: 80,
            tol: 1e-300,
            unroll_cap: 80,
        },
    })
}

// ---------------------------------------------------------------------
// Oracle suite
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub trials: usize,
    /// max over trials of |sinkhorn(0.01) - exact| / (1 + exact).
    pub max_rel_gap: f64,
    pub rel_gap_tolerance: f64,
    /// min over trials and temperatures of sinkhorn - exact.
    pub min_dominance_slack: f64,
    pub dominance_tolerance: f64,
    pub violations: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Compare the log-domain Sinkhorn cost against the exact solver: tight
/// agreement at a sharp temperature, dominance at every temperature.
pub fn oracle_suite(seed_root: u64, trials: usize) -> Result<OracleReport> {
    let rel_gap_tolerance = 1e-2;
    let dominance_tolerance = 1e-9;
    let temperatures = [0.01, 0.1, 1.0, 5.0, 20.0];

    let mut rng = seed::rng(seed_root, "verify/oracle");
    let mut max_rel_gap = 0.0f64;
    let mut min_dominance_slack = f64::INFINITY;
    let mut violations = 0usize;

    for _ in 0..trials {
        let dr = rng.random_range(2..=10);
        let dc = rng.random_range(2..=10);
        let m = random_cost(dr, dc, &mut rng);
        let r = random_simplex(dr, &mut rng);
        let c = random_simplex(dc, &mut rng);
        let (exact, _) = exact_ot(&r, &c, &m)?;

        let r2 = r.clone().insert_axis(ndarray::Axis(1));
        let c2 = c.clone().insert_axis(ndarray::Axis(1));

        for &alpha in &temperatures {
            let cfg = SinkhornConfig {
                alpha,
                max_iter: 50_000,
                tol: 1e-11,
                unroll_cap: 1,
            };
            let (cost, _) = sinkhorn_log_domain(&r2, &c2, &m, &cfg)?;
            let slack = cost[0] - exact;
            if slack < min_dominance_slack {
                min_dominance_slack = slack;
            }
            if slack < -dominance_tolerance {
                violations += 1;
            }
            if alpha == 0.01 {
                let rel = (cost[0] - exact).abs() / (1.0 + exact);
                if rel > max_rel_gap {
                    max_rel_gap = rel;
                }
                if rel > rel_gap_tolerance {
                    violations += 1;
                }
            }
        }
    }

    Ok(OracleReport {
        trials,
        max_rel_gap,
        rel_gap_tolerance,
        min_dominance_slack,
        dominance_tolerance,
        violations,
    })
}

/// Cost matrices sampled by the suites are plain arrays; expose the typed
/// wrapper for callers that need it.
pub fn as_cost_matrix(m: Array2<f64>) -> Result<CostMatrix> {
    CostMatrix::from_matrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_suite_small_run_passes() {
        let report = bound_suite(11, 25).unwrap();
        assert!(report.passed(), "min slack {}", report.min_slack);
        assert!(report.min_slack >= -report.tolerance);
    }

    #[test]
    fn oracle_suite_small_run_passes() {
        let report = oracle_suite(12, 5).unwrap();
        assert!(
            report.passed(),
            "gap {} slack {}",
            report.max_rel_gap,
            report.min_dominance_slack
        );
    }

    #[test]
    fn gradcheck_single_trial_passes() {
        let report = gradcheck_suite(13, 1).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
        assert!(report.parameters_checked > 3000);
    }
}
