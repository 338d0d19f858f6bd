//! Finite-difference checks for every hand-written gradient: the cost
//! matrix Jacobian, the unrolled Sinkhorn backward pass, and the full
//! joint-loss chain.

mod support;

use ndarray::{Array1, Array2, Axis};
use ottm_core::embeddings::{cost_matrix, cost_matrix_grad_g, TopicEmbeddings, WordEmbeddings};
use ottm_core::ot::{sinkhorn_backward, sinkhorn_batch, SinkhornConfig};
use ottm_core::seed;
use ottm_core::verify;
use rand::Rng;
use support::{random_cost, random_simplex};

const FD_STEP: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(1e-6, f64::max(a.abs(), b.abs()))
}

/// Fixed-iteration-count configuration: the objective is then an ordinary
/// smooth function of its inputs, so central differences are well-defined.
fn fixed_cfg(alpha: f64, iters: usize) -> SinkhornConfig {
    SinkhornConfig {
        alpha,
        max_iter: iters,
        tol: 1e-300,
        unroll_cap: iters,
    }
}

#[test]
fn cost_matrix_gradient_matches_finite_differences() {
    // Random 6 x 3 instance, checked at points away from |cos| = 1 where
    // the cosine is near-stationary and relative error is meaningless.
    let mut rng = seed::rng(201, "test/grad-costmatrix");
    let l = 4;
    let (v, k) = (6, 3);
    let e = WordEmbeddings::from_matrix(Array2::from_shape_simple_fn((l, v), || {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let mut g = TopicEmbeddings::from_matrix(Array2::from_shape_simple_fn((l, k), || {
        rng.random_range(-1.0..1.0)
    }));
    let upstream = Array2::from_shape_simple_fn((v, k), || rng.random_range(-1.0..1.0));

    let m0 = cost_matrix(&e, &g).unwrap();
    assert!(m0
        .matrix()
        .iter()
        .all(|&m| (0.07..1.93).contains(&m)), "degenerate test point");

    let analytic = cost_matrix_grad_g(&e, &g, &upstream).unwrap();
    let loss = |g: &TopicEmbeddings| -> f64 {
        (&cost_matrix(&e, g).unwrap().into_matrix() * &upstream).sum()
    };
    let mut max_err = 0.0f64;
    for idx in 0..(l * k) {
        let original = g.matrix().as_slice().unwrap()[idx];
        g.matrix_mut().as_slice_mut().unwrap()[idx] = original + FD_STEP;
        let up = loss(&g);
        g.matrix_mut().as_slice_mut().unwrap()[idx] = original - FD_STEP;
        let down = loss(&g);
        g.matrix_mut().as_slice_mut().unwrap()[idx] = original;
        let fd = (up - down) / (2.0 * FD_STEP);
        max_err = max_err.max(rel_err(fd, analytic.as_slice().unwrap()[idx]));
    }
    assert!(max_err <= 1e-6, "max relative error {max_err}");
}

#[test]
fn scaling_topic_embedding_leaves_costs_unchanged() {
    let mut rng = seed::rng(202, "test/grad-scale-invariance");
    let e = WordEmbeddings::from_matrix(Array2::from_shape_simple_fn((5, 7), || {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let mut g = TopicEmbeddings::from_matrix(Array2::from_shape_simple_fn((5, 3), || {
        rng.random_range(-1.0..1.0)
    }));
    let before = cost_matrix(&e, &g).unwrap();
    g.matrix_mut().column_mut(1).mapv_inplace(|x| 3.7 * x);
    let after = cost_matrix(&e, &g).unwrap();
    for v in 0..7 {
        assert!((before.matrix()[[v, 1]] - after.matrix()[[v, 1]]).abs() < 1e-12);
    }
}

#[test]
fn sinkhorn_grad_m_matches_finite_differences() {
    let mut rng = seed::rng(203, "test/grad-sinkhorn-m");
    for trial in 0..4 {
        let (v, k, b) = (6, 4, 2);
        let cost = if trial == 0 {
            // Constant cost: the gradient comes entirely from the cost's
            // appearance in the objective, not the plan's reaction.
            Array2::from_elem((v, k), 1.0)
        } else {
            random_cost(v, k, &mut rng)
        };
        let mut x = Array2::zeros((v, b));
        let mut z = Array2::zeros((k, b));
        for col in 0..b {
            x.column_mut(col).assign(&random_simplex(v, &mut rng));
            z.column_mut(col).assign(&random_simplex(k, &mut rng));
        }
        let cfg = fixed_cfg(20.0, 60);
        let upstream = Array1::from_shape_simple_fn(b, || rng.random_range(0.2..1.0));

        let (_, state) = sinkhorn_batch(&x, &z, &cost, &cfg).unwrap();
        let (_, grad_m) = sinkhorn_backward(&state, &upstream).unwrap();

        let weighted_cost = |m: &Array2<f64>| -> f64 {
            let (c, _) = sinkhorn_batch(&x, &z, m, &cfg).unwrap();
            c.dot(&upstream)
        };
        let mut max_err = 0.0f64;
        let mut cost_var = cost.clone();
        for idx in 0..(v * k) {
            let original = cost_var.as_slice().unwrap()[idx];
            cost_var.as_slice_mut().unwrap()[idx] = original + FD_STEP;
            let up = weighted_cost(&cost_var);
            cost_var.as_slice_mut().unwrap()[idx] = original - FD_STEP;
            let down = weighted_cost(&cost_var);
            cost_var.as_slice_mut().unwrap()[idx] = original;
            let fd = (up - down) / (2.0 * FD_STEP);
            max_err = max_err.max(rel_err(fd, grad_m.as_slice().unwrap()[idx]));
        }
        assert!(max_err <= 1e-4, "trial {trial}: max relative error {max_err}");
    }
}

#[test]
fn sinkhorn_grad_z_matches_tangent_finite_differences() {
    // Perturbations must stay on the simplex, so directional derivatives
    // are taken along (e_i - e_j) pairs and compared to the analytic
    // gradient projected on the same directions.
    let mut rng = seed::rng(204, "test/grad-sinkhorn-z");
    let (v, k, b) = (10, 4, 2);
    let cost = random_cost(v, k, &mut rng);
    let mut x = Array2::zeros((v, b));
    let mut z = Array2::zeros((k, b));
    for col in 0..b {
        x.column_mut(col).assign(&random_simplex(v, &mut rng));
        z.column_mut(col).assign(&random_simplex(k, &mut rng));
    }
    let cfg = fixed_cfg(20.0, 60);
    let upstream = Array1::ones(b);

    let (_, state) = sinkhorn_batch(&x, &z, &cost, &cfg).unwrap();
    let (grad_z, _) = sinkhorn_backward(&state, &upstream).unwrap();

    let total = |z: &Array2<f64>| -> f64 {
        let (c, _) = sinkhorn_batch(&x, &z.clone(), &cost, &cfg).unwrap();
        c.sum()
    };
    let mut max_err = 0.0f64;
    for col in 0..b {
        for i in 0..k {
            for j in (i + 1)..k {
                let mut zp = z.clone();
                zp[[i, col]] += FD_STEP;
                zp[[j, col]] -= FD_STEP;
                let up = total(&zp);
                let mut zm = z.clone();
                zm[[i, col]] -= FD_STEP;
                zm[[j, col]] += FD_STEP;
                let down = total(&zm);
                let fd = (up - down) / (2.0 * FD_STEP);
                let analytic = grad_z[[i, col]] - grad_z[[j, col]];
                max_err = max_err.max(rel_err(fd, analytic));
            }
        }
    }
    assert!(max_err <= 1e-4, "max relative error {max_err}");
}

#[test]
fn truncated_unroll_still_approximates_the_converged_gradient() {
    // Run far past the unroll cap; the truncated reverse pass must stay
    // close to finite differences of the converged forward pass because
    // the scaling map forgets its initialization geometrically.
    let mut rng = seed::rng(205, "test/grad-truncation");
    let (v, k) = (5, 3);
    let cost = random_cost(v, k, &mut rng);
    let x = random_simplex(v, &mut rng).insert_axis(Axis(1));
    let z = random_simplex(k, &mut rng).insert_axis(Axis(1));
    // A small cap guarantees the forward pass outruns the retained tail.
    let cfg = SinkhornConfig {
        alpha: 0.2,
        max_iter: 600,
        tol: 1e-300,
        unroll_cap: 15,
    };
    let (_, state) = sinkhorn_batch(&x, &z, &cost, &cfg).unwrap();
    assert!(
        state.iterations_used > 15,
        "forward stopped after {} iterations",
        state.iterations_used
    );
    assert_eq!(state.unrolled_iterations(), 15);
    let (_, grad_m) = sinkhorn_backward(&state, &Array1::ones(1)).unwrap();

    let eval = |m: &Array2<f64>| -> f64 {
        let (c, _) = sinkhorn_batch(&x, &z, m, &cfg).unwrap();
        c[0]
    };
    let mut cost_var = cost.clone();
    let mut max_err = 0.0f64;
    for idx in 0..(v * k) {
        let original = cost_var.as_slice().unwrap()[idx];
        cost_var.as_slice_mut().unwrap()[idx] = original + FD_STEP;
        let up = eval(&cost_var);
        cost_var.as_slice_mut().unwrap()[idx] = original - FD_STEP;
        let down = eval(&cost_var);
        cost_var.as_slice_mut().unwrap()[idx] = original;
        let fd = (up - down) / (2.0 * FD_STEP);
        max_err = max_err.max(rel_err(fd, grad_m.as_slice().unwrap()[idx]));
    }
    assert!(max_err <= 1e-4, "max relative error {max_err}");
}

#[test]
fn full_loss_gradients_match_finite_differences() {
    let report = verify::gradcheck_suite(206, 3).unwrap();
    assert!(
        report.passed(),
        "max relative error {} at {:?}",
        report.max_rel_err,
        report.worst_pair
    );
    assert!(report.max_rel_err <= report.tolerance);
}
