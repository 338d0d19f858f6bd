//! Cross-checks between the three transport routes: vertex enumeration
//! (brute force), the transportation simplex, and Sinkhorn in both the
//! plain and log-domain forms.

mod support;

use ndarray::{arr1, arr2, Array1, Array2, Axis};
use ottm_core::ot::{
    exact_ot, sinkhorn_batch, sinkhorn_log_domain, transport_plan_from_state, SinkhornConfig,
};
use ottm_core::seed;
use rand::Rng;
use support::{random_cost, random_simplex, sparse_simplex, vertex_enumeration_ot};

fn tight(alpha: f64) -> SinkhornConfig {
    SinkhornConfig {
        alpha,
        max_iter: 50_000,
        tol: 1e-11,
        unroll_cap: 1,
    }
}

#[test]
fn simplex_solver_matches_vertex_enumeration() {
    let mut rng = seed::rng(101, "test/ot-enum");
    for trial in 0..150 {
        let m = rng.random_range(2..=4);
        let n = rng.random_range(2..=4);
        let cost = random_cost(m, n, &mut rng);
        let (r, c) = if trial % 3 == 0 {
            // Include degenerate marginals with exact zeros.
            (sparse_simplex(m, 1, &mut rng), sparse_simplex(n, 1, &mut rng))
        } else {
            (random_simplex(m, &mut rng), random_simplex(n, &mut rng))
        };
        let brute = vertex_enumeration_ot(&r, &c, &cost);
        let (solved, plan) = exact_ot(&r, &c, &cost).unwrap();
        assert!(
            (brute - solved).abs() <= 1e-9 * (1.0 + brute.abs()),
            "trial {trial}: enumeration {brute} vs simplex {solved}"
        );
        let (re, ce) = plan.marginal_violation();
        assert!(re < 1e-9 && ce < 1e-9);
        assert!(plan.plan.iter().all(|&p| p >= 0.0));
        assert!((plan.cost(&cost) - solved).abs() < 1e-12);
    }
}

#[test]
fn spec_two_by_two_and_two_by_three_vertices() {
    let r = arr1(&[0.7, 0.3]);
    let c = arr1(&[0.4, 0.6]);
    let cost = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
    assert!((vertex_enumeration_ot(&r, &c, &cost) - 0.3).abs() < 1e-12);
    let (d, _) = exact_ot(&r, &c, &cost).unwrap();
    assert!((d - 0.3).abs() < 1e-12);

    let r = arr1(&[0.5, 0.5]);
    let c = arr1(&[0.2, 0.3, 0.5]);
    let cost = arr2(&[[0.1, 0.7, 1.4], [1.1, 0.4, 0.2]]);
    let brute = vertex_enumeration_ot(&r, &c, &cost);
    let (d, _) = exact_ot(&r, &c, &cost).unwrap();
    assert!((brute - d).abs() < 1e-12, "{brute} vs {d}");
}

#[test]
fn sinkhorn_approaches_exact_at_sharp_temperature() {
    // The spec's 2 x 2 instance: cost within 1e-2 of the exact 0.3.
    let x = arr2(&[[0.7], [0.3]]);
    let z = arr2(&[[0.4], [0.6]]);
    let cost = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
    let (per_doc, _) = sinkhorn_batch(&x, &z, &cost, &tight(0.01)).unwrap();
    assert!((per_doc[0] - 0.3).abs() <= 1e-2, "cost {}", per_doc[0]);

    let (log_cost, _) = sinkhorn_log_domain(&x, &z, &cost, &tight(0.01)).unwrap();
    assert!((log_cost[0] - 0.3).abs() <= 1e-2);
}

#[test]
fn log_domain_agrees_with_plain_kernel_when_both_stable() {
    let mut rng = seed::rng(102, "test/ot-agreement");
    for _ in 0..30 {
        let v = rng.random_range(3..=8);
        let k = rng.random_range(2..=6);
        let cost = random_cost(v, k, &mut rng);
        let x = random_simplex(v, &mut rng).insert_axis(Axis(1));
        let z = random_simplex(k, &mut rng).insert_axis(Axis(1));
        let cfg = tight(20.0);
        let (plain, _) = sinkhorn_batch(&x, &z, &cost, &cfg).unwrap();
        let (logd, _) = sinkhorn_log_domain(&x, &z, &cost, &cfg).unwrap();
        assert!(
            (plain[0] - logd[0]).abs() < 1e-6,
            "plain {} vs log {}",
            plain[0],
            logd[0]
        );
    }
}

#[test]
fn entropic_cost_dominates_exact_cost() {
    let mut rng = seed::rng(103, "test/ot-dominance");
    for _ in 0..40 {
        let dr = rng.random_range(2..=10);
        let dc = rng.random_range(2..=10);
        let cost = random_cost(dr, dc, &mut rng);
        let r = random_simplex(dr, &mut rng);
        let c = random_simplex(dc, &mut rng);
        let (exact, _) = exact_ot(&r, &c, &cost).unwrap();
        let x = r.insert_axis(Axis(1));
        let z = c.insert_axis(Axis(1));
        for alpha in [0.01, 0.5, 5.0, 20.0] {
            let (sk, _) = sinkhorn_log_domain(&x, &z, &cost, &tight(alpha)).unwrap();
            assert!(
                sk[0] >= exact - 1e-9,
                "alpha {alpha}: sinkhorn {} below exact {exact}",
                sk[0]
            );
        }
    }
}

#[test]
fn sharpening_tracks_exact_within_relative_band() {
    let mut rng = seed::rng(104, "test/ot-sharpening");
    for _ in 0..25 {
        let dr = rng.random_range(2..=10);
        let dc = rng.random_range(2..=10);
        let cost = random_cost(dr, dc, &mut rng);
        let r = random_simplex(dr, &mut rng);
        let c = random_simplex(dc, &mut rng);
        let (exact, _) = exact_ot(&r, &c, &cost).unwrap();
        let x = r.insert_axis(Axis(1));
        let z = c.insert_axis(Axis(1));
        let (sk, _) = sinkhorn_log_domain(&x, &z, &cost, &tight(0.01)).unwrap();
        assert!(
            (sk[0] - exact).abs() <= 1e-2 * (1.0 + exact),
            "sinkhorn {} vs exact {exact}",
            sk[0]
        );
    }
}

#[test]
fn aligned_point_mass_plan_concentrates() {
    // Matching supports and a zero-diagonal cost at a sharp temperature:
    // nearly all mass of the reconstructed plan sits on the diagonal cell
    // carrying the point mass.
    let mut cost = Array2::from_elem((3, 3), 1.0);
    for i in 0..3 {
        cost[[i, i]] = 0.0;
    }
    let x = arr2(&[[0.98], [0.01], [0.01]]);
    let z = x.clone();
    let cfg = SinkhornConfig {
        alpha: 0.01,
        max_iter: 50_000,
        tol: 1e-10,
        unroll_cap: 1,
    };
    let (_, state) = sinkhorn_batch(&x, &z, &cost, &cfg).unwrap();
    assert!(state.converged);
    let plan = transport_plan_from_state(&state, 0).unwrap();
    assert!(plan.plan[[0, 0]] >= 1.0 - 1e-3 - 0.02, "plan {:?}", plan.plan);
    let (re, ce) = plan.marginal_violation();
    assert!(re < 1e-6 && ce < 1e-6);
}

#[test]
fn permuting_topics_leaves_cost_unchanged() {
    let mut rng = seed::rng(105, "test/ot-permutation");
    let v = 6;
    let k = 4;
    let cost = random_cost(v, k, &mut rng);
    let x = random_simplex(v, &mut rng).insert_axis(Axis(1));
    let z = random_simplex(k, &mut rng);

    let perm = [2usize, 0, 3, 1];
    let mut cost_p = Array2::zeros((v, k));
    let mut z_p = Array1::zeros(k);
    for (dst, &src) in perm.iter().enumerate() {
        cost_p.column_mut(dst).assign(&cost.column(src));
        z_p[dst] = z[src];
    }

    let cfg = tight(5.0);
    let (a, _) = sinkhorn_batch(&x, &z.clone().insert_axis(Axis(1)), &cost, &cfg).unwrap();
    let (b, _) = sinkhorn_batch(&x, &z_p.insert_axis(Axis(1)), &cost_p, &cfg).unwrap();
    assert!((a[0] - b[0]).abs() < 1e-12, "{} vs {}", a[0], b[0]);
}

#[test]
fn batched_costs_match_single_document_costs() {
    // The per-document cost must be the diagonal of the batched product:
    // running documents together or separately must agree.
    let mut rng = seed::rng(106, "test/ot-batch-diagonal");
    let v = 7;
    let k = 3;
    let cost = random_cost(v, k, &mut rng);
    let b = 4;
    let mut x = Array2::zeros((v, b));
    let mut z = Array2::zeros((k, b));
    for col in 0..b {
        x.column_mut(col).assign(&random_simplex(v, &mut rng));
        z.column_mut(col).assign(&random_simplex(k, &mut rng));
    }
    let cfg = tight(2.0);
    let (batched, _) = sinkhorn_batch(&x, &z, &cost, &cfg).unwrap();
    for col in 0..b {
        let xs = x.column(col).to_owned().insert_axis(Axis(1));
        let zs = z.column(col).to_owned().insert_axis(Axis(1));
        let (single, _) = sinkhorn_batch(&xs, &zs, &cost, &cfg).unwrap();
        assert!(
            (batched[col] - single[0]).abs() < 1e-9,
            "document {col}: batched {} vs single {}",
            batched[col],
            single[0]
        );
    }
}

#[test]
fn feasibility_of_converged_plans_over_random_batches() {
    let mut rng = seed::rng(107, "test/ot-feasibility");
    let cfg = SinkhornConfig::default();
    for _ in 0..60 {
        let v = rng.random_range(3..=12);
        let k = rng.random_range(2..=6);
        let b = rng.random_range(1..=4);
        let cost = random_cost(v, k, &mut rng);
        let mut x = Array2::zeros((v, b));
        let mut z = Array2::zeros((k, b));
        for col in 0..b {
            x.column_mut(col)
                .assign(&sparse_simplex(v, v / 3, &mut rng));
            z.column_mut(col).assign(&random_simplex(k, &mut rng));
        }
        let (_, state) = sinkhorn_batch(&x, &z, &cost, &cfg).unwrap();
        assert!(state.converged, "default budget should converge");
        for doc in 0..b {
            let plan = transport_plan_from_state(&state, doc).unwrap();
            let (re, ce) = plan.marginal_violation();
            assert!(re <= 10.0 * cfg.tol, "row violation {re}");
            assert!(ce <= 10.0 * cfg.tol, "col violation {ce}");
        }
    }
}
