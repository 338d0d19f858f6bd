//! Shared oracles for the integration tests. These stay deliberately
//! independent of the library's solver internals: transport optima come
//! from brute-force vertex enumeration, derivatives from finite
//! differences of the public forward passes.
//!
//! Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;

/// Minimum transport cost by enumerating candidate basic solutions: every
/// cell subset of size m + n - 1 that forms a spanning tree, solved by leaf
/// peeling, kept when feasible. Exponential, so keep instances tiny.
pub fn vertex_enumeration_ot(r: &Array1<f64>, c: &Array1<f64>, cost: &Array2<f64>) -> f64 {
    let m = r.len();
    let n = c.len();
    let cells: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let basis_size = m + n - 1;
    let mut best = f64::INFINITY;

    // Iterate subsets of `cells` of size basis_size via bitmask (m*n <= 16).
    let total = 1usize << cells.len();
    for mask in 0..total {
        if (mask as u32).count_ones() as usize != basis_size {
            continue;
        }
        let chosen: Vec<(usize, usize)> = cells
            .iter()
            .enumerate()
            .filter(|(idx, _)| mask & (1 << idx) != 0)
            .map(|(_, &cell)| cell)
            .collect();
        if let Some(value) = solve_on_tree(&chosen, r, c, cost) {
            if value < best {
                best = value;
            }
        }
    }
    best
}

/// Solve for flows on a candidate basis by peeling degree-one nodes.
/// Returns the plan cost when the basis is a tree and the flows are
/// nonnegative (within tolerance).
fn solve_on_tree(
    cells: &[(usize, usize)],
    r: &Array1<f64>,
    c: &Array1<f64>,
    cost: &Array2<f64>,
) -> Option<f64> {
    let m = r.len();
    let n = c.len();
    let mut residual_row: Vec<f64> = r.to_vec();
    let mut residual_col: Vec<f64> = c.to_vec();
    let mut remaining: Vec<(usize, usize)> = cells.to_vec();
    let mut flows: Vec<((usize, usize), f64)> = Vec::with_capacity(cells.len());

    while !remaining.is_empty() {
        // Find a cell that is the only remaining one in its row or column.
        let mut peeled = None;
        for (idx, &(i, j)) in remaining.iter().enumerate() {
            let row_deg = remaining.iter().filter(|&&(a, _)| a == i).count();
            let col_deg = remaining.iter().filter(|&&(_, b)| b == j).count();
            if row_deg == 1 {
                peeled = Some((idx, i, j, true));
                break;
            }
            if col_deg == 1 {
                peeled = Some((idx, i, j, false));
                break;
            }
        }
        let (idx, i, j, by_row) = peeled?; // a cycle: not a tree
        let flow = if by_row { residual_row[i] } else { residual_col[j] };
        if flow < -1e-9 {
            return None;
        }
        residual_row[i] -= flow;
        residual_col[j] -= flow;
        flows.push(((i, j), flow));
        remaining.swap_remove(idx);
    }
    if residual_row.iter().any(|&x| x.abs() > 1e-9) || residual_col.iter().any(|&x| x.abs() > 1e-9)
    {
        return None;
    }
    let _ = (m, n);
    Some(
        flows
            .iter()
            .map(|&((i, j), f)| f.max(0.0) * cost[[i, j]])
            .sum(),
    )
}

pub fn random_simplex(n: usize, rng: &mut impl Rng) -> Array1<f64> {
    let mut v = Array1::from_shape_simple_fn(n, || -> f64 {
        let u: f64 = rng.random::<f64>();
        -(u.max(1e-300)).ln()
    });
    let total = v.sum();
    v.mapv_inplace(|x| x / total);
    v
}

/// A simplex vector with a few entries forced to exactly zero, mimicking
/// sparse word distributions.
pub fn sparse_simplex(n: usize, zeros: usize, rng: &mut impl Rng) -> Array1<f64> {
    let mut v = random_simplex(n, rng);
    let mut zeroed = 0;
    let mut guard = 0;
    while zeroed < zeros.min(n - 1) && guard < 10 * n {
        let i = rng.random_range(0..n);
        if v[i] > 0.0 {
            v[i] = 0.0;
            zeroed += 1;
        }
        guard += 1;
    }
    let total = v.sum();
    v.mapv_inplace(|x| x / total);
    v
}

pub fn random_cost(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(0.0..2.0))
}
