//! Exact discrete optimal transport via the transportation simplex.
//!
//! Northwest-corner start, then cycle-canceling pivots on the basis tree.
//! Instances are capped at 10,000 cells; this solver exists as a
//! ground-truth oracle, not a production-scale LP code.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::ot::TransportPlan;

const MAX_CELLS: usize = 10_000;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct BasisCell {
    row: usize,
    col: usize,
    flow: f64,
}

/// Minimum-cost coupling between `r` and `c` under `cost`.
///
/// Returns the optimal objective value and a vertex of the transport
/// polytope attaining it.
pub fn exact_ot(
    r: &Array1<f64>,
    c: &Array1<f64>,
    cost: &Array2<f64>,
) -> Result<(f64, TransportPlan)> {
    let m = r.len();
    let n = c.len();
    if cost.dim() != (m, n) {
        return Err(Error::data(format!(
            "cost matrix is {:?}, expected ({m}, {n})",
            cost.dim()
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::data("marginals must be nonempty"));
    }
    if m * n > MAX_CELLS {
        return Err(Error::data(format!(
            "instance has {} cells; the exact solver is capped at {MAX_CELLS}",
            m * n
        )));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("cost matrix has non-finite entries"));
    }
    if r.iter().chain(c.iter()).any(|&v| !(v >= 0.0)) {
        return Err(Error::data("marginals must be nonnegative"));
    }
    let sum_r: f64 = r.sum();
    let sum_c: f64 = c.sum();
    if (sum_r - sum_c).abs() > FEAS_TOL || sum_r <= 0.0 {
        return Err(Error::data(format!(
            "infeasible marginals: masses {sum_r} and {sum_c} differ"
        )));
    }

    // Work on normalized copies so both sides carry exactly unit mass.
    let supply: Vec<f64> = r.iter().map(|&v| v / sum_r).collect();
    let demand: Vec<f64> = c.iter().map(|&v| v / sum_c).collect();

    let mut basis = northwest_corner(&supply, &demand);
    debug_assert_eq!(basis.len(), m + n - 1);

    let max_cost = cost.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let opt_tol = 1e-12 * (1.0 + max_cost);

    // Dantzig's rule normally; Bland's rule after a pivot budget, which
    // guards against cycling on degenerate bases.
    let bland_after = 20 * (m + n).max(10);
    let pivot_cap = 200 * m * n + 1000;

    for pivot in 0..pivot_cap {
        let (u, v) = potentials(&basis, m, n, cost)?;

        let mut entering: Option<(usize, usize, f64)> = None;
        let bland = pivot >= bland_after;
        'scan: for i in 0..m {
            for j in 0..n {
                let reduced = cost[[i, j]] - u[i] - v[j];
                if reduced < -opt_tol {
                    match entering {
                        Some((_, _, best)) if !bland && reduced >= best => {}
                        Some(_) if bland => {}
                        _ => entering = Some((i, j, reduced)),
                    }
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            let plan = plan_from_basis(&basis, m, n, sum_r);
            let distance = (&plan * cost).sum();
            return Ok((
                distance,
                TransportPlan {
                    plan,
                    row_marginal: r.clone(),
                    col_marginal: c.clone(),
                },
            ));
        };

        pivot_basis(&mut basis, m, n, ei, ej)?;
    }

    Err(Error::numerical(
        "transportation simplex exceeded its pivot budget (possible cycling)",
    ))
}

/// Initial basic feasible solution walking from the top-left cell.
/// Produces exactly m + n - 1 cells, some possibly with zero flow.
fn northwest_corner(supply: &[f64], demand: &[f64]) -> Vec<BasisCell> {
    let m = supply.len();
    let n = demand.len();
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut basis = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let q;
        if s[i] <= d[j] {
            q = s[i];
            s[i] = 0.0;
            d[j] -= q;
        } else {
            q = d[j];
            d[j] = 0.0;
            s[i] -= q;
        }
        basis.push(BasisCell { row: i, col: j, flow: q });
        if i == m - 1 && j == n - 1 {
            break;
        }
        // Each step advances exactly one index, so the walk always ends at
        // (m-1, n-1) with m + n - 1 cells. At the grid edges the direction
        // is forced, which also absorbs floating-point residue in s or d.
        let advance_row = if j == n - 1 {
            true
        } else if i == m - 1 {
            false
        } else {
            s[i] == 0.0
        };
        if advance_row {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// Dual potentials (u, v) with u[0] = 0, solved by sweeping the basis tree.
fn potentials(
    basis: &[BasisCell],
    m: usize,
    n: usize,
    cost: &Array2<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    // Nodes: rows 0..m, then columns m..m+n.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (e, cell) in basis.iter().enumerate() {
        adj[cell.row].push(e);
        adj[m + cell.col].push(e);
    }
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut stack = vec![0usize];
    let mut visited = vec![false; m + n];
    visited[0] = true;
    while let Some(node) = stack.pop() {
        for &e in &adj[node] {
            let cell = &basis[e];
            let other = if node == cell.row { m + cell.col } else { cell.row };
            if visited[other] {
                continue;
            }
            visited[other] = true;
            if other >= m {
                v[other - m] = cost[[cell.row, cell.col]] - u[cell.row];
            } else {
                u[other] = cost[[cell.row, cell.col]] - v[cell.col];
            }
            stack.push(other);
        }
    }
    if visited.iter().any(|&x| !x) {
        return Err(Error::numerical("transportation basis is not a spanning tree"));
    }
    Ok((u, v))
}

/// Bring (ei, ej) into the basis: find the unique cycle it closes, shift
/// flow around it, and drop the blocking cell.
fn pivot_basis(
    basis: &mut Vec<BasisCell>,
    m: usize,
    n: usize,
    ei: usize,
    ej: usize,
) -> Result<()> {
    // Path from the entering row node to the entering column node.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (e, cell) in basis.iter().enumerate() {
        adj[cell.row].push(e);
        adj[m + cell.col].push(e);
    }
    let start = ei;
    let goal = m + ej;
    let mut parent_edge: Vec<Option<usize>> = vec![None; m + n];
    let mut parent_node: Vec<usize> = vec![usize::MAX; m + n];
    let mut visited = vec![false; m + n];
    visited[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for &e in &adj[node] {
            let cell = &basis[e];
            let other = if node == cell.row { m + cell.col } else { cell.row };
            if !visited[other] {
                visited[other] = true;
                parent_edge[other] = Some(e);
                parent_node[other] = node;
                queue.push_back(other);
            }
        }
    }
    if !visited[goal] {
        return Err(Error::numerical("entering cell closes no cycle"));
    }

    // Edges along the path, entering-cell side first. Signs alternate
    // starting with minus: the entering cell takes +theta.
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        let e = parent_edge[node].expect("path reconstruction");
        path.push(e);
        node = parent_node[node];
    }
    path.reverse();

    let mut theta = f64::INFINITY;
    let mut leaving: Option<usize> = None;
    for (idx, &e) in path.iter().enumerate() {
        if idx % 2 == 0 {
            // minus edge
            if basis[e].flow < theta {
                theta = basis[e].flow;
                leaving = Some(e);
            }
        }
    }
    let leaving = leaving.ok_or_else(|| Error::numerical("degenerate pivot without a leaving cell"))?;

    for (idx, &e) in path.iter().enumerate() {
        if idx % 2 == 0 {
            basis[e].flow -= theta;
        } else {
            basis[e].flow += theta;
        }
    }
    basis[leaving] = BasisCell {
        row: ei,
        col: ej,
        flow: theta,
    };
    Ok(())
}

fn plan_from_basis(basis: &[BasisCell], m: usize, n: usize, scale: f64) -> Array2<f64> {
    let mut plan = Array2::zeros((m, n));
    for cell in basis {
        // Degenerate pivots can leave -0.0 or underflow dust behind.
        plan[[cell.row, cell.col]] = cell.flow.max(0.0) * scale;
    }
    plan
}
