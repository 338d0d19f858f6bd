//! Lloyd's algorithm with distance-weighted seeding over document
//! representations (columns are points).

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

fn sq_dist(a: &Array2<f64>, i: usize, centers: &Array2<f64>, c: usize) -> f64 {
    let mut s = 0.0;
    for r in 0..a.nrows() {
        let d = a[[r, i]] - centers[[r, c]];
        s += d * d;
    }
    s
}

/// Cluster the columns of `points` into `k` groups. Deterministic for a
/// fixed seed: weighted seeding, lowest-index tie-breaks, and empty
/// clusters re-seeded from the farthest point.
pub fn kmeans(points: &Array2<f64>, k: usize, seed_root: u64, max_iter: usize) -> Result<Vec<u32>> {
    let n = points.ncols();
    let dim = points.nrows();
    if k == 0 {
        return Err(Error::data("k must be positive"));
    }
    if k > n {
        return Err(Error::data(format!("k = {k} exceeds the {n} points")));
    }

    let mut rng = seed::rng(seed_root, "eval/kmeans");
    let mut centers = Array2::zeros((dim, k));

    // Distance-weighted seeding: first center uniform, the rest drawn with
    // probability proportional to the squared distance to the chosen set.
    let first = rng.random_range(0..n);
    centers.column_mut(0).assign(&points.column(first));
    let mut min_d2: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in min_d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // All remaining mass sits on already-chosen points; take the
            // first index not yet used as a center.
            let mut chosen = 0;
            'outer: for i in 0..n {
                for prev in 0..c {
                    if sq_dist(points, i, &centers, prev) == 0.0 {
                        continue 'outer;
                    }
                }
                chosen = i;
                break;
            }
            chosen
        };
        centers.column_mut(c).assign(&points.column(pick));
        for i in 0..n {
            min_d2[i] = min_d2[i].min(sq_dist(points, i, &centers, c));
        }
    }

    let mut assignment = vec![0u32; n];
    for _ in 0..max_iter.max(1) {
        // Assign.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(points, i, &centers, c);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best as u32 {
                assignment[i] = best as u32;
                changed = true;
            }
        }

        // Update.
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((dim, k));
        for i in 0..n {
            let c = assignment[i] as usize;
            counts[c] += 1;
            for r in 0..dim {
                sums[[r, c]] += points[[r, i]];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed from the point farthest from its own center.
                let mut far = 0usize;
                let mut far_d = -1.0;
                for i in 0..n {
                    let d = sq_dist(points, i, &centers, assignment[i] as usize);
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                centers.column_mut(c).assign(&points.column(far));
                assignment[far] = c as u32;
                changed = true;
            } else {
                for r in 0..dim {
                    centers[[r, c]] = sums[[r, c]] / counts[c] as f64;
                }
            }
        }

        if !changed {
            break;
        }
    }
    Ok(assignment)
}
