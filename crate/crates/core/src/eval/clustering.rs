//! Document clustering metrics: top-topic assignment, purity, and
//! normalized mutual information.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Cluster each document by its most significant topic (argmax per column,
/// ties to the lowest topic index).
pub fn top_topic_assign(z: &Array2<f64>) -> Vec<u32> {
    z.columns()
        .into_iter()
        .map(|col| {
            let mut best = 0usize;
            let mut best_val = f64::NEG_INFINITY;
            for (i, &v) in col.iter().enumerate() {
                if v > best_val {
                    best_val = v;
                    best = i;
                }
            }
            best as u32
        })
        .collect()
}

fn check_lengths(assignment: &[u32], labels: &[u32]) -> Result<usize> {
    if assignment.len() != labels.len() {
        return Err(Error::data(format!(
            "{} assignments for {} labels",
            assignment.len(),
            labels.len()
        )));
    }
    if assignment.is_empty() {
        return Err(Error::data("clustering metrics need at least one document"));
    }
    Ok(assignment.len())
}

/// Fraction of documents whose cluster's majority class matches their label.
pub fn purity(assignment: &[u32], labels: &[u32]) -> Result<f64> {
    let n = check_lengths(assignment, labels)?;
    let mut per_cluster: HashMap<u32, HashMap<u32, usize>> = HashMap::new();
    for (&c, &l) in assignment.iter().zip(labels.iter()) {
        *per_cluster.entry(c).or_default().entry(l).or_insert(0) += 1;
    }
    let majority_total: usize = per_cluster
        .values()
        .map(|classes| classes.values().copied().max().unwrap_or(0))
        .sum();
    Ok(majority_total as f64 / n as f64)
}

/// Mutual information normalized by the geometric mean of the entropies.
/// When both partitions are degenerate the value is 1 if they are the same
/// partition and 0 otherwise.
pub fn nmi(assignment: &[u32], labels: &[u32]) -> Result<f64> {
    let n = check_lengths(assignment, labels)?;
    let nf = n as f64;

    let mut joint: HashMap<(u32, u32), usize> = HashMap::new();
    let mut cluster_count: HashMap<u32, usize> = HashMap::new();
    let mut class_count: HashMap<u32, usize> = HashMap::new();
    for (&c, &l) in assignment.iter().zip(labels.iter()) {
        *joint.entry((c, l)).or_insert(0) += 1;
        *cluster_count.entry(c).or_insert(0) += 1;
        *class_count.entry(l).or_insert(0) += 1;
    }

    let entropy = |counts: &HashMap<u32, usize>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let h_a = entropy(&cluster_count);
    let h_l = entropy(&class_count);

    let mut mi = 0.0;
    for (&(c, l), &count) in &joint {
        let p = count as f64 / nf;
        let pc = cluster_count[&c] as f64 / nf;
        let pl = class_count[&l] as f64 / nf;
        mi += p * (p / (pc * pl)).ln();
    }

    let denom = (h_a * h_l).sqrt();
    if denom == 0.0 {
        // At least one side is a single block; the partitions agree exactly
        // when both are.
        let identical = cluster_count.len() == 1 && class_count.len() == 1;
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}
