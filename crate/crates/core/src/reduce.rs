//! Reproducible summation.
//!
//! Parallel stages collect their per-item results into a vector in input
//! order and then fold them with a fixed pairwise tree, so the rounding
//! pattern of a sum never depends on how many worker threads produced the
//! terms.

use rayon::prelude::*;

const LEAF: usize = 8;

/// Pairwise (cascade) sum with a fixed split rule.
pub fn tree_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    tree_sum(&values[..mid]) + tree_sum(&values[mid..])
}

/// Parallel map over `items` followed by [`tree_sum`].
pub fn par_tree_sum<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    let terms: Vec<f64> = items.par_iter().map(f).collect();
    tree_sum(&terms)
}

/// Parallel map over an index range, results kept in index order.
pub fn par_map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Component-wise tree sum of equally sized rows.
pub fn tree_sum_columns(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut column = Vec::with_capacity(rows.len());
    (0..width)
        .map(|c| {
            column.clear();
            column.extend(rows.iter().map(|r| r[c]));
            tree_sum(&column)
        })
        .collect()
}
