//! Max-weight one-to-one assignment on dense similarity matrices.
//!
//! Shortest-augmenting-path Hungarian method with row/column potentials,
//! `O(n² m)` for an `n × m` matrix with `n ≤ m` (taller matrices are solved
//! transposed). Weights are expected to be nonnegative similarities, so an
//! optimal matching of size `min(n, m)` always exists; zero-weight pairs are
//! returned like any other and left to the caller's gating.

use nalgebra::DMatrix;

/// Returns `(row, col)` pairs of a maximum-total-weight matching, sorted by row.
pub fn max_weight_matching(weights: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (rows, cols) = weights.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let mut pairs = if rows <= cols {
        hungarian_min(rows, cols, |i, j| -weights[(i, j)])
    } else {
        hungarian_min(cols, rows, |i, j| -weights[(j, i)])
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.sort_unstable();
    pairs
}

/// Minimum-cost assignment of every row to a distinct column (`n ≤ m`).
fn hungarian_min(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    debug_assert!(n <= m);
    // 1-based with a virtual row/column 0, as in the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut min_slack = vec![0.0; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect()
}

/// Sum of weights over `pairs`, accumulated in row order.
pub fn total_weight(weights: &DMatrix<f64>, pairs: &[(usize, usize)]) -> f64 {
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    sorted.iter().map(|&(r, c)| weights[(r, c)]).sum()
}
