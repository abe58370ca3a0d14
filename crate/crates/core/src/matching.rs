//! Maximum-weight perfect matching on square gain matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, GainMatrix};

/// Largest matrix [`brute_force_match`] will enumerate (10! permutations).
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Default slack for [`is_anti_monge`].
pub const ANTI_MONGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub assignment: Assignment,
    pub total_weight: f64,
}

impl MatchResult {
    fn from_assignment(w: &GainMatrix, assignment: Assignment) -> Self {
        let total_weight = w.weight_of(&assignment);
        Self {
            assignment,
            total_weight,
        }
    }
}

fn check_square_finite(w: &GainMatrix) -> Result<()> {
    if !w.is_square() {
        return Err(Error::Dimension(format!(
            "gain matrix is {}x{}, expected square",
            w.rows(),
            w.cols()
        )));
    }
    for i in 0..w.rows() {
        if let Some(j) = w.row(i).iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("W[{i}][{j}] = {} is not finite", w.get(i, j))));
        }
    }
    Ok(())
}

/// Optimal assignment maximising `Σ_i W[i][σ(i)]`.
///
/// Shortest-augmenting-path Hungarian method with row/column potentials,
/// O(n³). Weights are negated into a minimisation problem internally.
pub fn hungarian_solve(w: &GainMatrix) -> Result<MatchResult> {
    check_square_finite(w)?;
    let n = w.rows();
    if n == 0 {
        return Ok(MatchResult {
            assignment: Assignment::identity(0),
            total_weight: 0.0,
        });
    }

    let cost = |i: usize, j: usize| -w.get(i, j);

    // 1-based with a virtual column 0; col_owner[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);

        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut mapping = vec![0usize; n];
    for j in 1..=n {
        mapping[col_owner[j] - 1] = j - 1;
    }
    Ok(MatchResult::from_assignment(
        w,
        Assignment::from_permutation_unchecked(mapping),
    ))
}

/// Exhaustive search over all permutations. Test oracle for [`hungarian_solve`].
pub fn brute_force_match(w: &GainMatrix) -> Result<MatchResult> {
    check_square_finite(w)?;
    let n = w.rows();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    // Heap's algorithm, iterative form.
    let mut perm: Vec<usize> = (0..n).collect();
    let weight = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| w.get(i, j)).sum::<f64>();
    let mut best = perm.clone();
    let mut best_weight = weight(&perm);
    let mut counters = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            let swap_with = if i % 2 == 0 { 0 } else { counters[i] };
            perm.swap(swap_with, i);
            let candidate = weight(&perm);
            if candidate > best_weight {
                best_weight = candidate;
                best.copy_from_slice(&perm);
            }
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }

    Ok(MatchResult::from_assignment(
        w,
        Assignment::from_permutation_unchecked(best),
    ))
}

/// True iff `W[i][j] + W[k][l] >= W[i][l] + W[k][j] - tol` for all `i < k`, `j < l`.
pub fn is_anti_monge(w: &GainMatrix, tol: f64) -> bool {
    let (rows, cols) = (w.rows(), w.cols());
    for i in 0..rows {
        for k in i + 1..rows {
            for j in 0..cols {
                for l in j + 1..cols {
                    if w.get(i, j) + w.get(k, l) < w.get(i, l) + w.get(k, j) - tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}
