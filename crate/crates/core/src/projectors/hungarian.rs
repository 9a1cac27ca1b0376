//! Exact linear assignment with a deterministic tie-break.
//!
//! The solver is the classical O(m^3) shortest-augmenting-path scheme with
//! dual potentials.  On top of the optimal value we canonicalize the
//! assignment itself: among all optimal assignments the returned one is the
//! lexicographically smallest when read as (row 0's column, row 1's column,
//! ...).  Canonicalization works on the tight subgraph, the edges whose
//! reduced cost is zero at the optimal duals; every perfect matching there is
//! optimal, so rows can greedily grab their smallest feasible tight column.

use nalgebra::DMatrix;

use crate::consistency::PartialPerm;
use crate::{from_f64, Error, Real, Result};

/// Best full assignment of rows to columns of a square profit matrix.
/// `maximize` selects the sense; ties are broken lexicographically by row.
pub fn hungarian<T: Real>(profit: &DMatrix<T>, maximize: bool) -> Result<PartialPerm> {
    let m = profit.nrows();
    if m == 0 || profit.ncols() != m {
        return Err(Error::Dimension(format!(
            "assignment needs a nonempty square matrix, got {} x {}",
            profit.nrows(),
            profit.ncols()
        )));
    }
    if profit.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("assignment matrix has non-finite entries".into()));
    }
    let cost: DMatrix<T> = if maximize { -profit } else { profit.clone() };
    let (col_to_row, u, v) = solve_min(&cost);

    let mut row_to_col = vec![0usize; m];
    for (c, &r) in col_to_row.iter().enumerate() {
        row_to_col[r] = c;
    }

    // Reduced costs of optimal edges vanish up to rounding; the tolerance is
    // relative to the magnitude of the inputs.
    let scale = cost.iter().fold(T::one(), |acc, x| if x.abs() > acc { x.abs() } else { acc });
    let tol = from_f64::<T>(1e-9) * scale;
    let tight: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..m).filter(|&j| (cost[(i, j)] - u[i] - v[j]).abs() <= tol).collect())
        .collect();

    lexicographic_refine(&tight, &mut row_to_col);
    PartialPerm::from_full(row_to_col)
}

/// Jonker-Volgenant style primal-dual solve, minimization sense.  Returns the
/// column-to-row assignment and the dual potentials; matched edges satisfy
/// cost[i][j] = u[i] + v[j].
fn solve_min<T: Real>(cost: &DMatrix<T>) -> (Vec<usize>, Vec<T>, Vec<T>) {
    let m = cost.nrows();
    let inf = from_f64::<T>(f64::INFINITY);
    let none = usize::MAX;
    let mut u = vec![T::zero(); m];
    let mut v = vec![T::zero(); m + 1];
    // p[j] = row currently assigned to column j; slot m is a virtual column
    // holding the row being inserted.
    let mut p = vec![none; m + 1];
    for i in 0..m {
        p[m] = i;
        let mut j0 = m;
        let mut minv = vec![inf; m + 1];
        let mut way = vec![m; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = m;
            for j in 0..m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0, j)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == none {
                break;
            }
        }
        // Walk the alternating tree backwards, shifting assignments.
        while j0 != m {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }
    p.truncate(m);
    v.truncate(m);
    (p, u, v)
}

/// Rewrites the matching into the lexicographically smallest perfect matching
/// of the tight subgraph.  Row by row, each row tries its tight columns in
/// ascending order and keeps the first one that still lets every later row be
/// matched; earlier rows are frozen.
fn lexicographic_refine(tight: &[Vec<usize>], row_to_col: &mut [usize]) {
    let m = tight.len();
    let mut col_to_row = vec![usize::MAX; m];
    for (r, &c) in row_to_col.iter().enumerate() {
        col_to_row[c] = r;
    }
    for i in 0..m {
        for &c in &tight[i] {
            if c >= row_to_col[i] {
                break;
            }
            let owner = col_to_row[c];
            if owner < i {
                continue;
            }
            // Tentatively hand column c to row i and try to rehome the
            // displaced row using only columns that are not frozen.
            let saved_rows = row_to_col.to_vec();
            let saved_cols = col_to_row.clone();
            col_to_row[row_to_col[i]] = usize::MAX;
            row_to_col[i] = c;
            col_to_row[c] = i;
            let mut visited = vec![false; m];
            visited[c] = true;
            for &fc in &row_to_col[..i] {
                visited[fc] = true;
            }
            if augment(owner, tight, row_to_col, &mut col_to_row, &mut visited, i) {
                break;
            }
            row_to_col.copy_from_slice(&saved_rows);
            col_to_row = saved_cols;
        }
    }
}

fn augment(
    row: usize,
    tight: &[Vec<usize>],
    row_to_col: &mut [usize],
    col_to_row: &mut [usize],
    visited: &mut [bool],
    frozen_below: usize,
) -> bool {
    for &c in &tight[row] {
        if visited[c] {
            continue;
        }
        visited[c] = true;
        let owner = col_to_row[c];
        if owner == usize::MAX
            || (owner > frozen_below
                && augment(owner, tight, row_to_col, col_to_row, visited, frozen_below))
        {
            row_to_col[row] = c;
            col_to_row[c] = row;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn permutations(m: usize) -> Vec<Vec<usize>> {
        fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if rest.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for k in 0..rest.len() {
                let x = rest.remove(k);
                prefix.push(x);
                rec(prefix, rest, out);
                prefix.pop();
                rest.insert(k, x);
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut (0..m).collect(), &mut out);
        out
    }

    /// Lexicographically smallest argmax over all m! assignments.
    fn brute_best(profit: &DMatrix<f64>, maximize: bool) -> Vec<usize> {
        let m = profit.nrows();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for perm in permutations(m) {
            let mut total: f64 = (0..m).map(|i| profit[(i, perm[i])]).sum();
            if !maximize {
                total = -total;
            }
            let better = match &best {
                None => true,
                Some((b, _)) => total > *b,
            };
            if better {
                best = Some((total, perm));
            }
        }
        best.unwrap().1
    }

    fn assignment(p: &PartialPerm, m: usize) -> Vec<usize> {
        (0..m).map(|i| p.apply(i).unwrap()).collect()
    }

    #[test]
    fn matches_exhaustive_search_on_random_matrices() {
        let mut rng = StdRng::seed_from_u64(41);
        for case in 0..300 {
            let m = rng.random_range(1..=6);
            let mat = DMatrix::from_fn(m, m, |_, _| rng.random_range(-5.0..5.0));
            let maximize = case % 2 == 0;
            let got = hungarian(&mat, maximize).unwrap();
            assert_eq!(assignment(&got, m), brute_best(&mat, maximize), "case {case}: {mat}");
        }
    }

    #[test]
    fn matches_exhaustive_search_under_heavy_ties() {
        let mut rng = StdRng::seed_from_u64(42);
        for case in 0..200 {
            let m = rng.random_range(2..=5);
            let mat = DMatrix::from_fn(m, m, |_, _| rng.random_range(0..3) as f64);
            let got = hungarian(&mat, true).unwrap();
            assert_eq!(assignment(&got, m), brute_best(&mat, true), "case {case}: {mat}");
        }
    }

    #[test]
    fn tie_break_picks_smallest_columns_first() {
        // every assignment of a constant matrix is optimal
        let flat = DMatrix::from_element(4, 4, 7.0);
        assert_eq!(assignment(&hungarian(&flat, true).unwrap(), 4), vec![0, 1, 2, 3]);
        // two optimal assignments, identity is lexicographically smaller
        let two = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(assignment(&hungarian(&two, true).unwrap(), 2), vec![0, 1]);
    }

    #[test]
    fn minimize_sense() {
        let mat = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert_eq!(assignment(&hungarian(&mat, false).unwrap(), 2), vec![0, 1]);
        assert_eq!(assignment(&hungarian(&mat, true).unwrap(), 2), vec![1, 0]);
    }

    #[test]
    fn single_cell() {
        let mat = DMatrix::from_element(1, 1, -3.0);
        assert_eq!(assignment(&hungarian(&mat, true).unwrap(), 1), vec![0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(hungarian(&DMatrix::<f64>::zeros(2, 3), true).is_err());
        assert!(hungarian(&DMatrix::<f64>::zeros(0, 0), true).is_err());
        let nan = DMatrix::from_element(2, 2, f64::NAN);
        assert!(hungarian(&nan, true).is_err());
    }
}
