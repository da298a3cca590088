#![allow(dead_code)]

use koopman_core::{c64, Mat, MatRef};

/// Largest relative distance between two eigenvalue multisets after greedy
/// nearest matching. Panics when the lengths differ.
pub fn spectrum_distance(expected: &[c64], actual: &[c64]) -> f64 {
    assert_eq!(expected.len(), actual.len(), "spectra differ in length");
    let mut used = vec![false; actual.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let (j, d) = actual
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, a)| (j, (a - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d / e.norm().max(1e-300));
    }
    worst
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs())).unwrap();
        for j in 0..n {
            let t = m[(col, j)];
            m[(col, j)] = m[(pivot, j)];
            m[(pivot, j)] = t;
        }
        for j in 0..x.ncols() {
            let t = x[(col, j)];
            x[(col, j)] = x[(pivot, j)];
            x[(pivot, j)] = t;
        }
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            for j in col..n {
                m[(i, j)] -= f * m[(col, j)];
            }
            for j in 0..x.ncols() {
                x[(i, j)] -= f * x[(col, j)];
            }
        }
    }
    for col in (0..n).rev() {
        for j in 0..x.ncols() {
            let mut s = x[(col, j)];
            for k in col + 1..n {
                s -= m[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = s / m[(col, col)];
        }
    }
    x
}

/// `A = Y♯Y⁺` for `Y` with full row rank, via `(YYᵀ) Aᵀ = Y Y♯ᵀ`.
pub fn direct_operator(y: MatRef<'_, f64>, y_sharp: MatRef<'_, f64>) -> Mat<f64> {
    let gram = y * y.transpose();
    let rhs = y * y_sharp.transpose();
    solve(gram.as_ref(), rhs.as_ref()).transpose().to_owned()
}

pub fn eigenvalues(a: MatRef<'_, f64>) -> Vec<c64> {
    a.eigen().unwrap().S().column_vector().iter().copied().collect()
}

/// Index of the entry of `values` nearest to `target`.
pub fn nearest(values: &[c64], target: c64) -> usize {
    (0..values.len())
        .min_by(|&a, &b| (values[a] - target).norm().total_cmp(&(values[b] - target).norm()))
        .unwrap()
}
