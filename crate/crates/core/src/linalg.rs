//! Dense linear-algebra helpers shared by the decomposition routines.
//!
//! Everything here is a thin layer over `faer`: thin SVDs with rank
//! selection, an eigendecomposition that returns matched right and left
//! eigenvectors in a deterministic order, and minimum-norm least squares for
//! complex mode matrices.

use faer::{c64, Mat, MatRef};

use crate::error::{KoopmanError, Result};

/// Relative singular-value cutoff used by automatic rank selection.
pub const AUTO_RANK_RTOL: f64 = 1e-10;

/// Two moduli closer than this (relative) are treated as equal when ordering.
const MODULUS_TIE_RTOL: f64 = 1e-12;

pub fn to_complex(m: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

pub fn frobenius(m: MatRef<'_, f64>) -> f64 {
    m.norm_l2()
}

pub fn frobenius_c(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

/// Thin SVD `A = U diag(s) Vᵀ` with singular values in nonincreasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

impl ThinSvd {
    pub fn compute(a: MatRef<'_, f64>) -> Result<Self> {
        let svd = a
            .thin_svd()
            .map_err(|e| KoopmanError::Numerical(format!("SVD did not converge: {e:?}")))?;
        let s = svd.S().column_vector().iter().copied().collect();
        Ok(ThinSvd {
            u: svd.U().to_owned(),
            s,
            v: svd.V().to_owned(),
        })
    }

    /// Number of singular values with `σᵢ / σ₁ > rtol`.
    pub fn numerical_rank(&self, rtol: f64) -> usize {
        numerical_rank(&self.s, rtol)
    }
}

pub fn numerical_rank(values: &[f64], rtol: f64) -> usize {
    let Some(&lead) = values.first() else {
        return 0;
    };
    if !(lead > 0.0) {
        return 0;
    }
    values.iter().take_while(|&&s| s / lead > rtol).count()
}

/// Eigendecomposition of a real square matrix with matched left eigenvectors.
///
/// Column `i` of `right` and row `i` of `left` are the right and left
/// eigenvectors for `eigenvalues[i]`, each with unit 2-norm. Ordering is by
/// modulus (descending), ties by imaginary part (descending).
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub eigenvalues: Vec<c64>,
    pub right: Mat<c64>,
    pub left: Mat<c64>,
    /// 2-norm condition number of the right eigenvector matrix.
    pub condition: f64,
    /// `‖A V − V diag(μ)‖_F / ‖A‖_F`.
    pub right_residual: f64,
    /// `‖W A − diag(μ) W‖_F / ‖A‖_F`.
    pub left_residual: f64,
    /// Largest `|w_i* v_j|` over `i ≠ j`, measuring loss of bi-orthogonality.
    pub biorthogonality_defect: f64,
}

impl EigenPairs {
    pub fn compute(a: MatRef<'_, f64>) -> Result<Self> {
        let r = a.nrows();
        if r != a.ncols() {
            return Err(KoopmanError::Dimension(format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if r == 0 {
            return Err(KoopmanError::RankZero);
        }
        let (mu, v) = eigen(a)?;
        let (lam, u) = eigen(a.transpose())?;

        let order = spectral_order(&mu);
        let eigenvalues: Vec<c64> = order.iter().map(|&i| mu[i]).collect();
        let mut right = Mat::<c64>::zeros(r, r);
        for (dst, &src) in order.iter().enumerate() {
            let norm = v.col(src).norm_l2();
            for row in 0..r {
                right[(row, dst)] = v[(row, src)] / norm;
            }
        }

        // Pair each right eigenvalue with the closest unused eigenvalue of Aᵀ;
        // near-ties go to the candidate with the strongest overlap w*v.
        let scale = a.norm_l2().max(f64::MIN_POSITIVE);
        let mut used = vec![false; r];
        let mut left = Mat::<c64>::zeros(r, r);
        for i in 0..r {
            let dist = |j: usize| (eigenvalues[i] - lam[j]).norm();
            let best = (0..r)
                .filter(|&j| !used[j])
                .map(dist)
                .fold(f64::INFINITY, f64::min);
            let window = best + 1e-9 * scale;
            let overlap = |j: usize| {
                let norm = u.col(j).norm_l2();
                let mut acc = c64::new(0.0, 0.0);
                for row in 0..r {
                    acc += u[(row, j)] * right[(row, i)];
                }
                acc.norm() / norm
            };
            let mut chosen = None;
            let mut chosen_overlap = -1.0;
            for j in (0..r).filter(|&j| !used[j] && dist(j) <= window) {
                let ov = overlap(j);
                if ov > chosen_overlap {
                    chosen_overlap = ov;
                    chosen = Some(j);
                }
            }
            let j = chosen.ok_or_else(|| {
                KoopmanError::Numerical("left/right eigenvalue matching failed".into())
            })?;
            used[j] = true;
            // Aᵀ u = λ u  ⇔  uᵀ A = λ uᵀ, so the left row vector is uᵀ.
            let norm = u.col(j).norm_l2();
            for col in 0..r {
                left[(i, col)] = u[(col, j)] / norm;
            }
        }

        let ac = to_complex(a);
        let diag = Mat::<c64>::from_fn(r, r, |i, j| if i == j { eigenvalues[i] } else { c64::new(0.0, 0.0) });
        let right_residual = frobenius_c((&ac * &right - &right * &diag).as_ref()) / scale;
        let left_residual = frobenius_c((&left * &ac - &diag * &left).as_ref()) / scale;
        let gram = &left * &right;
        let mut biorthogonality_defect = 0.0_f64;
        for i in 0..r {
            for j in 0..r {
                if i != j {
                    biorthogonality_defect = biorthogonality_defect.max(gram[(i, j)].norm());
                }
            }
        }
        let condition = condition_number(right.as_ref())?;

        Ok(EigenPairs {
            eigenvalues,
            right,
            left,
            condition,
            right_residual,
            left_residual,
            biorthogonality_defect,
        })
    }
}

fn eigen(a: MatRef<'_, f64>) -> Result<(Vec<c64>, Mat<c64>)> {
    let evd = a
        .eigen()
        .map_err(|e| KoopmanError::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok((values, evd.U().to_owned()))
}

/// Permutation that orders eigenvalues by modulus (descending), with moduli
/// equal to within a relative 1e-12 ordered by imaginary part (descending).
pub fn spectral_order(values: &[c64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].norm().total_cmp(&values[a].norm()).then(a.cmp(&b)));
    let mut start = 0;
    while start < idx.len() {
        let head = values[idx[start]].norm();
        let mut end = start + 1;
        while end < idx.len() && head - values[idx[end]].norm() <= MODULUS_TIE_RTOL * head.max(f64::MIN_POSITIVE) {
            end += 1;
        }
        idx[start..end].sort_by(|&a, &b| values[b].im.total_cmp(&values[a].im).then(a.cmp(&b)));
        start = end;
    }
    idx
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: MatRef<'_, c64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(1.0);
    }
    let s = m
        .singular_values()
        .map_err(|e| KoopmanError::Numerical(format!("SVD did not converge: {e:?}")))?;
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}

/// Minimum-norm least-squares solution of `A X = B` for complex `A`.
///
/// Singular values below `rtol · σ₁` are discarded. The flag reports whether
/// any were discarded (i.e. `A` was rank deficient to that tolerance).
pub fn lstsq_min_norm(a: MatRef<'_, c64>, b: MatRef<'_, c64>, rtol: f64) -> Result<(Mat<c64>, bool)> {
    if a.nrows() != b.nrows() {
        return Err(KoopmanError::Dimension(format!(
            "least squares: A has {} rows but right-hand side has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let svd = a
        .thin_svd()
        .map_err(|e| KoopmanError::Numerical(format!("SVD did not converge: {e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let keep = numerical_rank(&s, rtol);
    let deficient = keep < a.ncols();
    let u = svd.U().subcols(0, keep);
    let v = svd.V().subcols(0, keep);
    let mut coeffs = u.adjoint() * b;
    for i in 0..keep {
        for j in 0..coeffs.ncols() {
            coeffs[(i, j)] /= s[i];
        }
    }
    Ok((v * coeffs, deficient))
}

/// Minimum-norm least-squares for a real system; see [`lstsq_min_norm`].
pub fn pinv_apply(a: &ThinSvd, b: MatRef<'_, f64>, rank: usize) -> Mat<f64> {
    let u = a.u.as_ref().subcols(0, rank);
    let v = a.v.as_ref().subcols(0, rank);
    let mut coeffs = u.transpose() * b;
    for i in 0..rank {
        for j in 0..coeffs.ncols() {
            coeffs[(i, j)] /= a.s[i];
        }
    }
    v * coeffs
}
