//! Standard and total-least-squares DMD on raw states.

use faer::{Mat, MatRef};

use crate::decomposition::{Basis, KoopmanDecomposition, Method, Provenance, Rank};
use crate::error::{KoopmanError, Result};
use crate::linalg::{self, ThinSvd, AUTO_RANK_RTOL};
use crate::snapshots::SnapshotSet;

/// Output of the projected-DMD core shared by DMD, TDMD and EDMD.
pub(crate) struct ReducedFit {
    pub u_r: Mat<f64>,
    pub reduced: Mat<f64>,
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
    pub warnings: Vec<String>,
}

/// Chooses the working rank given the requested one and the numerical rank.
pub(crate) fn resolve_rank(
    requested: Rank,
    numerical_rank: usize,
    max_rank: usize,
    warnings: &mut Vec<String>,
) -> Result<usize> {
    if numerical_rank == 0 {
        return Err(KoopmanError::RankZero);
    }
    match requested {
        Rank::Auto => Ok(numerical_rank),
        Rank::Fixed(0) => Err(KoopmanError::Size("rank must be at least 1".into())),
        Rank::Fixed(r) if r > max_rank => Err(KoopmanError::Size(format!(
            "rank {r} exceeds min(feature dimension, m) = {max_rank}"
        ))),
        Rank::Fixed(r) if r > numerical_rank => {
            warnings.push(format!(
                "requested rank {r} exceeds numerical rank {numerical_rank}; truncated to {numerical_rank}"
            ));
            Ok(numerical_rank)
        }
        Rank::Fixed(r) => Ok(r),
    }
}

/// Steps 1–3 of projected DMD: `Y = UΣVᵀ`, truncate, `Ã = U_rᵀ Y♯ V_r Σ_r⁻¹`.
pub(crate) fn reduced_fit(y: MatRef<'_, f64>, y_sharp: MatRef<'_, f64>, rank: Rank) -> Result<ReducedFit> {
    if y.ncols() == 0 {
        return Err(KoopmanError::Size("training set is empty".into()));
    }
    let svd = ThinSvd::compute(y)?;
    let numerical_rank = svd.numerical_rank(AUTO_RANK_RTOL);
    let mut warnings = Vec::new();
    let r = resolve_rank(rank, numerical_rank, y.nrows().min(y.ncols()), &mut warnings)?;
    let u_r = svd.u.as_ref().subcols(0, r).to_owned();
    let v_r = svd.v.as_ref().subcols(0, r);
    let mut reduced = u_r.transpose() * y_sharp * v_r;
    for j in 0..r {
        let s = svd.s[j];
        for i in 0..r {
            reduced[(i, j)] /= s;
        }
    }
    Ok(ReducedFit {
        u_r,
        reduced,
        singular_values: svd.s,
        numerical_rank,
        warnings,
    })
}

fn decompose_states(method: Method, y: MatRef<'_, f64>, y_sharp: MatRef<'_, f64>, rank: Rank, pairs: usize) -> Result<KoopmanDecomposition> {
    let fit = reduced_fit(y, y_sharp, rank)?;
    let provenance = Provenance {
        requested_rank: rank,
        numerical_rank: fit.numerical_rank,
        training_pairs: pairs,
        state_dim: y.nrows(),
        warnings: fit.warnings,
        ..Provenance::default()
    };
    let u_c = linalg::to_complex(fit.u_r.as_ref());
    KoopmanDecomposition::assemble(
        method,
        fit.reduced,
        Basis::Projection { u_r: fit.u_r },
        fit.singular_values,
        provenance,
        |pairs| Ok(&u_c * &pairs.right),
    )
}

/// Projected DMD; modes are `vᵢ = U_r ṽᵢ`.
pub fn dmd(train: &SnapshotSet, rank: Rank) -> Result<KoopmanDecomposition> {
    decompose_states(Method::Dmd, train.inputs(), train.images(), rank, train.len())
}

/// Total-least-squares DMD: project `Y` and `Y♯` onto the leading `r` right
/// singular vectors of the stacked matrix `[Y; Y♯]`, then run DMD at rank `r`.
pub fn tdmd(train: &SnapshotSet, rank: Rank) -> Result<KoopmanDecomposition> {
    if train.is_empty() {
        return Err(KoopmanError::Size("training set is empty".into()));
    }
    let (n, m) = (train.state_dim(), train.len());
    let stacked = Mat::from_fn(2 * n, m, |i, k| {
        if i < n {
            train.inputs()[(i, k)]
        } else {
            train.images()[(i - n, k)]
        }
    });
    let svd = ThinSvd::compute(stacked.as_ref())?;
    let numerical_rank = svd.numerical_rank(AUTO_RANK_RTOL);
    let mut warnings = Vec::new();
    let r = resolve_rank(rank, numerical_rank, n.min(m), &mut warnings)?;
    let v_r = svd.v.as_ref().subcols(0, r);
    let projector = v_r * v_r.transpose();
    let y = train.inputs() * &projector;
    let y_sharp = train.images() * &projector;
    let mut dec = decompose_states(Method::Tdmd, y.as_ref(), y_sharp.as_ref(), Rank::Fixed(r), m)?;
    dec.provenance.requested_rank = rank;
    warnings.append(&mut dec.provenance.warnings);
    dec.provenance.warnings = warnings;
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::c64;

    #[test]
    fn diagonal_system_spectrum() {
        // Columns spanning R² under A = diag(0.9, 0.5).
        let mut series = Mat::<f64>::zeros(2, 21);
        series[(0, 0)] = 1.0;
        series[(1, 0)] = 1.0;
        for k in 1..21 {
            series[(0, k)] = 0.9 * series[(0, k - 1)];
            series[(1, k)] = 0.5 * series[(1, k - 1)];
        }
        let set = SnapshotSet::from_sequence(series.as_ref(), None).unwrap();
        let dec = dmd(&set, Rank::Auto).unwrap();
        assert_eq!(dec.rank, 2);
        assert!((dec.eigenvalues[0] - c64::new(0.9, 0.0)).norm() < 1e-10);
        assert!((dec.eigenvalues[1] - c64::new(0.5, 0.0)).norm() < 1e-10);
        assert!(dec.provenance.residual < 1e-10);
    }

    #[test]
    fn fixed_point_pair_has_unit_eigenvalue() {
        let a = Mat::<f64>::from_fn(3, 1, |i, _| [1.0, -2.0, 0.5][i]);
        let set = SnapshotSet::new(a.clone(), a).unwrap();
        let dec = dmd(&set, Rank::Fixed(1)).unwrap();
        assert!((dec.eigenvalues[0] - c64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_data_is_rank_zero() {
        let z = Mat::<f64>::zeros(3, 4);
        let set = SnapshotSet::new(z.clone(), z).unwrap();
        assert!(matches!(dmd(&set, Rank::Auto), Err(KoopmanError::RankZero)));
    }

    #[test]
    fn excessive_rank_is_truncated_with_warning() {
        let a = Mat::<f64>::from_fn(3, 1, |i, _| (i + 1) as f64);
        let x = Mat::<f64>::from_fn(3, 3, |i, j| a[(i, 0)] * (j + 1) as f64);
        let set = SnapshotSet::new(x.clone(), x).unwrap();
        let dec = dmd(&set, Rank::Fixed(3)).unwrap();
        assert_eq!(dec.rank, 1);
        assert!(!dec.provenance.warnings.is_empty());
        assert!(matches!(dmd(&set, Rank::Fixed(4)), Err(KoopmanError::Size(_))));
    }

    #[test]
    fn rank_one_eigenfunction_is_a_projection() {
        let a = [3.0, 4.0];
        let x = Mat::<f64>::from_fn(2, 1, |i, _| a[i]);
        let set = SnapshotSet::new(x.clone(), x).unwrap();
        let dec = dmd(&set, Rank::Fixed(1)).unwrap();
        assert!(dec.eigenfunction_eval(0, &a).unwrap().norm() > 1.0);
        assert!(dec.eigenfunction_eval(0, &[-4.0, 3.0]).unwrap().norm() < 1e-14);
        assert!(matches!(
            dec.eigenfunction_eval(1, &a),
            Err(KoopmanError::IndexOutOfRange { .. })
        ));
    }
}
