//! Kernel DMD: EDMD in an implicit feature space through Gram matrices.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::decomposition::{Basis, KoopmanDecomposition, Method, Provenance, Rank};
use crate::dmd::resolve_rank;
use crate::error::{KoopmanError, Result};
use crate::linalg;
use crate::snapshots::SnapshotSet;

/// Largest inner product accepted by the exponential kernel.
pub const EXP_KERNEL_LIMIT: f64 = 700.0;

/// Relative cutoff on Gram eigenvalues (`σ² / σ₁²`) for automatic rank:
/// `m·ε`, the rounding level of a symmetric `m × m` eigensolver. Eigenvalues
/// below it cannot be told apart from zero.
pub fn gram_auto_rtol(m: usize) -> f64 {
    m.max(1) as f64 * f64::EPSILON
}

/// Positive-definite kernel `k(x, x̂) = ⟨ψ(x), ψ(x̂)⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Kernel {
    /// `(1 + xᵀx̂)^d`
    Polynomial { degree: u32 },
    /// `exp(xᵀx̂)`
    Exponential,
    /// `exp(−‖x − x̂‖² / σ²)`
    Gaussian { sigma: f64 },
    /// `exp(−‖x − x̂‖ / σ)`
    Laplacian { sigma: f64 },
    /// `xᵀx̂`; makes KDMD coincide with DMD.
    Linear,
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Polynomial { degree: 0 } => Err(KoopmanError::Domain("polynomial kernel degree must be positive".into())),
            Kernel::Gaussian { sigma } | Kernel::Laplacian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(KoopmanError::Domain(format!("kernel width sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value, or an overflow error located at `(row, col)`.
    fn eval_at(&self, x: &[f64], y: &[f64], row: usize, col: usize) -> Result<f64> {
        let dot = || x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let dist2 = || x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let value = match *self {
            Kernel::Polynomial { degree } => (1.0 + dot()).powi(degree as i32),
            Kernel::Exponential => {
                let d = dot();
                if d > EXP_KERNEL_LIMIT {
                    return Err(KoopmanError::KernelOverflow {
                        row,
                        col,
                        hint: format!(
                            "exponential kernel inner product {d:.3e} exceeds {EXP_KERNEL_LIMIT}; rescale the states toward unit magnitude"
                        ),
                    });
                }
                d.exp()
            }
            Kernel::Gaussian { sigma } => (-dist2() / (sigma * sigma)).exp(),
            Kernel::Laplacian { sigma } => (-dist2().sqrt() / sigma).exp(),
            Kernel::Linear => dot(),
        };
        if !value.is_finite() {
            return Err(KoopmanError::KernelOverflow {
                row,
                col,
                hint: format!("kernel {self} produced a non-finite value; rescale the states"),
            });
        }
        Ok(value)
    }

    pub fn eval(&self, x: &[f64], x_hat: &[f64]) -> Result<f64> {
        if x.len() != x_hat.len() {
            return Err(KoopmanError::Dimension(format!(
                "kernel arguments have dimensions {} and {}",
                x.len(),
                x_hat.len()
            )));
        }
        self.eval_at(x, x_hat, 0, 0)
    }

    /// `K[j, l] = k(aⱼ, b_l)` for columns of `a` and `b`.
    pub fn cross_gram(&self, a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if a.nrows() != b.nrows() {
            return Err(KoopmanError::Dimension(format!(
                "kernel arguments have dimensions {} and {}",
                a.nrows(),
                b.nrows()
            )));
        }
        let cols = |m: MatRef<'_, f64>| -> Vec<Vec<f64>> {
            (0..m.ncols()).map(|k| (0..m.nrows()).map(|i| m[(i, k)]).collect()).collect()
        };
        let (ca, cb) = (cols(a), cols(b));
        let mut out = Mat::<f64>::zeros(ca.len(), cb.len());
        for (j, x) in ca.iter().enumerate() {
            for (l, y) in cb.iter().enumerate() {
                out[(j, l)] = self.eval_at(x, y, j, l)?;
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Polynomial { degree } => write!(f, "poly:{degree}"),
            Kernel::Exponential => f.write_str("exp"),
            Kernel::Gaussian { sigma } => write!(f, "gauss:{sigma}"),
            Kernel::Laplacian { sigma } => write!(f, "laplace:{sigma}"),
            Kernel::Linear => f.write_str("linear"),
        }
    }
}

impl FromStr for Kernel {
    type Err = KoopmanError;

    /// `poly:<d>`, `exp`, `gauss:<σ>`, `laplace:<σ>` or `linear`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| KoopmanError::Domain(format!("kernel spec '{s}': {why}"));
        let (family, param) = match s.split_once(':') {
            Some((f, p)) => (f.trim().to_ascii_lowercase(), Some(p.trim())),
            None => (s.trim().to_ascii_lowercase(), None),
        };
        let real = |p: Option<&str>| -> Result<f64> {
            p.ok_or_else(|| bad("missing width parameter, e.g. gauss:1"))?
                .parse::<f64>()
                .map_err(|_| bad("width is not a number"))
        };
        let kernel = match family.as_str() {
            "poly" | "polynomial" => Kernel::Polynomial {
                degree: param
                    .ok_or_else(|| bad("missing degree, e.g. poly:5"))?
                    .parse()
                    .map_err(|_| bad("degree is not a positive integer"))?,
            },
            "exp" | "exponential" if param.is_none() => Kernel::Exponential,
            "gauss" | "gaussian" => Kernel::Gaussian { sigma: real(param)? },
            "laplace" | "laplacian" => Kernel::Laplacian { sigma: real(param)? },
            "linear" if param.is_none() => Kernel::Linear,
            _ => return Err(bad("expected poly:<d>, exp, gauss:<sigma>, laplace:<sigma> or linear")),
        };
        kernel.validate()?;
        Ok(kernel)
    }
}

/// `Ĝᵢⱼ = k(xᵢ, xⱼ)` and `Âᵢⱼ = k(xᵢ♯, xⱼ)`.
#[derive(Debug, Clone)]
pub struct GramPair {
    pub g_hat: Mat<f64>,
    pub a_hat: Mat<f64>,
}

pub fn gram_matrices(train: &SnapshotSet, kernel: &Kernel) -> Result<GramPair> {
    if train.is_empty() {
        return Err(KoopmanError::Size("training set is empty".into()));
    }
    kernel.validate()?;
    let g_hat = kernel.cross_gram(train.inputs(), train.inputs())?;
    let a_hat = kernel.cross_gram(train.images(), train.inputs())?;
    Ok(GramPair { g_hat, a_hat })
}

/// Eigendecomposition `Ĝ = Q Σ² Qᵀ`, descending, negatives clamped to zero.
fn gram_spectrum(g_hat: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = g_hat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| KoopmanError::Numerical(format!("Gram eigendecomposition failed: {e:?}")))?;
    let m = g_hat.nrows();
    let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let order: Vec<usize> = (0..m).rev().collect();
    let eig: Vec<f64> = order.iter().map(|&i| values[i].max(0.0)).collect();
    let q = Mat::from_fn(m, m, |i, j| evd.U()[(i, order[j])]);
    Ok((eig, q))
}

/// Kernel DMD.
///
/// With `Ĝ = QΣ²Qᵀ` truncated to rank `r`, the reduced operator is
/// `K̂ = Σ_r⁻¹ Q_rᵀ Âᵀ Q_r Σ_r⁻¹` and eigenfunctions are
/// `φᵢ(x) = w̃ᵢ* Σ_r⁻¹ Q_rᵀ k_x`. Modes come from a least-squares fit of the
/// training states against the eigenfunction values.
pub fn kdmd(train: &SnapshotSet, kernel: &Kernel, rank: Rank) -> Result<KoopmanDecomposition> {
    let gram = gram_matrices(train, kernel)?;
    let m = train.len();
    let (eig, q) = gram_spectrum(gram.g_hat.as_ref())?;
    let numerical_rank = linalg::numerical_rank(&eig, gram_auto_rtol(m));
    let mut warnings = Vec::new();
    let mut r = resolve_rank(rank, numerical_rank, m, &mut warnings)?;
    // A fixed rank may still reach exactly-zero Gram eigenvalues after clamping.
    while r > 0 && eig[r - 1] <= 0.0 {
        r -= 1;
    }
    if r == 0 {
        return Err(KoopmanError::RankZero);
    }
    let sigma_r: Vec<f64> = eig[..r].iter().map(|v| v.sqrt()).collect();
    let q_r = q.as_ref().subcols(0, r).to_owned();
    let mut reduced = q_r.transpose() * gram.a_hat.transpose() * &q_r;
    for i in 0..r {
        for j in 0..r {
            reduced[(i, j)] /= sigma_r[i] * sigma_r[j];
        }
    }
    let provenance = Provenance {
        requested_rank: rank,
        numerical_rank,
        training_pairs: m,
        state_dim: train.state_dim(),
        kernel: Some(kernel.to_string()),
        warnings,
        ..Provenance::default()
    };
    // Reduced coordinates of the training inputs: Σ_r⁻¹ Q_rᵀ Ĝ = Σ_r Q_rᵀ.
    let train_coords = Mat::from_fn(r, m, |i, j| sigma_r[i] * q_r[(j, i)]);
    let states = linalg::to_complex(train.inputs());
    KoopmanDecomposition::assemble(
        Method::Kdmd,
        reduced,
        Basis::Kernel {
            kernel: *kernel,
            inputs: train.inputs().to_owned(),
            q_r: q_r.clone(),
            sigma_r: sigma_r.clone(),
        },
        eig.iter().map(|v| v.sqrt()).collect(),
        provenance,
        |pairs| {
            // x_k ≈ Σᵢ φᵢ(x_k) bᵢ  ⇔  Φᵀ Bᵀ ≈ Xᵀ.
            let phi = &pairs.left * linalg::to_complex(train_coords.as_ref());
            let (bt, _) = linalg::lstsq_min_norm(phi.transpose(), states.transpose(), 1e-12)?;
            Ok(Mat::from_fn(states.nrows(), r, |i, j| bt[(j, i)]))
        },
    )
}

/// The reduced coordinates `Σ_r⁻¹ Q_rᵀ Ĝ` of the training inputs, for checks.
pub fn training_coordinates(dec: &KoopmanDecomposition) -> Option<Mat<f64>> {
    match &dec.basis {
        Basis::Kernel { q_r, sigma_r, .. } => Some(Mat::from_fn(sigma_r.len(), q_r.nrows(), |i, j| sigma_r[i] * q_r[(j, i)])),
        _ => None,
    }
}
