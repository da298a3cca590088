//! The result type shared by every decomposition method, with eigenfunction
//! evaluation, prediction, amplitudes and continuous-time conversion.

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::edmd::Dictionary;
use crate::error::{KoopmanError, Result};
use crate::kdmd::Kernel;
use crate::linalg::{self, EigenPairs};
use crate::serde_mat;
use crate::snapshots::SnapshotSet;

/// Singular values below this fraction of the largest are ignored when
/// projecting states onto modes.
const PROJECTION_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dmd,
    Tdmd,
    Edmd,
    Kdmd,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dmd => "dmd",
            Method::Tdmd => "tdmd",
            Method::Edmd => "edmd",
            Method::Kdmd => "kdmd",
        })
    }
}

impl FromStr for Method {
    type Err = KoopmanError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dmd" => Ok(Method::Dmd),
            "tdmd" => Ok(Method::Tdmd),
            "edmd" => Ok(Method::Edmd),
            "kdmd" => Ok(Method::Kdmd),
            other => Err(KoopmanError::Domain(format!(
                "unknown method '{other}' (expected dmd, tdmd, edmd or kdmd)"
            ))),
        }
    }
}

/// Truncation rank: explicit, or chosen from the singular-value decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    #[default]
    Auto,
    Fixed(usize),
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Auto => f.write_str("auto"),
            Rank::Fixed(r) => write!(f, "{r}"),
        }
    }
}

impl FromStr for Rank {
    type Err = KoopmanError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Rank::Auto);
        }
        s.parse::<usize>()
            .map(Rank::Fixed)
            .map_err(|_| KoopmanError::Domain(format!("rank must be a count or 'auto', got '{s}'")))
    }
}

impl From<usize> for Rank {
    fn from(r: usize) -> Self {
        Rank::Fixed(r)
    }
}

/// What an eigenfunction evaluation needs besides the left eigenvectors:
/// the map from a state to reduced coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Basis {
    /// `x ↦ U_rᵀ x` (DMD, TDMD).
    Projection {
        #[serde(with = "serde_mat::real")]
        u_r: Mat<f64>,
    },
    /// `x ↦ U_rᵀ ψ(x)` (EDMD).
    Dictionary {
        dictionary: Dictionary,
        #[serde(with = "serde_mat::real")]
        u_r: Mat<f64>,
    },
    /// `x ↦ Σ_r⁻¹ Q_rᵀ k_x` with `(k_x)ⱼ = k(xⱼ, x)` (KDMD).
    Kernel {
        kernel: Kernel,
        #[serde(with = "serde_mat::real")]
        inputs: Mat<f64>,
        #[serde(with = "serde_mat::real")]
        q_r: Mat<f64>,
        sigma_r: Vec<f64>,
    },
}

impl Basis {
    pub fn state_dim(&self) -> usize {
        match self {
            Basis::Projection { u_r } => u_r.nrows(),
            Basis::Dictionary { dictionary, .. } => dictionary.state_dim(),
            Basis::Kernel { inputs, .. } => inputs.nrows(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Basis::Projection { u_r } | Basis::Dictionary { u_r, .. } => u_r.ncols(),
            Basis::Kernel { sigma_r, .. } => sigma_r.len(),
        }
    }

    /// Reduced coordinates (r × k) of the states stored as columns.
    pub fn reduce(&self, states: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if states.nrows() != self.state_dim() {
            return Err(KoopmanError::Dimension(format!(
                "states have dimension {} but the decomposition expects {}",
                states.nrows(),
                self.state_dim()
            )));
        }
        match self {
            Basis::Projection { u_r } => Ok(u_r.transpose() * states),
            Basis::Dictionary { dictionary, u_r } => {
                let lifted = dictionary.lift_states(states)?;
                Ok(u_r.transpose() * &lifted)
            }
            Basis::Kernel {
                kernel,
                inputs,
                q_r,
                sigma_r,
            } => {
                let k_x = kernel.cross_gram(inputs.as_ref(), states)?;
                let mut reduced = q_r.transpose() * &k_x;
                for (i, s) in sigma_r.iter().enumerate() {
                    for j in 0..reduced.ncols() {
                        reduced[(i, j)] /= s;
                    }
                }
                Ok(reduced)
            }
        }
    }
}

/// Diagnostics and configuration recorded with every decomposition.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub requested_rank: Rank,
    pub effective_rank: usize,
    pub numerical_rank: usize,
    pub training_pairs: usize,
    pub state_dim: usize,
    pub feature_dim: Option<usize>,
    pub dictionary: Option<String>,
    pub kernel: Option<String>,
    pub eigenvector_condition: f64,
    pub residual: f64,
    pub left_residual: f64,
    pub biorthogonality_defect: f64,
    pub warnings: Vec<String>,
    /// Free-form configuration block supplied by the caller (e.g. the CLI run config).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// Approximate Koopman eigenvalues, eigenfunctions and modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KoopmanDecomposition {
    pub method: Method,
    pub rank: usize,
    #[serde(with = "serde_mat::complex_vec")]
    pub eigenvalues: Vec<c64>,
    /// Columns are modes: state space for DMD/TDMD/KDMD, feature space for EDMD.
    #[serde(with = "serde_mat::complex")]
    pub modes: Mat<c64>,
    #[serde(with = "serde_mat::real")]
    pub reduced_operator: Mat<f64>,
    /// Columns are right eigenvectors `ṽᵢ` of the reduced operator.
    #[serde(with = "serde_mat::complex")]
    pub right_vectors: Mat<c64>,
    /// Rows are left eigenvectors `w̃ᵢ*` of the reduced operator, unit norm.
    #[serde(with = "serde_mat::complex")]
    pub left_vectors: Mat<c64>,
    pub basis: Basis,
    pub singular_values: Vec<f64>,
    pub provenance: Provenance,
}

/// Continuous-time view of a discrete eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSpectrumEntry {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub frequency_hz: f64,
    pub growth_rate: f64,
}

impl ContinuousSpectrumEntry {
    pub fn lambda(&self) -> c64 {
        c64::new(self.lambda_re, self.lambda_im)
    }
}

/// `λ = log(μ)/Δt` on the principal branch; frequency `Im λ / 2π`, growth `Re λ`.
pub fn to_continuous(mu: c64, dt: f64) -> Result<ContinuousSpectrumEntry> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(KoopmanError::Domain(format!("dt must be positive, got {dt}")));
    }
    if mu.norm() == 0.0 {
        return Err(KoopmanError::SingularEigenvalue(format!("{mu}")));
    }
    let lambda = mu.ln() / dt;
    Ok(ContinuousSpectrumEntry {
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        frequency_hz: lambda.im / (2.0 * std::f64::consts::PI),
        growth_rate: lambda.re,
    })
}

/// Result of [`KoopmanDecomposition::predict`].
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Columns are predicted states for k = 0..=steps (real part).
    pub trajectory: Mat<f64>,
    pub coefficients: Vec<c64>,
    /// Set when the modes were rank deficient and minimum-norm coefficients were used.
    pub rank_deficient: bool,
}

impl KoopmanDecomposition {
    /// Assembles a decomposition from a reduced operator and its basis.
    pub(crate) fn assemble(
        method: Method,
        reduced_operator: Mat<f64>,
        basis: Basis,
        singular_values: Vec<f64>,
        mut provenance: Provenance,
        modes_from: impl FnOnce(&EigenPairs) -> Result<Mat<c64>>,
    ) -> Result<Self> {
        let pairs = EigenPairs::compute(reduced_operator.as_ref())?;
        let modes = modes_from(&pairs)?;
        provenance.effective_rank = pairs.eigenvalues.len();
        provenance.eigenvector_condition = pairs.condition;
        provenance.residual = pairs.right_residual;
        provenance.left_residual = pairs.left_residual;
        provenance.biorthogonality_defect = pairs.biorthogonality_defect;
        if pairs.right_residual > 1e-10 {
            provenance
                .warnings
                .push(format!("reduced eigenproblem residual {:.3e} exceeds 1e-10", pairs.right_residual));
        }
        if !pairs.condition.is_finite() || pairs.condition > 1e12 {
            provenance.warnings.push(format!(
                "eigenvector matrix is ill conditioned (cond = {:.3e}); modes may be nearly parallel",
                pairs.condition
            ));
        }
        Ok(KoopmanDecomposition {
            method,
            rank: pairs.eigenvalues.len(),
            eigenvalues: pairs.eigenvalues,
            modes,
            reduced_operator,
            right_vectors: pairs.right,
            left_vectors: pairs.left,
            basis,
            singular_values,
            provenance,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.basis.state_dim()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.rank {
            return Err(KoopmanError::IndexOutOfRange { index: i, rank: self.rank });
        }
        Ok(())
    }

    /// All eigenfunctions at the given states: entry `(i, k)` is `φᵢ(x_k)`.
    pub fn eigenfunctions_at(&self, states: MatRef<'_, f64>) -> Result<Mat<c64>> {
        let reduced = self.basis.reduce(states)?;
        Ok(&self.left_vectors * linalg::to_complex(reduced.as_ref()))
    }

    /// `φᵢ(x) = w̃ᵢ* z(x)` where `z` maps a state to reduced coordinates.
    pub fn eigenfunction_eval(&self, i: usize, x: &[f64]) -> Result<c64> {
        self.check_index(i)?;
        let state = Mat::from_fn(x.len(), 1, |r, _| x[r]);
        let reduced = self.basis.reduce(state.as_ref())?;
        let mut acc = c64::new(0.0, 0.0);
        for j in 0..self.rank {
            acc += self.left_vectors[(i, j)] * reduced[(j, 0)];
        }
        Ok(acc)
    }

    /// Eigenfunction `i` at each column of `states`.
    pub fn eigenfunction_values(&self, i: usize, states: MatRef<'_, f64>) -> Result<Vec<c64>> {
        self.check_index(i)?;
        let reduced = self.basis.reduce(states)?;
        Ok((0..reduced.ncols())
            .map(|k| {
                (0..self.rank).fold(c64::new(0.0, 0.0), |acc, j| acc + self.left_vectors[(i, j)] * reduced[(j, k)])
            })
            .collect())
    }

    /// Rescales the left eigenvector of eigenpair `i` (and so its eigenfunction).
    pub fn rescale_eigenfunction(&mut self, i: usize, factor: c64) -> Result<()> {
        self.check_index(i)?;
        for j in 0..self.rank {
            self.left_vectors[(i, j)] *= factor;
        }
        Ok(())
    }

    /// Rows of the modes that correspond to state coordinates: all rows for
    /// state-space modes, the coordinate observables for EDMD.
    pub fn state_modes(&self) -> Result<Mat<c64>> {
        match &self.basis {
            Basis::Dictionary { dictionary, .. } => {
                let rows = dictionary.coordinate_indices().ok_or_else(|| {
                    KoopmanError::Contract(format!(
                        "dictionary '{}' does not contain the coordinate observables x1..x{}",
                        dictionary.description(),
                        dictionary.state_dim()
                    ))
                })?;
                Ok(Mat::from_fn(rows.len(), self.rank, |i, j| self.modes[(rows[i], j)]))
            }
            _ => Ok(self.modes.clone()),
        }
    }

    /// A state expressed in the space the modes live in.
    fn mode_space_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() {
            return Err(KoopmanError::Dimension(format!(
                "state has dimension {} but the decomposition expects {}",
                x.len(),
                self.state_dim()
            )));
        }
        match &self.basis {
            Basis::Dictionary { dictionary, .. } => dictionary.evaluate(x),
            _ => Ok(x.to_vec()),
        }
    }

    /// Least-squares coefficients `cᵢ` with `x ≈ Σ cᵢ vᵢ`.
    pub fn expansion_coefficients(&self, x: &[f64]) -> Result<(Vec<c64>, bool)> {
        let v = self.mode_space_vector(x)?;
        projection_coefficients(self.modes.as_ref(), &v)
    }

    /// `y_{k+1} = Σ cᵢ μᵢᵏ vᵢ` for k = 0..=steps, starting from `y1`.
    ///
    /// EDMD predictions are carried out in feature space and reported on the
    /// coordinate observables.
    pub fn predict(&self, y1: &[f64], steps: usize) -> Result<Prediction> {
        let (coefficients, rank_deficient) = self.expansion_coefficients(y1)?;
        let modes = self.state_modes()?;
        let n = modes.nrows();
        let mut trajectory = Mat::<f64>::zeros(n, steps + 1);
        let mut weights = coefficients.clone();
        for k in 0..=steps {
            for row in 0..n {
                let mut acc = c64::new(0.0, 0.0);
                for (i, w) in weights.iter().enumerate() {
                    acc += w * modes[(row, i)];
                }
                trajectory[(row, k)] = acc.re;
            }
            for (w, mu) in weights.iter_mut().zip(&self.eigenvalues) {
                *w *= mu;
            }
        }
        Ok(Prediction {
            trajectory,
            coefficients,
            rank_deficient,
        })
    }

    /// Time-averaged mode amplitudes `βᵢ = (1/m) Σₖ |cᵢ| |μᵢ|ᵏ ‖vᵢ‖₂`,
    /// normalized by the largest.
    pub fn mode_amplitudes(&self, data: &SnapshotSet) -> Result<Vec<f64>> {
        if !data.is_sequential() || data.is_empty() {
            return Err(KoopmanError::Contract(
                "mode amplitudes need nonempty sequential data (a trajectory)".into(),
            ));
        }
        let x0: Vec<f64> = (0..data.state_dim()).map(|i| data.inputs()[(i, 0)]).collect();
        let (c, _) = self.expansion_coefficients(&x0)?;
        let m = data.len();
        let raw: Vec<f64> = (0..self.rank)
            .map(|i| {
                let r = self.eigenvalues[i].norm();
                let mut power = 1.0;
                let mut sum = 0.0;
                for _ in 0..m {
                    sum += power;
                    power *= r;
                }
                c[i].norm() * self.modes.col(i).norm_l2() * sum / m as f64
            })
            .collect();
        Ok(normalize_by_max(raw))
    }

    pub fn continuous_spectrum(&self, dt: f64) -> Result<Vec<ContinuousSpectrumEntry>> {
        self.eigenvalues.iter().map(|&mu| to_continuous(mu, dt)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dec: KoopmanDecomposition = serde_json::from_str(text)?;
        let r = dec.rank;
        let consistent = dec.eigenvalues.len() == r
            && dec.modes.ncols() == r
            && dec.left_vectors.nrows() == r
            && dec.left_vectors.ncols() == r
            && dec.basis.rank() == r;
        if !consistent {
            return Err(KoopmanError::Format(format!(
                "decomposition document is inconsistent with its rank {r}"
            )));
        }
        Ok(dec)
    }
}

fn normalize_by_max(values: Vec<f64>) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        values.into_iter().map(|v| v / max).collect()
    } else {
        values
    }
}

/// Least-squares coefficients of `x` on the columns of `modes` (minimum norm
/// when the modes are rank deficient, which is flagged).
pub fn projection_coefficients(modes: MatRef<'_, c64>, x: &[f64]) -> Result<(Vec<c64>, bool)> {
    if x.len() != modes.nrows() {
        return Err(KoopmanError::Dimension(format!(
            "vector has length {} but modes have {} rows",
            x.len(),
            modes.nrows()
        )));
    }
    let b = Mat::from_fn(x.len(), 1, |i, _| c64::new(x[i], 0.0));
    let (sol, deficient) = linalg::lstsq_min_norm(modes, b.as_ref(), PROJECTION_RTOL)?;
    Ok(((0..modes.ncols()).map(|i| sol[(i, 0)]).collect(), deficient))
}
