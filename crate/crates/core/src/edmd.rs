//! Extended DMD with an explicit monomial dictionary.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::decomposition::{Basis, KoopmanDecomposition, Method, Provenance, Rank};
use crate::dmd::reduced_fit;
use crate::error::{KoopmanError, Result};
use crate::linalg;
use crate::snapshots::SnapshotSet;

/// Largest dictionary we are willing to materialize.
pub const MAX_OBSERVABLES: u128 = 10_000_000;

/// How a monomial dictionary is enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "convention", content = "degree", rename_all = "snake_case")]
pub enum MonomialSpec {
    /// Every exponent at most `d`: `q = (d+1)ⁿ`.
    PerCoordinateMax(u32),
    /// Total degree at most `d`: `q = C(n+d, d)`.
    TotalDegree(u32),
}

impl fmt::Display for MonomialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonomialSpec::PerCoordinateMax(d) => write!(f, "percoord:{d}"),
            MonomialSpec::TotalDegree(d) => write!(f, "total:{d}"),
        }
    }
}

impl FromStr for MonomialSpec {
    type Err = KoopmanError;

    /// `percoord:<d>` or `total:<d>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || KoopmanError::Domain(format!("dictionary spec '{s}' is not percoord:<d> or total:<d>"));
        let (family, degree) = s.split_once(':').ok_or_else(bad)?;
        let degree: u32 = degree.trim().parse().map_err(|_| bad())?;
        match family.trim().to_ascii_lowercase().as_str() {
            "percoord" | "per_coordinate_max" => Ok(MonomialSpec::PerCoordinateMax(degree)),
            "total" | "total_degree" => Ok(MonomialSpec::TotalDegree(degree)),
            _ => Err(bad()),
        }
    }
}

/// An ordered set of monomial observables `ψⱼ(x) = Πᵢ xᵢ^{eⱼᵢ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    state_dim: usize,
    exponents: Vec<Vec<u32>>,
    description: String,
}

impl Dictionary {
    /// A dictionary from explicit exponent vectors, kept in the given order.
    pub fn from_exponents(state_dim: usize, exponents: Vec<Vec<u32>>, description: impl Into<String>) -> Result<Self> {
        if state_dim == 0 {
            return Err(KoopmanError::Dimension("state dimension must be at least 1".into()));
        }
        if exponents.is_empty() {
            return Err(KoopmanError::Size("dictionary needs at least one observable".into()));
        }
        if let Some(bad) = exponents.iter().find(|e| e.len() != state_dim) {
            return Err(KoopmanError::Dimension(format!(
                "exponent vector {bad:?} does not match state dimension {state_dim}"
            )));
        }
        Ok(Dictionary {
            state_dim,
            exponents,
            description: description.into(),
        })
    }

    /// `ψ(x) = x`.
    pub fn identity(state_dim: usize) -> Result<Self> {
        let exps = (0..state_dim)
            .map(|i| (0..state_dim).map(|j| u32::from(i == j)).collect())
            .collect();
        Self::from_exponents(state_dim, exps, "identity")
    }

    pub fn constant(state_dim: usize) -> Result<Self> {
        Self::from_exponents(state_dim, vec![vec![0; state_dim]], "constant")
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn observable_name(&self, j: usize) -> String {
        let factors: Vec<String> = self.exponents[j]
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{e}", i + 1) })
            .collect();
        if factors.is_empty() {
            "1".into()
        } else {
            factors.join("*")
        }
    }

    /// Index of the constant observable, if present.
    pub fn constant_index(&self) -> Option<usize> {
        self.exponents.iter().position(|e| e.iter().all(|&p| p == 0))
    }

    /// Indices of `x₁..x_n` when all of them are in the dictionary.
    pub fn coordinate_indices(&self) -> Option<Vec<usize>> {
        (0..self.state_dim)
            .map(|i| {
                self.exponents
                    .iter()
                    .position(|e| e.iter().enumerate().all(|(j, &p)| p == u32::from(i == j)))
            })
            .collect()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim {
            return Err(KoopmanError::Dimension(format!(
                "state has dimension {} but the dictionary expects {}",
                x.len(),
                self.state_dim
            )));
        }
        Ok(self
            .exponents
            .iter()
            .map(|e| e.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product())
            .collect())
    }

    /// `Ψ(X)`: the q × k matrix of observables at the given states.
    pub fn lift_states(&self, states: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if states.nrows() != self.state_dim {
            return Err(KoopmanError::Dimension(format!(
                "states have dimension {} but the dictionary expects {}",
                states.nrows(),
                self.state_dim
            )));
        }
        let mut out = Mat::<f64>::zeros(self.len(), states.ncols());
        for k in 0..states.ncols() {
            for (j, e) in self.exponents.iter().enumerate() {
                let mut v = 1.0;
                for (i, &p) in e.iter().enumerate() {
                    v *= states[(i, k)].powi(p as i32);
                }
                if !v.is_finite() {
                    return Err(KoopmanError::NonFiniteObservable {
                        observable: self.observable_name(j),
                        column: k,
                    });
                }
                out[(j, k)] = v;
            }
        }
        Ok(out)
    }
}

/// Observable count for a spec without enumerating it.
pub fn dictionary_size(n: usize, spec: MonomialSpec) -> u128 {
    match spec {
        MonomialSpec::PerCoordinateMax(d) => {
            let base = u128::from(d) + 1;
            (0..n).fold(1u128, |acc, _| acc.saturating_mul(base))
        }
        MonomialSpec::TotalDegree(d) => {
            // C(n+d, d) computed incrementally; each prefix product is exact.
            let mut c: u128 = 1;
            for i in 1..=u128::from(d) {
                c = c.saturating_mul(n as u128 + i) / i;
            }
            c
        }
    }
}

/// Monomials in `n` variables in graded-lexicographic order (total degree
/// ascending, then exponent of x₁ descending, then x₂, ...).
pub fn monomial_dictionary(n: usize, spec: MonomialSpec) -> Result<Dictionary> {
    if n == 0 {
        return Err(KoopmanError::Dimension("state dimension must be at least 1".into()));
    }
    let q = dictionary_size(n, spec);
    if q > MAX_OBSERVABLES {
        return Err(KoopmanError::DictionaryTooLarge { q, limit: MAX_OBSERVABLES });
    }
    let (max_each, max_total) = match spec {
        MonomialSpec::PerCoordinateMax(d) => (d, d.saturating_mul(n as u32)),
        MonomialSpec::TotalDegree(d) => (d, d),
    };
    let mut exps = Vec::with_capacity(q as usize);
    let mut current = vec![0u32; n];
    enumerate(&mut current, 0, 0, max_each, max_total, &mut exps);
    exps.sort_by(|a: &Vec<u32>, b: &Vec<u32>| {
        let (ta, tb): (u32, u32) = (a.iter().sum(), b.iter().sum());
        ta.cmp(&tb).then_with(|| b.cmp(a))
    });
    let description = match spec {
        MonomialSpec::PerCoordinateMax(d) => format!("monomials, each exponent <= {d} (q = {q})"),
        MonomialSpec::TotalDegree(d) => format!("monomials, total degree <= {d} (q = {q})"),
    };
    Dictionary::from_exponents(n, exps, description)
}

fn enumerate(current: &mut Vec<u32>, at: usize, used: u32, max_each: u32, max_total: u32, out: &mut Vec<Vec<u32>>) {
    if at == current.len() {
        out.push(current.clone());
        return;
    }
    for p in 0..=max_each.min(max_total - used) {
        current[at] = p;
        enumerate(current, at + 1, used + p, max_each, max_total, out);
    }
    current[at] = 0;
}

/// Lifts both halves of a snapshot set: `(Ψ(X), Ψ(X♯))`.
pub fn lift(dict: &Dictionary, set: &SnapshotSet) -> Result<(Mat<f64>, Mat<f64>)> {
    Ok((dict.lift_states(set.inputs())?, dict.lift_states(set.images())?))
}

/// DMD on lifted data; eigenfunctions are `φᵢ(x) = w̃ᵢ* U_rᵀ ψ(x)` and modes
/// live in feature space.
pub fn edmd(train: &SnapshotSet, dict: &Dictionary, rank: Rank) -> Result<KoopmanDecomposition> {
    let (psi_x, psi_y) = lift(dict, train)?;
    let fit = reduced_fit(psi_x.as_ref(), psi_y.as_ref(), rank)?;
    let provenance = Provenance {
        requested_rank: rank,
        numerical_rank: fit.numerical_rank,
        training_pairs: train.len(),
        state_dim: train.state_dim(),
        feature_dim: Some(dict.len()),
        dictionary: Some(dict.description().to_string()),
        warnings: fit.warnings,
        ..Provenance::default()
    };
    let u_c = linalg::to_complex(fit.u_r.as_ref());
    KoopmanDecomposition::assemble(
        Method::Edmd,
        fit.reduced,
        Basis::Dictionary {
            dictionary: dict.clone(),
            u_r: fit.u_r,
        },
        fit.singular_values,
        provenance,
        |pairs| Ok(&u_c * &pairs.right),
    )
}
