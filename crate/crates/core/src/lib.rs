//! Data-driven Koopman spectral analysis.
//!
//! Approximates Koopman eigenvalues, eigenfunctions and modes from snapshot
//! pairs with DMD, total-least-squares DMD, extended DMD (explicit monomial
//! dictionaries) and kernel DMD, and scores each eigenpair on held-out pairs
//! with the residual of the eigenfunction equation,
//!
//! ```text
//! α = Σₖ |φ(xₖ♯) − μ φ(xₖ)| / Σₖ |φ(xₖ)|
//! ```
//!
//! which needs no knowledge of the underlying dynamics.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accuracy;
pub mod decomposition;
pub mod dmd;
pub mod edmd;
pub mod error;
pub mod io;
pub mod kdmd;
pub mod linalg;
mod serde_mat;
pub mod snapshots;

pub use accuracy::{
    assemble_report, eigenfunction_error, eigenvalue_error, mode_error, mode_errors, nearest_computed, rank_correlation,
    AccuracyReport, AnalyticSpec, Domain, EigenpairRecord, NormVariant, ReportOptions,
};
pub use decomposition::{
    projection_coefficients, to_continuous, Basis, ContinuousSpectrumEntry, KoopmanDecomposition, Method, Prediction,
    Provenance, Rank,
};
pub use dmd::{dmd, tdmd};
pub use edmd::{edmd, lift, monomial_dictionary, Dictionary, MonomialSpec};
pub use error::{ErrorClass, KoopmanError, Result};
pub use kdmd::{gram_matrices, kdmd, GramPair, Kernel};
pub use snapshots::{
    gen_polymap, AnalyticEigenpair, LinearSystem, Oscillator, OscillatorField, PolyMap, SnapshotSet, SplitStrategy,
};

pub use faer::{c64, Mat, MatRef};
