//! Per-eigenpair accuracy on held-out data, and ground-truth errors for
//! validating it.
//!
//! The mode error of an approximate eigenpair `(μ, φ)` on test pairs
//! `(xₖ, xₖ♯)` is
//!
//! ```text
//! α = Σₖ |φ(xₖ♯) − μ φ(xₖ)| / Σₖ |φ(xₖ)|
//! ```
//!
//! It is zero for an exact Koopman eigenpair on clean data and near one when
//! the eigenfunction equation fails at the scale of the eigenfunction itself.
//! It is invariant to rescaling `φ`. When analytic eigenpairs are known, the
//! eigenvalue error `τ` and the eigenfunction error `θ` provide the truth it
//! should track.

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::decomposition::{ContinuousSpectrumEntry, KoopmanDecomposition, Method};
use crate::error::{KoopmanError, Result};
use crate::snapshots::{AnalyticEigenpair, PolyMap, SnapshotSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormVariant {
    /// Sums of absolute values.
    #[default]
    AbsSum,
    /// Square roots of sums of squares.
    L2,
}

impl fmt::Display for NormVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormVariant::AbsSum => "abs_sum",
            NormVariant::L2 => "l2",
        })
    }
}

impl FromStr for NormVariant {
    type Err = KoopmanError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "abs_sum" | "abs" | "l1" => Ok(NormVariant::AbsSum),
            "l2" => Ok(NormVariant::L2),
            other => Err(KoopmanError::Domain(format!("unknown norm variant '{other}' (expected abs-sum or l2)"))),
        }
    }
}

/// α from eigenfunction values at test inputs (`at_inputs`) and images.
pub fn mode_error_from_values(index: usize, mu: c64, at_inputs: &[c64], at_images: &[c64], norm: NormVariant) -> Result<f64> {
    let (num, den) = match norm {
        NormVariant::AbsSum => at_inputs.iter().zip(at_images).fold((0.0, 0.0), |(n, d), (&x, &y)| {
            (n + (y - mu * x).norm(), d + x.norm())
        }),
        NormVariant::L2 => {
            let (n, d) = at_inputs.iter().zip(at_images).fold((0.0, 0.0), |(n, d), (&x, &y)| {
                (n + (y - mu * x).norm_sqr(), d + x.norm_sqr())
            });
            (n.sqrt(), d.sqrt())
        }
    };
    if !(den > 0.0) {
        return Err(KoopmanError::DegenerateEigenfunction { index });
    }
    Ok(num / den)
}

fn check_test_set(dec: &KoopmanDecomposition, test: &SnapshotSet) -> Result<()> {
    if test.is_empty() {
        return Err(KoopmanError::Size(
            "mode error needs held-out test pairs; the test set is empty".into(),
        ));
    }
    if test.state_dim() != dec.state_dim() {
        return Err(KoopmanError::Dimension(format!(
            "test data has dimension {} but the decomposition expects {}",
            test.state_dim(),
            dec.state_dim()
        )));
    }
    Ok(())
}

/// Mode error α of eigenpair `i` on the test pairs.
pub fn mode_error(dec: &KoopmanDecomposition, i: usize, test: &SnapshotSet, norm: NormVariant) -> Result<f64> {
    if i >= dec.rank {
        return Err(KoopmanError::IndexOutOfRange { index: i, rank: dec.rank });
    }
    check_test_set(dec, test)?;
    let at_inputs = dec.eigenfunction_values(i, test.inputs())?;
    let at_images = dec.eigenfunction_values(i, test.images())?;
    mode_error_from_values(i, dec.eigenvalues[i], &at_inputs, &at_images, norm)
}

/// Mode errors of every eigenpair; degenerate eigenfunctions give `Err` entries.
pub fn mode_errors(dec: &KoopmanDecomposition, test: &SnapshotSet, norm: NormVariant) -> Result<Vec<Result<f64>>> {
    check_test_set(dec, test)?;
    let at_inputs = dec.eigenfunctions_at(test.inputs())?;
    let at_images = dec.eigenfunctions_at(test.images())?;
    Ok((0..dec.rank)
        .map(|i| {
            let a = row(at_inputs.as_ref(), i);
            let b = row(at_images.as_ref(), i);
            mode_error_from_values(i, dec.eigenvalues[i], &a, &b, norm)
        })
        .collect())
}

fn row(m: MatRef<'_, c64>, i: usize) -> Vec<c64> {
    (0..m.ncols()).map(|k| m[(i, k)]).collect()
}

/// Relative distance `τ = |μ̂ − μ| / |μ|` to the nearest analytic eigenvalue,
/// with the matched `(k, l)`. Ties go to smaller `k + l`, then smaller `k`.
pub fn eigenvalue_error(mu_hat: c64, analytic: &[AnalyticEigenpair]) -> Result<(f64, (u32, u32))> {
    let best = analytic
        .iter()
        .filter(|p| p.eigenvalue != 0.0)
        .min_by(|a, b| {
            let da = (mu_hat - a.eigenvalue).norm();
            let db = (mu_hat - b.eigenvalue).norm();
            da.total_cmp(&db)
                .then((a.k + a.l).cmp(&(b.k + b.l)))
                .then(a.k.cmp(&b.k))
        })
        .ok_or_else(|| KoopmanError::Size("no nonzero analytic eigenvalues to match against".into()))?;
    let tau = (mu_hat - best.eigenvalue).norm() / best.eigenvalue.abs();
    Ok((tau, (best.k, best.l)))
}

/// Index of the computed eigenvalue nearest to `target`; ties go to the lower index.
pub fn nearest_computed(eigenvalues: &[c64], target: c64) -> Option<usize> {
    (0..eigenvalues.len()).min_by(|&a, &b| {
        (eigenvalues[a] - target)
            .norm()
            .total_cmp(&(eigenvalues[b] - target).norm())
            .then(a.cmp(&b))
    })
}

/// Axis-aligned box with a uniform tensor grid, used for L² comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points_per_axis: usize,
}

impl Default for Domain {
    /// `[−1, 1]²` on a 101 × 101 grid.
    fn default() -> Self {
        Domain {
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
            points_per_axis: 101,
        }
    }
}

impl Domain {
    /// Grid points as columns, with their trapezoidal quadrature weights.
    pub fn grid(&self) -> Result<(Mat<f64>, Vec<f64>)> {
        let n = self.lower.len();
        if n == 0 || n != self.upper.len() {
            return Err(KoopmanError::Dimension("domain bounds must be nonempty and of equal length".into()));
        }
        if self.points_per_axis < 2 {
            return Err(KoopmanError::Size("quadrature grid needs at least 2 points per axis".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(lo, hi)| !(hi > lo)) {
            return Err(KoopmanError::Domain("domain upper bounds must exceed lower bounds".into()));
        }
        let g = self.points_per_axis;
        let total = g
            .checked_pow(n as u32)
            .filter(|&t| t <= 50_000_000)
            .ok_or_else(|| KoopmanError::Size("quadrature grid is too large".into()))?;
        let mut points = Mat::<f64>::zeros(n, total);
        let mut weights = vec![1.0; total];
        for p in 0..total {
            let mut rem = p;
            for axis in 0..n {
                let idx = rem % g;
                rem /= g;
                let (lo, hi) = (self.lower[axis], self.upper[axis]);
                let h = (hi - lo) / (g - 1) as f64;
                points[(axis, p)] = lo + h * idx as f64;
                weights[p] *= if idx == 0 || idx == g - 1 { h / 2.0 } else { h };
            }
        }
        Ok((points, weights))
    }
}

/// `θ = ‖φ − e^{iϑ}φ̂‖ / ‖φ‖` after normalizing both to unit max modulus on the
/// grid and choosing ϑ to minimize the distance.
pub fn eigenfunction_error_from_values(computed: &[c64], analytic: &[c64], weights: &[f64]) -> Result<f64> {
    let max_a = analytic.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let max_c = computed.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(max_a > 0.0) {
        return Err(KoopmanError::Normalization("analytic eigenfunction vanishes on the grid".into()));
    }
    if !(max_c > 0.0) {
        return Err(KoopmanError::Normalization("computed eigenfunction vanishes on the grid".into()));
    }
    let mut overlap = c64::new(0.0, 0.0);
    for ((a, c), w) in analytic.iter().zip(computed).zip(weights) {
        overlap += (c / max_c).conj() * (a / max_a) * *w;
    }
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c64::new(1.0, 0.0)
    };
    let (mut diff, mut reference) = (0.0, 0.0);
    for ((a, c), w) in analytic.iter().zip(computed).zip(weights) {
        let a = a / max_a;
        diff += w * (a - phase * (c / max_c)).norm_sqr();
        reference += w * a.norm_sqr();
    }
    Ok((diff / reference).sqrt())
}

/// Eigenfunction error θ of eigenpair `i` against an analytic eigenfunction.
pub fn eigenfunction_error(
    dec: &KoopmanDecomposition,
    i: usize,
    analytic: &dyn Fn(&[f64]) -> c64,
    domain: &Domain,
) -> Result<f64> {
    if i >= dec.rank {
        return Err(KoopmanError::IndexOutOfRange { index: i, rank: dec.rank });
    }
    let (points, weights) = domain.grid()?;
    let computed = dec.eigenfunction_values(i, points.as_ref())?;
    let exact = analytic_values(points.as_ref(), analytic);
    eigenfunction_error_from_values(&computed, &exact, &weights)
}

fn analytic_values(points: MatRef<'_, f64>, f: &dyn Fn(&[f64]) -> c64) -> Vec<c64> {
    let mut x = vec![0.0; points.nrows()];
    (0..points.ncols())
        .map(|k| {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = points[(i, k)];
            }
            f(&x)
        })
        .collect()
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let avg = (start + end - 1) as f64 / 2.0 + 1.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(KoopmanError::Size(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(KoopmanError::Size("rank correlation needs at least 3 pairs".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(KoopmanError::Domain("rank correlation needs finite entries".into()));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - mean) * (y - mean);
        saa += (x - mean) * (x - mean);
        sbb += (y - mean) * (y - mean);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(KoopmanError::UndefinedCorrelation("one input is constant".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Analytic ground truth available to a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSpec {
    pub map: PolyMap,
    pub k_max: u32,
    pub l_max: u32,
}

impl Default for AnalyticSpec {
    fn default() -> Self {
        AnalyticSpec {
            map: PolyMap::default(),
            k_max: 20,
            l_max: 20,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions<'a> {
    pub analytic: Option<AnalyticSpec>,
    /// Sequential data for time-averaged mode amplitudes.
    pub amplitude_data: Option<&'a SnapshotSet>,
    pub dt: Option<f64>,
    pub norm: NormVariant,
    /// Quadrature domain for θ; defaults to `[−1, 1]²` at 101 × 101.
    pub domain: Option<Domain>,
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenpairRecord {
    pub index: usize,
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    pub theta: Option<f64>,
    pub matched: Option<(u32, u32)>,
    pub continuous: Option<ContinuousSpectrumEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<String>,
}

impl EigenpairRecord {
    pub fn eigenvalue(&self) -> c64 {
        c64::new(self.eigenvalue_re, self.eigenvalue_im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub method: Method,
    pub dictionary: Option<String>,
    pub kernel: Option<String>,
    pub rank: usize,
    pub test_pairs: usize,
    pub norm: NormVariant,
    pub dt: Option<f64>,
    pub analytic: Option<AnalyticSpec>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub metadata: ReportMetadata,
    pub records: Vec<EigenpairRecord>,
}

pub const CSV_COLUMNS: [&str; 9] = [
    "index", "re_mu", "im_mu", "alpha", "beta", "tau", "theta", "freq_hz", "growth_rate",
];

impl AccuracyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fixed columns: index, re_mu, im_mu, alpha, beta, tau, theta, freq_hz,
    /// growth_rate. Absent values are empty cells.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let cells = [
                r.index.to_string(),
                format!("{:e}", r.eigenvalue_re),
                format!("{:e}", r.eigenvalue_im),
                opt(r.alpha),
                opt(r.beta),
                opt(r.tau),
                opt(r.theta),
                opt(r.continuous.map(|c| c.frequency_hz)),
                opt(r.continuous.map(|c| c.growth_rate)),
            ];
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Indices of the records sorted by α ascending (records without α last).
    pub fn by_alpha(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.sort_by(|&a, &b| {
            let key = |i: usize| self.records[i].alpha.unwrap_or(f64::INFINITY);
            key(a).total_cmp(&key(b)).then(a.cmp(&b))
        });
        idx
    }
}

/// Scores every eigenpair of `dec` on `test`, adding τ/θ, β and
/// continuous-time entries when the options provide what they need.
///
/// Per-entry failures leave the field absent and are listed in the record's
/// `issues` and the metadata warnings.
pub fn assemble_report(dec: &KoopmanDecomposition, test: &SnapshotSet, options: &ReportOptions<'_>) -> Result<AccuracyReport> {
    let alphas = mode_errors(dec, test, options.norm)?;
    let mut records: Vec<EigenpairRecord> = dec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, mu)| EigenpairRecord {
            index: i,
            eigenvalue_re: mu.re,
            eigenvalue_im: mu.im,
            alpha: None,
            beta: None,
            tau: None,
            theta: None,
            matched: None,
            continuous: None,
            issues: Vec::new(),
        })
        .collect();
    for (rec, alpha) in records.iter_mut().zip(alphas) {
        match alpha {
            Ok(a) => rec.alpha = Some(a),
            Err(e) => rec.issues.push(format!("alpha: {e}")),
        }
    }

    if let Some(spec) = options.analytic {
        if dec.state_dim() != 2 {
            return Err(KoopmanError::Dimension(
                "analytic polynomial-map eigenpairs need two-dimensional states".into(),
            ));
        }
        let analytic = spec.map.analytic_eigenpairs(spec.k_max, spec.l_max);
        let domain = options.domain.clone().unwrap_or_default();
        let (points, weights) = domain.grid()?;
        let values = dec.eigenfunctions_at(points.as_ref())?;
        for rec in records.iter_mut() {
            let (tau, (k, l)) = eigenvalue_error(rec.eigenvalue(), &analytic)?;
            rec.tau = Some(tau);
            rec.matched = Some((k, l));
            let pair = AnalyticEigenpair {
                k,
                l,
                eigenvalue: 0.0,
            };
            let exact = analytic_values(points.as_ref(), &|x| c64::new(pair.eval(x), 0.0));
            match eigenfunction_error_from_values(&row(values.as_ref(), rec.index), &exact, &weights) {
                Ok(theta) => rec.theta = Some(theta),
                Err(e) => rec.issues.push(format!("theta: {e}")),
            }
        }
    }

    if let Some(data) = options.amplitude_data {
        match dec.mode_amplitudes(data) {
            Ok(beta) => {
                for (rec, b) in records.iter_mut().zip(beta) {
                    rec.beta = Some(b);
                }
            }
            Err(e) => {
                for rec in records.iter_mut() {
                    rec.issues.push(format!("beta: {e}"));
                }
            }
        }
    }

    if let Some(dt) = options.dt {
        for rec in records.iter_mut() {
            match crate::decomposition::to_continuous(rec.eigenvalue(), dt) {
                Ok(c) => rec.continuous = Some(c),
                Err(e) => rec.issues.push(format!("continuous: {e}")),
            }
        }
    }

    let warnings = records
        .iter()
        .flat_map(|r| r.issues.iter().map(move |m| format!("eigenpair {}: {m}", r.index)))
        .collect();
    Ok(AccuracyReport {
        metadata: ReportMetadata {
            method: dec.method,
            dictionary: dec.provenance.dictionary.clone(),
            kernel: dec.provenance.kernel.clone(),
            rank: dec.rank,
            test_pairs: test.len(),
            norm: options.norm,
            dt: options.dt,
            analytic: options.analytic,
            warnings,
            config: options.config.clone(),
        },
        records,
    })
}
