//! Snapshot pairs `(xₖ, xₖ♯ = F(xₖ))` and the synthetic benchmarks built on them.

use faer::{c64, Mat, MatRef};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KoopmanError, Result};

/// Paired state samples. Column `k` of `inputs` is `xₖ`, column `k` of
/// `images` is its one-step image.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    inputs: Mat<f64>,
    images: Mat<f64>,
    sequential: bool,
    dt: Option<f64>,
}

impl SnapshotSet {
    /// Non-sequential pairs.
    pub fn new(inputs: Mat<f64>, images: Mat<f64>) -> Result<Self> {
        Self::from_parts(inputs, images, false, None)
    }

    /// Builds a set and checks every structural invariant.
    pub fn from_parts(inputs: Mat<f64>, images: Mat<f64>, sequential: bool, dt: Option<f64>) -> Result<Self> {
        if inputs.nrows() != images.nrows() || inputs.ncols() != images.ncols() {
            return Err(KoopmanError::Dimension(format!(
                "inputs are {}x{} but images are {}x{}",
                inputs.nrows(),
                inputs.ncols(),
                images.nrows(),
                images.ncols()
            )));
        }
        if inputs.nrows() == 0 {
            return Err(KoopmanError::Dimension("state dimension must be at least 1".into()));
        }
        if dt.is_some() && !sequential {
            return Err(KoopmanError::Contract("dt is only meaningful for sequential data".into()));
        }
        if let Some(dt) = dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(KoopmanError::Domain(format!("dt must be positive, got {dt}")));
            }
        }
        if sequential {
            for k in 0..inputs.ncols().saturating_sub(1) {
                for i in 0..inputs.nrows() {
                    if images[(i, k)].to_bits() != inputs[(i, k + 1)].to_bits() {
                        return Err(KoopmanError::Contract(format!(
                            "sequential set: image {k} differs from input {} at row {i}",
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(SnapshotSet {
            inputs,
            images,
            sequential,
            dt,
        })
    }

    /// Pairs consecutive columns of a time series: `xₖ = x(k)`, `xₖ♯ = x(k+1)`.
    pub fn from_sequence(series: MatRef<'_, f64>, dt: Option<f64>) -> Result<Self> {
        if series.ncols() < 2 {
            return Err(KoopmanError::Dimension(format!(
                "a sequence needs at least 2 snapshots, got {}",
                series.ncols()
            )));
        }
        let m = series.ncols() - 1;
        let inputs = series.subcols(0, m).to_owned();
        let images = series.subcols(1, m).to_owned();
        Self::from_parts(inputs, images, true, dt)
    }

    /// An empty set of dimension `n` (used for zero-size splits).
    fn empty(n: usize) -> Self {
        SnapshotSet {
            inputs: Mat::zeros(n, 0),
            images: Mat::zeros(n, 0),
            sequential: false,
            dt: None,
        }
    }

    pub fn inputs(&self) -> MatRef<'_, f64> {
        self.inputs.as_ref()
    }

    pub fn images(&self) -> MatRef<'_, f64> {
        self.images.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_sequential(&self) -> bool {
        self.sequential
    }

    pub fn dt(&self) -> Option<f64> {
        self.dt
    }

    /// The `m + 1` states of a sequential set.
    pub fn series(&self) -> Option<Mat<f64>> {
        if !self.sequential || self.is_empty() {
            return None;
        }
        let (n, m) = (self.state_dim(), self.len());
        Some(Mat::from_fn(n, m + 1, |i, k| if k < m { self.inputs[(i, k)] } else { self.images[(i, m - 1)] }))
    }

    fn select(&self, columns: &[usize], keep_sequence: bool) -> Self {
        let n = self.state_dim();
        let inputs = Mat::from_fn(n, columns.len(), |i, k| self.inputs[(i, columns[k])]);
        let images = Mat::from_fn(n, columns.len(), |i, k| self.images[(i, columns[k])]);
        let sequential = keep_sequence && self.sequential && !columns.is_empty();
        SnapshotSet {
            inputs,
            images,
            sequential,
            dt: if sequential { self.dt } else { None },
        }
    }

    /// Splits into disjoint train/test pair sets.
    ///
    /// A prefix split of sequential data keeps both halves sequential; a random
    /// split does not.
    pub fn split(&self, n_train: usize, n_test: usize, strategy: SplitStrategy) -> Result<(Self, Self)> {
        let m = self.len();
        if n_train + n_test > m {
            return Err(KoopmanError::Size(format!(
                "split of {n_train} + {n_test} pairs exceeds the {m} available"
            )));
        }
        let (order, keep_sequence): (Vec<usize>, bool) = match strategy {
            SplitStrategy::Prefix => ((0..m).collect(), true),
            SplitStrategy::Random { seed } => {
                let mut order: Vec<usize> = (0..m).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                (order, false)
            }
        };
        let train = if n_train == 0 {
            Self::empty(self.state_dim())
        } else {
            self.select(&order[..n_train], keep_sequence)
        };
        let test = if n_test == 0 {
            Self::empty(self.state_dim())
        } else {
            self.select(&order[n_train..n_train + n_test], keep_sequence)
        };
        Ok((train, test))
    }

    /// Adds i.i.d. `N(0, σ²)` noise to every entry of inputs and images.
    ///
    /// For sequential data the noise is drawn per state of the underlying
    /// series, so the set stays a consistent trajectory.
    pub fn add_noise(&self, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(KoopmanError::Domain(format!("noise sigma must be nonnegative, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| KoopmanError::Domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(series) = self.series() {
            let noisy = perturb(series.as_ref(), &normal, &mut rng);
            return Self::from_sequence(noisy.as_ref(), self.dt);
        }
        let inputs = perturb(self.inputs.as_ref(), &normal, &mut rng);
        let images = perturb(self.images.as_ref(), &normal, &mut rng);
        Ok(SnapshotSet {
            inputs,
            images,
            sequential: false,
            dt: None,
        })
    }

    /// Multiplies every state by `factor` (a linear change of units).
    pub fn scaled(&self, factor: f64) -> Self {
        SnapshotSet {
            inputs: Mat::from_fn(self.state_dim(), self.len(), |i, j| factor * self.inputs[(i, j)]),
            images: Mat::from_fn(self.state_dim(), self.len(), |i, j| factor * self.images[(i, j)]),
            sequential: self.sequential,
            dt: self.dt,
        }
    }
}

fn perturb(m: MatRef<'_, f64>, normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> Mat<f64> {
    // Column-major draw order so that results do not depend on layout details.
    let mut out = m.to_owned();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out[(i, j)] += normal.sample(rng);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    Prefix,
    Random { seed: u64 },
}

/// The two-dimensional polynomial map
/// `(x₁, x₂) ↦ (γx₁, δx₂ + (γ² − δ)x₁²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyMap {
    pub gamma: f64,
    pub delta: f64,
}

impl Default for PolyMap {
    fn default() -> Self {
        PolyMap { gamma: 0.9, delta: 0.8 }
    }
}

impl PolyMap {
    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let [x1, x2] = x;
        [self.gamma * x1, self.delta * x2 + (self.gamma * self.gamma - self.delta) * x1 * x1]
    }

    /// `m` pairs with inputs uniform on `[−1, 1)²`.
    pub fn sample(&self, m: usize, seed: u64) -> Result<SnapshotSet> {
        if m == 0 {
            return Err(KoopmanError::Size("polynomial map benchmark needs m >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Mat::<f64>::zeros(2, m);
        let mut images = Mat::<f64>::zeros(2, m);
        for k in 0..m {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let y = self.apply(x);
            inputs[(0, k)] = x[0];
            inputs[(1, k)] = x[1];
            images[(0, k)] = y[0];
            images[(1, k)] = y[1];
        }
        SnapshotSet::new(inputs, images)
    }

    /// Analytic eigenpairs `μ = γᵏδˡ`, `φ = x₁ᵏ(x₂ − x₁²)ˡ` for `k ≤ k_max`,
    /// `l ≤ l_max`, ordered by `|μ|` descending (ties: smaller `k + l`, then
    /// smaller `k`).
    pub fn analytic_eigenpairs(&self, k_max: u32, l_max: u32) -> Vec<AnalyticEigenpair> {
        let mut pairs: Vec<AnalyticEigenpair> = (0..=k_max)
            .flat_map(|k| (0..=l_max).map(move |l| (k, l)))
            .map(|(k, l)| AnalyticEigenpair {
                k,
                l,
                eigenvalue: self.gamma.powi(k as i32) * self.delta.powi(l as i32),
            })
            .collect();
        pairs.sort_by(|a, b| {
            b.eigenvalue
                .abs()
                .total_cmp(&a.eigenvalue.abs())
                .then((a.k + a.l).cmp(&(b.k + b.l)))
                .then(a.k.cmp(&b.k))
        });
        pairs
    }
}

/// `m` pairs of the default polynomial map (γ = 0.9, δ = 0.8 unless given).
pub fn gen_polymap(m: usize, seed: u64, gamma: f64, delta: f64) -> Result<SnapshotSet> {
    PolyMap { gamma, delta }.sample(m, seed)
}

/// A Koopman eigenpair of [`PolyMap`] known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticEigenpair {
    pub k: u32,
    pub l: u32,
    pub eigenvalue: f64,
}

impl AnalyticEigenpair {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        x1.powi(self.k as i32) * (x2 - x1 * x1).powi(self.l as i32)
    }
}

/// Linear benchmark `x ↦ A x` whose nonzero spectrum is prescribed.
///
/// Each complex entry with nonzero imaginary part contributes a conjugate
/// pair (as a real 2×2 rotation-scaling block). States live in the span of
/// a random basis `T`, and `A = T D T⁺`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: Mat<f64>,
    pub basis: Mat<f64>,
    pub spectrum: Vec<c64>,
}

impl LinearSystem {
    pub fn random(eigenvalues: &[c64], n: usize, seed: u64) -> Result<Self> {
        let mut spectrum = Vec::new();
        let mut p = 0;
        for &mu in eigenvalues {
            if mu.im == 0.0 {
                p += 1;
                spectrum.push(mu);
            } else {
                p += 2;
                spectrum.push(mu);
                spectrum.push(mu.conj());
            }
        }
        if p == 0 || p > n {
            return Err(KoopmanError::Size(format!(
                "spectrum needs {p} real dimensions but the state has n = {n}"
            )));
        }
        let mut d = Mat::<f64>::zeros(p, p);
        let mut at = 0;
        for &mu in eigenvalues {
            if mu.im == 0.0 {
                d[(at, at)] = mu.re;
                at += 1;
            } else {
                d[(at, at)] = mu.re;
                d[(at, at + 1)] = -mu.im;
                d[(at + 1, at)] = mu.im;
                d[(at + 1, at + 1)] = mu.re;
                at += 2;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = Mat::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let svd = crate::linalg::ThinSvd::compute(basis.as_ref())?;
        let t_pinv = crate::linalg::pinv_apply(&svd, Mat::<f64>::identity(n, n).as_ref(), p);
        let matrix = &basis * &d * &t_pinv;
        Ok(LinearSystem { matrix, basis, spectrum })
    }

    /// `m` independent pairs with states drawn in the span of the basis.
    pub fn sample_pairs(&self, m: usize, seed: u64) -> Result<SnapshotSet> {
        let p = self.basis.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Mat<f64> = Mat::from_fn(p, m, |_, _| StandardNormal.sample(&mut rng));
        let inputs = &self.basis * &z;
        let images = &self.matrix * &inputs;
        SnapshotSet::new(inputs, images)
    }

    /// A single trajectory of `m + 1` states from a random initial state.
    pub fn trajectory(&self, m: usize, dt: Option<f64>, seed: u64) -> Result<SnapshotSet> {
        let p = self.basis.ncols();
        let n = self.basis.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Mat<f64> = Mat::from_fn(p, 1, |_, _| StandardNormal.sample(&mut rng));
        let mut series = Mat::<f64>::zeros(n, m + 1);
        let mut x = &self.basis * &z;
        for k in 0..=m {
            for i in 0..n {
                series[(i, k)] = x[(i, 0)];
            }
            x = &self.matrix * &x;
        }
        SnapshotSet::from_sequence(series.as_ref(), dt)
    }
}

/// One travelling/standing oscillation in a synthetic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oscillator {
    pub frequency_hz: f64,
    /// Growth rate in 1/s (negative for damping).
    pub growth_rate: f64,
    pub amplitude: f64,
}

/// Sequential field data built from a few oscillators with random spatial
/// structure plus sensor noise; a stand-in for measured flow fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorField {
    pub n: usize,
    pub snapshots: usize,
    pub dt: f64,
    pub noise: f64,
    pub oscillators: Vec<Oscillator>,
}

impl OscillatorField {
    /// Four oscillators at 0, 0.89, 1.77 and 2.73 Hz sampled at 20 Hz.
    pub fn wake_surrogate(n: usize, snapshots: usize, noise: f64) -> Self {
        let osc = |f: f64, g: f64, a: f64| Oscillator {
            frequency_hz: f,
            growth_rate: g,
            amplitude: a,
        };
        OscillatorField {
            n,
            snapshots,
            dt: 1.0 / 20.0,
            noise,
            oscillators: vec![
                osc(0.0, 0.0, 1.0),
                osc(0.89, 0.0, 0.8),
                osc(1.77, -0.02, 0.5),
                osc(2.73, -0.05, 0.3),
            ],
        }
    }

    /// Continuous-time eigenvalues `g ± 2πif` of the generating oscillators.
    pub fn continuous_spectrum(&self) -> Vec<c64> {
        let mut out = Vec::new();
        for o in &self.oscillators {
            let w = 2.0 * std::f64::consts::PI * o.frequency_hz;
            out.push(c64::new(o.growth_rate, w));
            if o.frequency_hz != 0.0 {
                out.push(c64::new(o.growth_rate, -w));
            }
        }
        out
    }

    pub fn generate(&self, seed: u64) -> Result<SnapshotSet> {
        if self.snapshots < 2 {
            return Err(KoopmanError::Size("oscillator field needs at least 2 snapshots".into()));
        }
        if !(self.dt > 0.0) {
            return Err(KoopmanError::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.noise >= 0.0) {
            return Err(KoopmanError::Domain(format!("noise must be nonnegative, got {}", self.noise)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n;
        let unit = |rng: &mut ChaCha8Rng| {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm * (n as f64).sqrt()).collect::<Vec<f64>>()
        };
        let shapes: Vec<(Vec<f64>, Vec<f64>)> = self.oscillators.iter().map(|_| (unit(&mut rng), unit(&mut rng))).collect();
        let mut series = Mat::<f64>::zeros(n, self.snapshots);
        for k in 0..self.snapshots {
            let t = k as f64 * self.dt;
            for (o, (a, b)) in self.oscillators.iter().zip(&shapes) {
                let env = o.amplitude * (o.growth_rate * t).exp();
                let phase = 2.0 * std::f64::consts::PI * o.frequency_hz * t;
                let (s, c) = phase.sin_cos();
                for i in 0..n {
                    series[(i, k)] += env * (a[i] * c + b[i] * s);
                }
            }
        }
        if self.noise > 0.0 {
            let normal = Normal::new(0.0, self.noise).map_err(|e| KoopmanError::Domain(e.to_string()))?;
            series = perturb(series.as_ref(), &normal, &mut rng);
        }
        SnapshotSet::from_sequence(series.as_ref(), Some(self.dt))
    }
}
