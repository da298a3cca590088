use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use koopman_core::io::SnapshotFormat;
use koopman_core::{Method, NormVariant};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Debug, Parser)]
#[command(name = "koopman", version, about = "Koopman spectral analysis with per-eigenpair accuracy scores")]
pub struct Cli {
    /// TOML file holding the same keys as the subcommand flags. Its values
    /// win over flags given on the command line.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug). `KOOPMAN_LOG` overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write train/test snapshot files for a benchmark system.
    Generate {
        #[command(subcommand)]
        system: System,
    },
    /// Run DMD, TDMD, EDMD or KDMD on training data.
    Decompose(DecomposeArgs),
    /// Score every eigenpair of a decomposition on held-out pairs.
    Score(ScoreArgs),
    /// Run a benchmark experiment end to end and write its tables.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Subcommand)]
pub enum System {
    /// The polynomial map (x1, x2) -> (g x1, d x2 + (g^2 - d) x1^2) on [-1, 1)^2.
    Polymap(PolymapArgs),
    /// A random linear system with a prescribed spectrum.
    Linear(LinearArgs),
    /// A field of a few damped oscillators plus sensor noise.
    Oscillators(OscillatorArgs),
}

/// Output and seeding options shared by all generators.
///
/// Streams: training data uses `seed`, test data `seed + 1` and noise
/// `seed + 2` unless overridden.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenerateOutput {
    /// Directory receiving `train.<ext>`, `test.<ext>` and `manifest.json`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,

    #[arg(long, default_value = "csv")]
    pub format: SnapshotFormat,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub test_seed: Option<u64>,

    /// Standard deviation of Gaussian noise added to the training pairs only.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    #[arg(long)]
    pub noise_seed: Option<u64>,
}

impl GenerateOutput {
    pub fn test_seed(&self) -> u64 {
        self.test_seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed.unwrap_or(self.seed.wrapping_add(2))
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PolymapArgs {
    /// Training pairs.
    #[arg(long, default_value_t = 100)]
    pub m: usize,

    /// Test pairs.
    #[arg(long, default_value_t = 100)]
    pub test: usize,

    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,

    #[arg(long, default_value_t = 0.8)]
    pub delta: f64,

    #[command(flatten)]
    #[serde(flatten)]
    pub output: GenerateOutput,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LinearArgs {
    /// Comma-separated eigenvalues such as `0.9,0.5+0.2i`. Complex entries
    /// bring their conjugate along.
    #[arg(long)]
    pub eigs: Option<String>,

    /// State dimension.
    #[arg(long, default_value_t = 10)]
    pub n: usize,

    #[arg(long, default_value_t = 50)]
    pub m: usize,

    #[arg(long, default_value_t = 50)]
    pub test: usize,

    /// Sample single trajectories instead of independent pairs.
    #[arg(long, default_value_t = false)]
    pub trajectory: bool,

    /// Sampling interval stored with trajectories.
    #[arg(long)]
    pub dt: Option<f64>,

    /// Seed for the random basis; defaults to `seed + 3`.
    #[arg(long)]
    pub system_seed: Option<u64>,

    #[command(flatten)]
    #[serde(flatten)]
    pub output: GenerateOutput,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OscillatorArgs {
    /// State dimension.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,

    /// Length of the series; it is split into a training prefix and a test suffix.
    #[arg(long, default_value_t = 2001)]
    pub snapshots: usize,

    /// Test pairs taken from the end of the series (default: half).
    #[arg(long)]
    pub test: Option<usize>,

    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,

    /// Sensor noise on the field; applies to the whole series.
    #[arg(long, default_value_t = 0.1)]
    pub sensor_noise: f64,

    #[command(flatten)]
    #[serde(flatten)]
    pub output: GenerateOutput,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DecomposeArgs {
    /// Training snapshot file (.csv or .bin).
    #[arg(long)]
    pub train: Option<PathBuf>,

    #[arg(long, default_value = "dmd")]
    pub method: Method,

    /// Truncation rank or `auto`.
    #[arg(long, default_value = "auto")]
    #[serde(deserialize_with = "string_or_int")]
    pub rank: String,

    /// Monomial dictionary for edmd: `percoord:<d>` or `total:<d>`.
    #[arg(long)]
    pub dictionary: Option<String>,

    /// Kernel for kdmd: `poly:<d>`, `exp`, `gauss:<sigma>`, `laplace:<sigma>` or `linear`.
    #[arg(long)]
    pub kernel: Option<String>,

    #[arg(long, default_value = "decomposition.json")]
    pub out: PathBuf,

    /// Also write the state-space modes (real parts as inputs, imaginary
    /// parts as images of a snapshot file).
    #[arg(long)]
    pub modes: Option<PathBuf>,

    /// Manifest path (default: next to `--out`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    /// Decomposition JSON written by `decompose`.
    #[arg(long)]
    pub decomposition: Option<PathBuf>,

    /// Held-out snapshot pairs. Required.
    #[arg(long)]
    pub test: Option<PathBuf>,

    #[arg(long, default_value = "abs_sum")]
    pub norm: NormVariant,

    /// Sampling interval for frequencies and growth rates (default: from the test file).
    #[arg(long)]
    pub dt: Option<f64>,

    /// Analytic reference: `polymap` or `polymap:<gamma>,<delta>`.
    #[arg(long)]
    pub analytic: Option<String>,

    #[arg(long, default_value_t = 20)]
    pub k_max: u32,

    #[arg(long, default_value_t = 20)]
    pub l_max: u32,

    /// Sequential data for time-averaged mode amplitudes.
    #[arg(long)]
    pub amplitudes: Option<PathBuf>,

    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,

    /// CSV table path (default: `--out` with a .csv extension).
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Only print eigenpairs with alpha at or below this value.
    #[arg(long)]
    pub alpha_max: Option<f64>,

    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    /// EDMD alpha, tau and theta on the polynomial map.
    Fig1,
    /// Eigenfunction grids for the (1,1) and (6,0) eigenpairs.
    Fig2,
    /// Four-kernel KDMD sweep.
    Fig3,
    /// Four-kernel KDMD sweep with noisy training data over several seeds.
    Fig4Noise,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReproduceArgs {
    pub figure: Figure,

    #[arg(long, default_value = "tables")]
    pub out_dir: PathBuf,

    /// Training seed; test data uses `seed + 1`.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value_t = 100)]
    pub m: usize,

    #[arg(long, default_value_t = 100)]
    pub test: usize,

    /// Training noise for fig4-noise.
    #[arg(long, default_value_t = 1e-3)]
    pub noise: f64,

    /// Number of consecutive seeds for fig4-noise.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
}

fn string_or_int<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Text(String),
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Int(n) => n.to_string(),
        Raw::Text(s) => s,
    })
}
