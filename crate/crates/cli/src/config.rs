//! Run configurations. Every subcommand's flags deserialize from the same
//! JSON object that `meanfield run` accepts, tagged by `"command"`.

use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use meanfield::{SpaceScale, TimeScale};

fn default_out() -> PathBuf {
    PathBuf::from("meanfield-out")
}
fn one() -> usize {
    1
}
fn default_grid() -> usize {
    101
}
fn default_pair() -> String {
    "1:0.5,-1:0.5".into()
}
fn default_h_max() -> usize {
    8
}
fn default_r() -> f64 {
    2.0
}
fn default_dt() -> f64 {
    1e-2
}
fn default_limit_dt() -> f64 {
    1e-3
}
fn default_truncation() -> usize {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SpaceScaleArg {
    SqrtN,
    Moderate,
}

impl From<SpaceScaleArg> for SpaceScale {
    fn from(s: SpaceScaleArg) -> Self {
        match s {
            SpaceScaleArg::SqrtN => SpaceScale::SqrtN,
            SpaceScaleArg::Moderate => SpaceScale::Moderate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum TimeScaleArg {
    Unit,
    NQuarter,
    NHalf,
}

impl From<TimeScaleArg> for TimeScale {
    fn from(s: TimeScaleArg) -> Self {
        match s {
            TimeScaleArg::Unit => TimeScale::Unit,
            TimeScaleArg::NQuarter => TimeScale::NQuarter,
            TimeScaleArg::NHalf => TimeScale::NHalf,
        }
    }
}

fn unit_scale() -> SpaceScaleArg {
    SpaceScaleArg::SqrtN
}
fn unit_time() -> TimeScaleArg {
    TimeScaleArg::Unit
}

/// Trajectory CSV layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Layout {
    /// One file with a `replica` column.
    #[default]
    Long,
    /// One file per replica.
    PerReplica,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SimulateCwConfig {
    #[arg(long)]
    pub beta: f64,
    /// Disorder law as `value:weight,...`.
    #[arg(long, default_value = "0:1")]
    #[serde(default = "zero_law")]
    pub law: String,
    #[arg(long)]
    pub n: usize,
    /// Horizon in observed time.
    #[arg(long)]
    pub t_end: f64,
    #[arg(long, default_value_t = default_grid())]
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// Initial probability of `+1` for every field value; the `m = 0`
    /// stationary profile when absent. Fluctuations are measured against it.
    #[arg(long)]
    #[serde(default)]
    pub p_plus: Option<f64>,
    #[arg(long, value_enum, default_value_t = unit_scale())]
    #[serde(default = "unit_scale")]
    pub space_scale: SpaceScaleArg,
    #[arg(long, value_enum, default_value_t = unit_time())]
    #[serde(default = "unit_time")]
    pub time_scale: TimeScaleArg,
    #[arg(long, default_value_t = one())]
    #[serde(default = "one")]
    pub replicas: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Layout::Long)]
    #[serde(default)]
    pub layout: Layout,
    #[arg(long = "out", default_value = "meanfield-out")]
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn zero_law() -> String {
    "0:1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SimulateKuramotoConfig {
    #[arg(long)]
    pub theta: f64,
    #[arg(long)]
    pub omega: f64,
    #[arg(long, default_value = "1:0.5,-1:0.5")]
    #[serde(default = "default_pair")]
    pub law: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = default_dt())]
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Horizon in observed time.
    #[arg(long)]
    pub t_end: f64,
    #[arg(long, default_value_t = default_grid())]
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[arg(long, default_value_t = default_h_max())]
    #[serde(default = "default_h_max")]
    pub h_max: usize,
    /// Sobolev weight exponent of the fluctuation norm.
    #[arg(long, default_value_t = default_r())]
    #[serde(default = "default_r")]
    pub r: f64,
    #[arg(long, value_enum, default_value_t = unit_scale())]
    #[serde(default = "unit_scale")]
    pub space_scale: SpaceScaleArg,
    #[arg(long, value_enum, default_value_t = unit_time())]
    #[serde(default = "unit_time")]
    pub time_scale: TimeScaleArg,
    #[arg(long, default_value_t = one())]
    #[serde(default = "one")]
    pub replicas: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Layout::Long)]
    #[serde(default)]
    pub layout: Layout,
    #[arg(long = "out", default_value = "meanfield-out")]
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Cw,
    Kuramoto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct MckeanVlasovConfig {
    #[arg(long, value_enum)]
    pub model: Model,
    /// Spin model inverse temperature.
    #[arg(long)]
    #[serde(default)]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub omega: Option<f64>,
    /// Disorder law; the model's usual default when absent.
    #[arg(long)]
    #[serde(default)]
    pub law: Option<String>,
    /// Spin model: initial probability of `+1` for every field value.
    #[arg(long, default_value_t = 0.6)]
    #[serde(default = "default_p_plus")]
    pub p_plus: f64,
    /// Rotators: initial density `∝ 1 + a cos x`.
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[arg(long, default_value_t = default_truncation())]
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[arg(long)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    #[serde(default = "default_mv_dt")]
    pub dt: f64,
    #[arg(long, default_value_t = 10)]
    #[serde(default = "default_record")]
    pub record_every: usize,
    #[arg(long = "out", default_value = "meanfield-out")]
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn default_p_plus() -> f64 {
    0.6
}
fn default_amplitude() -> f64 {
    0.5
}
fn default_mv_dt() -> f64 {
    1e-3
}
fn default_record() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long)]
    #[serde(default)]
    pub law: Option<String>,
    /// Spin model; defaults to the critical value.
    #[arg(long)]
    #[serde(default)]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub omega: Option<f64>,
    /// Rotators; defaults to the critical value.
    #[arg(long)]
    #[serde(default)]
    pub theta: Option<f64>,
    #[arg(long, default_value_t = default_truncation())]
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[arg(long = "out", default_value = "meanfield-out")]
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    /// `dY = −⅔Y³dt + 2dW`.
    CwCubic,
    /// `Y₀ = 2ℋt` for the given law and `β` (critical by default).
    CwRandomSlope,
    /// Two-dimensional cubic diffusion of the rotators.
    KuramotoCubic,
    /// Gaussian fluctuation system of the spin model.
    CwOu,
    /// Gaussian block of one rotator harmonic.
    KuramotoOu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct LimitSdeConfig {
    #[arg(long, value_enum)]
    pub kind: LimitKind,
    #[arg(long)]
    #[serde(default)]
    pub omega: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub law: Option<String>,
    /// Harmonic of the rotator Gaussian block.
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_harmonic")]
    pub harmonic: usize,
    #[arg(long)]
    pub t_end: f64,
    #[arg(long, default_value_t = default_limit_dt())]
    #[serde(default = "default_limit_dt")]
    pub dt: f64,
    #[arg(long, default_value_t = one())]
    #[serde(default = "one")]
    pub paths: usize,
    #[arg(long, default_value_t = 10)]
    #[serde(default = "default_record")]
    pub record_every: usize,
    /// Stop at the first time `‖V‖² ≥ r_stop`.
    #[arg(long)]
    #[serde(default)]
    pub r_stop: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long = "out", default_value = "meanfield-out")]
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn default_harmonic() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Named experiment, e.g. `thm-kuramoto-critical`.
    pub experiment: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    #[serde(default)]
    pub replicas: Option<usize>,
    /// Frequency spread for the rotator experiments.
    #[arg(long)]
    #[serde(default)]
    pub omega: Option<f64>,
    /// JSON object overriding the experiment's parameters.
    #[arg(long)]
    #[serde(default)]
    pub parameters: Option<String>,
    #[arg(long = "out", default_value = "meanfield-out")]
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EnsembleConfig {
    /// Spin-system replicas.
    Cw(SimulateCwConfig),
    /// Rotator replicas.
    Kuramoto(SimulateKuramotoConfig),
}

impl EnsembleConfig {
    pub fn output_dir(&self) -> &PathBuf {
        match self {
            EnsembleConfig::Cw(c) => &c.output_dir,
            EnsembleConfig::Kuramoto(c) => &c.output_dir,
        }
    }
}

/// Contents of a `meanfield run` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    SimulateCw(SimulateCwConfig),
    SimulateKuramoto(SimulateKuramotoConfig),
    MckeanVlasov(MckeanVlasovConfig),
    Analyze(AnalyzeConfig),
    LimitSde(LimitSdeConfig),
    Verify(VerifyConfig),
    Ensemble { spec: EnsembleConfig },
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::SimulateCw(_) => "simulate-cw",
            RunConfig::SimulateKuramoto(_) => "simulate-kuramoto",
            RunConfig::MckeanVlasov(_) => "mckean-vlasov",
            RunConfig::Analyze(_) => "analyze",
            RunConfig::LimitSde(_) => "limit-sde",
            RunConfig::Verify(_) => "verify",
            RunConfig::Ensemble { .. } => "ensemble",
        }
    }

    pub fn output_dir(&self) -> &PathBuf {
        match self {
            RunConfig::SimulateCw(c) => &c.output_dir,
            RunConfig::SimulateKuramoto(c) => &c.output_dir,
            RunConfig::MckeanVlasov(c) => &c.output_dir,
            RunConfig::Analyze(c) => &c.output_dir,
            RunConfig::LimitSde(c) => &c.output_dir,
            RunConfig::Verify(c) => &c.output_dir,
            RunConfig::Ensemble { spec } => spec.output_dir(),
        }
    }
}
