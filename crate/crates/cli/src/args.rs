use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use qrem_core::Correction;

#[derive(Debug, Parser)]
#[command(name = "qrem", version, about = "Readout error mitigation for sparse measurement outcomes")]
pub struct Cli {
    /// Worker threads for the parallel kernels (default: available cores).
    #[arg(long, global = true, env = "QREM_THREADS")]
    pub threads: Option<usize>,

    #[command(flatten)]
    pub caps: Caps,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Caps {
    /// Largest subspace the proposed method accepts.
    #[arg(long, global = true, env = "QREM_SUBSPACE_CAP", default_value_t = qrem_core::mitigator::SUBSPACE_HARD_CAP)]
    pub subspace_cap: usize,

    /// Largest qubit count for the full-space inversion baseline.
    #[arg(long, global = true, env = "QREM_RIGOROUS_MAX_QUBITS", default_value_t = qrem_core::noise_model::DEFAULT_FULL_QUBIT_CAP)]
    pub rigorous_max_qubits: usize,

    /// Largest intermediate support of the truncated sequential baseline.
    #[arg(long, global = true, env = "QREM_MOONEY_SUPPORT_CAP", default_value_t = qrem_core::baselines::DEFAULT_SUPPORT_CAP)]
    pub mooney_support_cap: usize,

    /// Largest support of an exactly propagated noisy distribution; larger
    /// ones are sampled flip by flip.
    #[arg(long, global = true, env = "QREM_SIM_SUPPORT_CAP", default_value_t = qrem_core::sim::DEFAULT_SIM_SUPPORT_CAP)]
    pub sim_support_cap: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mitigate a counts file with a calibration file.
    Mitigate(MitigateArgs),
    /// Write a synthetic single-qubit calibration model.
    CalibrateSynth(CalibrateArgs),
    /// Simulate GHZ readout counts.
    GhzSim(GhzArgs),
    /// Simulate the population and phase-rotated readouts of an MQC run.
    MqcSim(MqcArgs),
    /// Simulate readout after m modified Grover iterations.
    GroverSim(GroverArgs),
    /// Expectation value of a diagonal observable.
    Expval(ExpvalArgs),
    /// GHZ fidelity from an MQC manifest.
    Fidelity(FidelityArgs),
    /// Amplitude estimation experiment under readout noise.
    MlaeSim(MlaeArgs),
    /// Time the pipeline on synthetic sparse inputs.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// proposed, proposed-<correction>, rigorous, mooney:<threshold>, or raw.
    #[arg(long, default_value = "proposed")]
    pub method: String,

    /// Step-2 correction for the proposed method: least-norm, delta,
    /// delta-exact:<k>.
    #[arg(long, default_value = "least-norm", value_parser = parse_correction)]
    pub correction: Correction,

    /// Extend the measured subspace by this Hamming radius.
    #[arg(long, default_value_t = 0)]
    pub radius: usize,

    /// Stream rows instead of storing the reduced inverse.
    #[arg(long)]
    pub matrix_free: bool,
}

pub fn parse_correction(s: &str) -> Result<Correction, String> {
    s.parse().map_err(|e: qrem_core::QremError| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Probability of reading 0 when 1 was prepared.
    #[arg(long = "noise-p01", default_value_t = 0.0)]
    pub p01: f64,

    /// Probability of reading 1 when 0 was prepared.
    #[arg(long = "noise-p10", default_value_t = 0.0)]
    pub p10: f64,

    /// Use this calibration file as the noise channel instead.
    #[arg(long, conflicts_with_all = ["p01", "p10"])]
    pub noise_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MitigateArgs {
    #[arg(long)]
    pub counts: PathBuf,

    #[arg(long)]
    pub calibration: PathBuf,

    #[command(flatten)]
    pub method: MethodArgs,

    /// Mitigated distribution (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Report with overhead, error bar, sums and timings.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub n: usize,

    /// Probability of reading 0 when 1 was prepared.
    #[arg(long, default_value_t = 0.03)]
    pub p01: f64,

    /// Probability of reading 1 when 0 was prepared.
    #[arg(long, default_value_t = 0.03)]
    pub p10: f64,

    /// Per-qubit overrides as `p01:p10,p01:p10,...` (one pair per qubit).
    #[arg(long, conflicts_with_all = ["p01", "p10"])]
    pub per_qubit: Option<String>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GhzArgs {
    #[arg(long)]
    pub n: usize,

    /// Shots to sample; 0 writes the exact noisy distribution.
    #[arg(long, default_value_t = 8192)]
    pub shots: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub noise: NoiseArgs,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MqcArgs {
    #[arg(long)]
    pub n: usize,

    /// Number of phase angles (default 2n+2).
    #[arg(long)]
    pub angles: Option<usize>,

    #[arg(long, default_value_t = 8192)]
    pub shots: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub noise: NoiseArgs,

    /// Directory receiving the manifest and one counts file per circuit.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroverArgs {
    /// Qubits encoding the integration variable; the register has n+1.
    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub m: u64,

    #[arg(long, default_value_t = 0.5)]
    pub bmax: f64,

    /// Override the target angle instead of deriving it from `bmax`.
    #[arg(long)]
    pub theta: Option<f64>,

    #[arg(long, default_value_t = qrem_core::sim::DEFAULT_RESIDUAL_SUPPORT)]
    pub residual: usize,

    #[arg(long, default_value_t = 100)]
    pub shots: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub noise: NoiseArgs,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Convention {
    /// Divide by the element sum.
    Normalized,
    /// Plain weighted sum.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ObservableKind {
    Parity,
    /// Projector on the all-zeros string.
    Zeros,
    /// Projector on all-zeros plus all-ones.
    Ghz,
}

#[derive(Debug, Args)]
pub struct ExpvalArgs {
    #[arg(long)]
    pub counts: PathBuf,

    /// Mitigate first with this calibration.
    #[arg(long)]
    pub calibration: Option<PathBuf>,

    #[command(flatten)]
    pub method: MethodArgs,

    #[arg(long, value_enum, default_value = "parity")]
    pub observable: ObservableKind,

    #[arg(long, value_enum, default_value = "normalized")]
    pub convention: Convention,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    /// Manifest written by `mqc-sim` (or by hand, same layout).
    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long)]
    pub calibration: Option<PathBuf>,

    #[command(flatten)]
    pub method: MethodArgs,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MlaeArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,

    #[arg(long, default_value_t = 0.5)]
    pub bmax: f64,

    #[arg(long, default_value_t = 100)]
    pub shots: u64,

    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
    pub iterations: Vec<u64>,

    /// Symmetric flip probabilities to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0,0.03")]
    pub noise: Vec<f64>,

    /// Post-processing methods, e.g. `raw,proposed-least-norm,mooney:0.01`.
    #[arg(long = "method", value_delimiter = ',', default_value = "raw,proposed-least-norm")]
    pub methods: Vec<String>,

    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = qrem_core::sim::DEFAULT_RESIDUAL_SUPPORT)]
    pub residual: usize,

    #[arg(long, default_value_t = qrem_core::mlae::DEFAULT_GRID_POINTS)]
    pub grid: usize,

    /// JSON report (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Error-vs-queries table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "65")]
    pub qubits: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_value = "1024,2048,4096,8192")]
    pub sizes: Vec<usize>,

    /// Symmetric flip probability of the synthetic inputs and the model.
    #[arg(long, default_value_t = 0.03)]
    pub p: f64,

    #[arg(long, default_value = "least-norm", value_parser = parse_correction)]
    pub correction: Correction,

    #[arg(long)]
    pub matrix_free: bool,

    /// Best of this many runs per row.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// CSV table (stdout when omitted).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
