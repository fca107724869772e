use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod commands;
mod config;

/// Water-body segmentation of satellite rasters by multifractal analysis.
#[derive(Debug, Parser)]
#[command(name = "mfwater", version)]
struct Cli {
    /// Worker threads; outputs do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON object of flag values for the subcommand (snake_case keys)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-pixel Hölder exponents of a raster band
    AlphaMap(AlphaMapArgs),
    /// Coarse or Legendre multifractal spectrum
    #[command(subcommand)]
    Spectrum(SpectrumCommand),
    /// Per-pixel f(alpha) from an alpha map and its coarse spectrum
    Fmap(FmapArgs),
    /// Water masks from spectrum thresholds or NDWI
    #[command(subcommand)]
    Segment(SegmentCommand),
    /// Majority filter over a mask
    FilterMajority(FilterArgs),
    /// Confusion matrix and metrics of a test mask against a reference
    Compare(CompareArgs),
    /// Synthetic cascades and scenes
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Neural-network baseline
    #[command(subcommand)]
    Mlp(MlpCommand),
}

#[derive(Debug, Subcommand)]
enum SpectrumCommand {
    Coarse(CoarseArgs),
    Legendre(LegendreArgs),
}

#[derive(Debug, Subcommand)]
enum SegmentCommand {
    Mf(SegmentMfArgs),
    Ndwi(NdwiArgs),
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    Cascade(SynthCascadeArgs),
    Scene(SynthSceneArgs),
}

#[derive(Debug, Subcommand)]
enum MlpCommand {
    Train(MlpTrainArgs),
    Predict(MlpPredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Sensor {
    /// Windows k = 2..9
    Optical,
    /// Windows k = 3..9
    Sar,
}

/// Raster input and analysis window, shared by the analyzing subcommands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct AnalysisArgs {
    /// Raster file: JSON sidecar or binary PGM
    #[arg(long)]
    input: Option<PathBuf>,
    /// Band name; defaults to the first band
    #[arg(long)]
    band: Option<String>,
    #[arg(long, value_enum)]
    sensor: Option<Sensor>,
    /// Window ladder k values (window widths 2k-1), overriding --sensor
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Side of the analyzed square; defaults to the largest power of two that fits with the padding
    #[arg(long)]
    core: Option<usize>,
    /// Core origin; defaults to centred
    #[arg(long)]
    core_x: Option<usize>,
    #[arg(long)]
    core_y: Option<usize>,
    /// Margin read around the core; defaults to the largest window half-width
    #[arg(long)]
    pad: Option<usize>,
    /// Radiometric gain applied before analysis
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    offset: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct AlphaMapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    analysis: AnalysisArgs,
    /// Mark pixels whose fit has a lower r² as invalid
    #[arg(long)]
    min_r2: Option<f64>,
    /// Output sidecar raster with bands "alpha" and "r2" (NaN = invalid)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct CoarseArgs {
    /// Alpha map written by alpha-map; alternative to --input
    #[arg(long)]
    alpha: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    analysis: AnalysisArgs,
    /// Number of alpha classes
    #[arg(long)]
    classes: Option<usize>,
    /// Output CSV (alpha,f,count)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct LegendreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    analysis: AnalysisArgs,
    #[arg(long, allow_hyphen_values = true)]
    q_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q_max: Option<f64>,
    #[arg(long)]
    q_step: Option<f64>,
    /// Output CSV (alpha,f,count)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write tau(q) as CSV (q,tau,r2)
    #[arg(long)]
    tau_output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct FmapArgs {
    /// Alpha map written by alpha-map
    #[arg(long)]
    alpha: Option<PathBuf>,
    /// Coarse spectrum CSV
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Least-squares polynomial of this degree instead of linear interpolation
    #[arg(long)]
    degree: Option<usize>,
    /// Output sidecar raster with band "f_alpha"
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct SegmentMfArgs {
    #[command(flatten)]
    #[serde(flatten)]
    analysis: AnalysisArgs,
    /// Precomputed alpha map; use together with --fmap instead of --input
    #[arg(long)]
    alpha: Option<PathBuf>,
    #[arg(long)]
    fmap: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_hi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    f_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    f_hi: Option<f64>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    /// Apply a majority filter with this odd kernel size
    #[arg(long)]
    majority: Option<usize>,
    /// Output mask PGM
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct NdwiArgs {
    /// Multi-band sidecar raster
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    red_band: Option<String>,
    #[arg(long)]
    swir_band: Option<String>,
    #[arg(long)]
    majority: Option<usize>,
    /// Also write the index as a sidecar raster band "ndwi" (NaN = undefined)
    #[arg(long)]
    index_output: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct FilterArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct CompareArgs {
    /// Mask under test
    test: Option<PathBuf>,
    /// Reference mask
    reference: Option<PathBuf>,
    /// JSON report; printed to stdout when omitted
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct CascadeFlags {
    /// Four weights summing to 1
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    depth: Option<u32>,
    /// Permute the weights at every subdivision with this seed
    #[arg(long)]
    shuffle_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct SynthCascadeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    cascade: CascadeFlags,
    /// Periodic margin added on every side
    #[arg(long)]
    pad: Option<usize>,
    /// Output sidecar raster
    #[arg(long)]
    output: Option<PathBuf>,
    /// Analytic Legendre spectrum CSV
    #[arg(long)]
    analytic_output: Option<PathBuf>,
    /// Analytic tau(q) CSV
    #[arg(long)]
    tau_output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct SynthSceneArgs {
    /// Side of the core (ground-truth) region
    #[arg(long)]
    side: Option<usize>,
    /// Land margin around the core
    #[arg(long)]
    margin: Option<usize>,
    /// Water rectangle x,y,w,h in core coordinates; repeatable
    #[arg(long = "water")]
    water: Option<Vec<String>>,
    #[arg(long)]
    water_level: Option<f64>,
    #[arg(long)]
    noise_amp: Option<f64>,
    /// Land cascade weights
    #[arg(long, value_delimiter = ',')]
    land_weights: Option<Vec<f64>>,
    #[arg(long)]
    land_depth: Option<u32>,
    #[arg(long)]
    land_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write a five-band reflectance scene (blue, green, red, nir, swir) instead
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    reflectance: Option<bool>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Ground-truth mask PGM
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OptimizerKind {
    Scg,
    Gd,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct MlpTrainArgs {
    /// Feature raster (sidecar)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Training labels
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Bands used as features, in order; defaults to all
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<String>>,
    /// Hidden layer sizes
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerKind>,
    /// Step size for --optimizer gd
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Standardize inputs (default true)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize: Option<bool>,
    /// Model JSON
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct MlpPredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<String>>,
    #[arg(long)]
    majority: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl From<mfwater::Error> for CliError {
    fn from(e: mfwater::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = cli.config.as_deref().map(config::load).transpose()?;
    let cfg = cfg.as_ref();
    use config::merge;
    match cli.command {
        Command::AlphaMap(a) => commands::alpha_map(merge(a, cfg)?),
        Command::Spectrum(SpectrumCommand::Coarse(a)) => commands::spectrum_coarse(merge(a, cfg)?),
        Command::Spectrum(SpectrumCommand::Legendre(a)) => commands::spectrum_legendre(merge(a, cfg)?),
        Command::Fmap(a) => commands::fmap(merge(a, cfg)?),
        Command::Segment(SegmentCommand::Mf(a)) => commands::segment_mf(merge(a, cfg)?),
        Command::Segment(SegmentCommand::Ndwi(a)) => commands::segment_ndwi(merge(a, cfg)?),
        Command::FilterMajority(a) => commands::filter_majority(merge(a, cfg)?),
        Command::Compare(a) => commands::compare(merge(a, cfg)?),
        Command::Synth(SynthCommand::Cascade(a)) => commands::synth_cascade(merge(a, cfg)?),
        Command::Synth(SynthCommand::Scene(a)) => commands::synth_scene(merge(a, cfg)?),
        Command::Mlp(MlpCommand::Train(a)) => commands::mlp_train(merge(a, cfg)?),
        Command::Mlp(MlpCommand::Predict(a)) => commands::mlp_predict(merge(a, cfg)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mfwater: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
