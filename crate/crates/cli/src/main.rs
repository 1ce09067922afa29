//! `croscale`: synthesize worlds, sample datasets, train the encoders and
//! run belief-map inference and particle-filter localization from the shell.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use croscale_core::PixelCoord;

#[derive(Debug, Parser)]
#[command(name = "croscale", version, about = "Cross-scale geo-localization toolkit")]
pub struct Cli {
    /// Master seed. Overrides every seed in config and trajectory files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world: map.csrr, obs.csrr and the terrain mask.
    Synth(SynthArgs),
    /// Sample a dataset of data tuples with train/val/test splits.
    Sample(SampleArgs),
    /// Train both encoders on the train split of a dataset.
    Train(TrainArgs),
    /// Encode a map patch into a belief map.
    EncodeMap(EncodeMapArgs),
    /// Encode observations into a representation set.
    EncodeObs(EncodeObsArgs),
    /// Score one observation against a belief map.
    Infer(InferArgs),
    /// Particle-filter localization along a simulated trajectory.
    Filter(FilterArgs),
    /// Recall@k% of trained encoders or exported belief maps.
    EvalRecall(EvalRecallArgs),
    /// Render the argmax class of every belief-map pixel.
    RenderSeg(RenderSegArgs),
    /// Sample belief values along a segment.
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Experiment config (key=value).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    /// Train+val tuples; defaults to `dataset.n_trainval`.
    #[arg(long)]
    pub n_tuples: Option<usize>,
    /// Test tuples; defaults to `dataset.n_test`.
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Parameter file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss curve CSV (epoch, loss, lr).
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeMapArgs {
    #[arg(long)]
    pub params: PathBuf,
    /// Map patch raster.
    #[arg(long)]
    pub patch: PathBuf,
    /// Belief map file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeObsArgs {
    #[arg(long)]
    pub params: PathBuf,
    /// Tuple directory; records carry the tuple's truth pixels.
    #[arg(long, conflicts_with_all = ["obs", "source"])]
    pub tuple: Option<PathBuf>,
    /// Observation rasters, in order; records carry no truth pixel.
    #[arg(long, conflicts_with = "source")]
    pub obs: Vec<PathBuf>,
    /// Observation-modality source raster to crop along `--traj`.
    #[arg(long, requires = "traj")]
    pub source: Option<PathBuf>,
    /// Trajectory config; one observation per truth pose.
    #[arg(long, requires = "source")]
    pub traj: Option<PathBuf>,
    /// Crop size for `--source`, observation pixels.
    #[arg(long, default_value_t = 224)]
    pub size: usize,
    /// Map patch whose pixel grid gives truth pixels for `--source` crops.
    #[arg(long, requires = "source")]
    pub patch: Option<PathBuf>,
    /// Representation set to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub belief: PathBuf,
    /// Representation set.
    #[arg(long)]
    pub obs_rep: PathBuf,
    /// Record of the representation set to score.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = 5.0)]
    pub theta: f64,
    /// Raw log-density, row-major little-endian f32.
    #[arg(long)]
    pub out_heat: Option<PathBuf>,
    /// Min-max normalized heat map; PGM or PNG by extension.
    #[arg(long)]
    pub out_png: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterMode {
    Dirichlet,
    SoftmaxCosine,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub belief: PathBuf,
    /// One representation per trajectory pose.
    #[arg(long)]
    pub obs_reps: PathBuf,
    /// Trajectory config.
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, value_enum, default_value_t = FilterMode::Dirichlet)]
    pub mode: FilterMode,
    #[arg(long, default_value_t = 5.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 500)]
    pub particles: usize,
    /// Map patch the belief map was encoded from; gives its geo-reference.
    /// Without it the belief map sits at the world origin.
    #[arg(long)]
    pub patch: Option<PathBuf>,
    /// Belief-map scale (pixel/m) when no `--patch` is given.
    #[arg(long, default_value_t = 1.0, conflicts_with = "patch")]
    pub scale: f64,
    /// Track CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary CSV (median errors and reduction).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalRecallArgs {
    /// Trained parameters; use with `--data`.
    #[arg(long, requires = "data", conflicts_with_all = ["belief", "exports"])]
    pub params: Option<PathBuf>,
    #[arg(long, requires = "params")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Belief maps, paired in order with `--reps`.
    #[arg(long, requires = "reps")]
    pub belief: Vec<PathBuf>,
    #[arg(long)]
    pub reps: Vec<PathBuf>,
    /// Directory of `NAME.csbm` + `NAME.csrv` pairs.
    #[arg(long, conflicts_with = "belief")]
    pub exports: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0, conflicts_with = "select_theta")]
    pub theta: f64,
    /// Pick theta from the default grid on the val split.
    #[arg(long, requires = "params")]
    pub select_theta: bool,
    /// Recall thresholds, percent of the map.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 5.0])]
    pub ks: Vec<f64>,
    /// Also report untrained encoders of the same shape.
    #[arg(long, requires = "params")]
    pub baseline: bool,
    /// Summary CSV (k_percent, recall).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderSegArgs {
    #[arg(long)]
    pub belief: PathBuf,
    /// Image to write; PNG or PGM by extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub belief: PathBuf,
    /// Start pixel `u,v`.
    #[arg(long, value_parser = parse_pixel)]
    pub from: PixelCoord,
    /// End pixel `u,v`.
    #[arg(long, value_parser = parse_pixel)]
    pub to: PixelCoord,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// CSV to write; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_pixel(s: &str) -> Result<PixelCoord, String> {
    let (u, v) = s
        .split_once(',')
        .ok_or_else(|| format!("expected u,v, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok(PixelCoord::new(parse(u)?, parse(v)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
