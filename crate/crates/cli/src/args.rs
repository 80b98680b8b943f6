use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use masi_core::{Framework, QtcVariant, ScenarioSpec, ToleranceSet};

#[derive(Debug, Parser)]
#[command(name = "masi", version, about = "Multi-agent spatial interaction prediction with QTC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trajectory scene.
    Synth(SynthArgs),
    /// Enumerate a QTC dictionary by kinematic sampling.
    BuildDict(BuildDictArgs),
    /// Cluster a scene and write a split dataset.
    MakeDataset(MakeDatasetArgs),
    /// Train a model on a dataset.
    Train(TrainCommand),
    /// Score a checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Train on one dataset and evaluate on its test split and on all of another.
    DomainShift(DomainShiftArgs),
    /// Compare analytic gradients with finite differences on a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scene {
    /// Every interaction primitive.
    Suite,
    /// Random-waypoint walkers only.
    RandomWaypoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    C1,
    C2,
}

impl From<VariantArg> for QtcVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::C1 => QtcVariant::C1,
            VariantArg::C2 => QtcVariant::C2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameworkArg {
    Qtc4,
    Qtc6,
    Ts,
}

impl From<FrameworkArg> for Framework {
    fn from(f: FrameworkArg) -> Self {
        match f {
            FrameworkArg::Qtc4 => Framework::Qtc4,
            FrameworkArg::Qtc6 => Framework::Qtc6,
            FrameworkArg::Ts => Framework::Ts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct ToleranceArgs {
    /// Dead band on distance changes and minimum separation, meters.
    #[arg(long, default_value_t = 1e-3)]
    pub eps_distance: f64,
    /// Dead band on unit-vector cross products.
    #[arg(long, default_value_t = 1e-3)]
    pub eps_cross: f64,
    /// Dead band on speed differences, meters per second.
    #[arg(long, default_value_t = 1e-3)]
    pub eps_speed: f64,
    /// Dead band on angle differences, radians.
    #[arg(long, default_value_t = 1e-3)]
    pub eps_angle: f64,
}

impl ToleranceArgs {
    pub fn tolerances(&self) -> ToleranceSet {
        ToleranceSet {
            distance: self.eps_distance,
            cross: self.eps_cross,
            speed: self.eps_speed,
            angle: self.eps_angle,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = Scene::Suite)]
    pub scene: Scene,
    /// Scene seed.
    #[arg(long, env = "MASI_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub agents: usize,
    /// Frames.
    #[arg(long, default_value_t = 5000)]
    pub duration: usize,
    /// Frames per second.
    #[arg(long, default_value_t = 15.0)]
    pub rate: f64,
    /// Static objects [default: 3 for suite, 0 for random-waypoint].
    #[arg(long)]
    pub static_objects: Option<usize>,
    /// Trajectory CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Static-object CSV to write.
    #[arg(long)]
    pub objects_out: Option<PathBuf>,
}

impl SynthArgs {
    pub fn spec(&self) -> ScenarioSpec {
        let base = match self.scene {
            Scene::Suite => ScenarioSpec::suite(self.seed),
            Scene::RandomWaypoint => ScenarioSpec::random_waypoint(self.seed),
        };
        ScenarioSpec {
            agents: self.agents,
            duration: self.duration,
            rate: self.rate,
            static_objects: self.static_objects.unwrap_or(base.static_objects),
            ..base
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BuildDictArgs {
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    /// Pair configurations per sampling pass.
    #[arg(long, default_value_t = 400_000)]
    pub samples: usize,
    /// Sampling seed [default: the built-in sampling seed].
    #[arg(long, env = "MASI_SEED")]
    pub seed: Option<u64>,
    /// Frames per second of the sampled motion.
    #[arg(long, default_value_t = 15.0)]
    pub rate: f64,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
    /// Dictionary file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the deviation report if the count differs from the expected one.
    #[arg(long)]
    pub deviation_report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MakeDatasetArgs {
    /// Trajectory CSV (`frame,agent_id,x,y`).
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Static-object CSV (`object_id,x,y`).
    #[arg(long)]
    pub objects: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: FrameworkArg,
    /// Dictionary file; required for qtc4 and qtc6.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Cluster radius, meters.
    #[arg(long, default_value_t = 1.2)]
    pub radius: f64,
    /// History steps [default: 10 for qtc4/qtc6, 5 for ts].
    #[arg(long)]
    pub history: Option<usize>,
    /// Forecast steps.
    #[arg(long, default_value_t = 48)]
    pub horizon: usize,
    /// Frames between window starts.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Slot count; must not be below the scene's [default: computed].
    #[arg(long)]
    pub n_star: Option<usize>,
    /// Recorded split seed.
    #[arg(long, env = "MASI_SEED", default_value_t = 0)]
    pub split_seed: u64,
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
    /// Dataset file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// History steps used by the model; at most the dataset's [default: 10 for qtc4/qtc6, 5 for ts].
    #[arg(long)]
    pub history: Option<usize>,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    /// Batch size [default: 10 for qtc4/qtc6, 5 for ts].
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Epochs [default: 120 for qtc4/qtc6, 80 for ts].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initialization and shuffling seed.
    #[arg(long, env = "MASI_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Global gradient-norm clip.
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    /// Disable gradient clipping.
    #[arg(long)]
    pub no_clip: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainCommand {
    /// Must match the dataset's framework.
    #[arg(long, value_enum)]
    pub variant: FrameworkArg,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Forecast steps; must match the dataset's [default: the dataset's].
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Checkpoint file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for the training-history CSV.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Dictionaries for QTC extraction from coordinate forecasts (repeatable).
    #[arg(long)]
    pub dict: Vec<PathBuf>,
    /// Samples per normalization batch [default: the checkpoint's batch size].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Inference threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Directory for report and attention CSVs.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DomainShiftArgs {
    #[arg(long, value_enum)]
    pub variant: FrameworkArg,
    /// Dataset to train on and test on its test split.
    #[arg(long)]
    pub source: PathBuf,
    /// Dataset evaluated in full.
    #[arg(long)]
    pub target: PathBuf,
    /// Dictionaries for QTC extraction from coordinate forecasts (repeatable).
    #[arg(long)]
    pub dict: Vec<PathBuf>,
    /// Inference threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Directory for the report CSVs.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Checkpoint file to write.
    #[arg(long)]
    pub checkpoint_out: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum)]
    pub variant: FrameworkArg,
    #[arg(long, default_value_t = 8)]
    pub hidden: usize,
    #[arg(long, default_value_t = 8)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub n_star: usize,
    #[arg(long, default_value_t = 4)]
    pub history: usize,
    #[arg(long, default_value_t = 3)]
    pub horizon: usize,
    /// Random samples in the checked batch.
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    /// Dictionary size for symbolic variants [default: 82 for qtc4, 640 for qtc6].
    #[arg(long)]
    pub dict_size: Option<usize>,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Maximum relative error per parameter block.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, env = "MASI_SEED", default_value_t = 0)]
    pub seed: u64,
}
