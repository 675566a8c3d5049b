//! `softpg`: fixtures, training, evaluation, attribute analysis, exact
//! oracles and gradient audits for the soft policy-gradient agent.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use softpg_core::env::AttributeId;
use softpg_core::trainer::{Mode, Preset};

#[derive(Parser, Debug)]
#[command(name = "softpg", version, about = "Soft policy-gradient attribute editing at desk scale")]
pub struct Cli {
    /// Master seed; its meaning depends on the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run configuration JSON (partial documents are merged onto the preset).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<PresetArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PresetArg {
    Desk,
    Paper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Soft,
    Vanilla,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Soft => Mode::Soft,
            ModeArg::Vanilla => Mode::Vanilla,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write an environment fixture (fixture.json).
    Fixture(FixtureArgs),
    /// Train a policy (metrics.csv, checkpoint.json, run.json).
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint against the exact grid optimum.
    Eval(EvalArgs),
    /// Attribute relevance report (correlations.csv, correlations.json).
    Analyze(AnalyzeArgs),
    /// Exact grid optimum of the scheduled attributes.
    Oracle(OracleArgs),
    /// Finite-difference audit of the surrogate loss gradient.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct FixtureArgs {
    /// Overwrite an existing fixture.json.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub obs_dim: Option<usize>,
    #[arg(long)]
    pub eps_dim: Option<usize>,
    #[arg(long)]
    pub dims_per_layer: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub probe: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Scheduled attribute as `layer,dim`; repeat for longer schedules.
    #[arg(long = "schedule")]
    pub schedule: Vec<AttributeId>,
    /// Comma-separated reward per action bin (single-step bandit fixture).
    #[arg(long, value_delimiter = ',')]
    pub reward_table: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub batch_episodes: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long = "schedule")]
    pub schedule: Vec<AttributeId>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Environment fixture; defaults to the one recorded in the checkpoint.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub episodes: usize,
    #[arg(long = "schedule")]
    pub schedule: Vec<AttributeId>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
    #[arg(long = "schedule")]
    pub schedule: Vec<AttributeId>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AggregationArg {
    Pooled,
    PerImageMean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PMethodArg {
    TApprox,
    Permutation,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub images: usize,
    /// Apply the decision rule to a published `layer,dim,rho,p_value,label`
    /// table instead of sweeping the fixture.
    #[arg(long, alias = "table1-replay")]
    pub replay: Option<PathBuf>,
    /// Optional `layer,dim,label` CSV naming swept attributes.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pooled")]
    pub aggregation: AggregationArg,
    #[arg(long, value_enum, default_value = "t-approx")]
    pub p_method: PMethodArg,
    #[arg(long, default_value_t = 0.3)]
    pub min_abs_rho: f64,
    #[arg(long, default_value_t = 0.01)]
    pub max_p_value: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SizeArg {
    Tiny,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "tiny")]
    pub size: SizeArg,
    /// Negate the analytic gradient of this parameter block (negative control).
    #[arg(long)]
    pub sign_flip: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOFTPG_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
