//! Batch front end for the lower-limb toolkit. Each subcommand reads its
//! inputs, writes plot-ready data files into the output directory and prints
//! a one-line summary; `pipeline` chains every stage. Exit code 0 means
//! success, 1 a validation problem with the input (the diagnostic names the
//! offending field), 2 a numerical failure such as diverged training.

pub mod commands;
pub mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use dqlimb::error::{Error, Result};
use dqlimb::limb::{load_limb_config, LimbModel};
use dqlimb::PureQuaternion;

#[derive(Parser)]
#[command(
    name = "dqlimb",
    version,
    about = "Dual-quaternion lower-limb toolkit: planning, kinematics, learned \
             inverse kinematics and dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Plan a minimum-jerk task-space trajectory and its jerk-energy report
    Plan(PlanArgs),
    /// Forward kinematics of one joint state, with optional joint rates
    Fk(FkArgs),
    /// Generate an inverse kinematics training dataset
    Dataset(DatasetArgs),
    /// Train the inverse kinematics network on a dataset file
    Train(TrainArgs),
    /// Solve inverse kinematics along a planned trajectory
    Ik(IkArgs),
    /// Inverse dynamics torques along a solved joint trajectory
    Dynamics(DynamicsArgs),
    /// Run every stage: plan, dataset, train, ik, dynamics, verify, report
    Pipeline(PipelineArgs),
    /// Run the oracle checks and report pass/fail for each
    Verify(VerifyArgs),
}

fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {:?}", s));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number {:?}: {e}", part.trim()))?;
        if !slot.is_finite() {
            return Err(format!("value {:?} is not finite", part.trim()));
        }
    }
    Ok(out)
}

#[derive(Args, Clone)]
pub struct CommonArgs {
    /// Limb model TOML; the built-in anthropometric model when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory for artifacts
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

impl CommonArgs {
    pub fn model(&self) -> Result<LimbModel> {
        match &self.config {
            Some(path) => {
                if !path.exists() {
                    return Err(Error::validation(
                        "--config",
                        format!("no such file: {}", path.display()),
                    ));
                }
                load_limb_config(path)
            }
            None => Ok(LimbModel::default()),
        }
    }
}

#[derive(Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Trajectory duration in seconds
    #[arg(long, value_name = "T", default_value_t = dqlimb::trajectory::DEFAULT_DURATION)]
    pub duration: f64,

    /// Number of evenly spaced samples
    #[arg(long, value_name = "N", default_value_t = 500)]
    pub samples: usize,

    /// Start position "x,y,z" in meters
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple)]
    pub start: Option<[f64; 3]>,

    /// End position "x,y,z" in meters
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple)]
    pub end: Option<[f64; 3]>,
}

#[derive(Args)]
pub struct FkArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Joint angles "theta1,theta2,theta3" in radians
    #[arg(long, value_name = "T1,T2,T3", value_parser = parse_triple)]
    pub theta: [f64; 3],

    /// Hip rotation axis "x,y,z" (unit vector)
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple, default_value = "0,0,1")]
    pub hip_axis: [f64; 3],

    /// Ankle rotation axis "x,y,z" (unit vector)
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple, default_value = "0,0,1")]
    pub ankle_axis: [f64; 3],

    /// Joint angle rates "r1,r2,r3" in rad/s; prints tip velocity when given
    #[arg(long, value_name = "R1,R2,R3", value_parser = parse_triple)]
    pub rates: Option<[f64; 3]>,
}

#[derive(Args)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Seed for configuration sampling
    #[arg(long, value_name = "N", default_value_t = 42)]
    pub seed: u64,

    /// Number of samples to generate
    #[arg(long, value_name = "N", default_value_t = 400_000)]
    pub dataset_size: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Dataset CSV; defaults to dataset.csv in the output directory
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,

    /// Seed for weight initialization and batch shuffling
    #[arg(long, value_name = "N", default_value_t = dqlimb::ik::TrainConfig::default().seed)]
    pub seed: u64,

    /// Maximum training epochs
    #[arg(long, value_name = "N", default_value_t = dqlimb::ik::TrainConfig::default().max_epochs)]
    pub epochs: usize,

    /// Rows per Levenberg-Marquardt batch
    #[arg(long, value_name = "N", default_value_t = dqlimb::ik::TrainConfig::default().batch_size)]
    pub batch_size: usize,
}

#[derive(Args)]
pub struct IkArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Trained model TOML; defaults to model.toml in the output directory
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,

    /// Trajectory CSV; defaults to trajectory.csv in the output directory
    #[arg(long, value_name = "PATH")]
    pub trajectory: Option<PathBuf>,
}

#[derive(Args)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Joint trajectory CSV; defaults to joints.csv in the output directory
    #[arg(long, value_name = "PATH")]
    pub joints: Option<PathBuf>,
}

#[derive(Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Seed for dataset sampling
    #[arg(long, value_name = "N", default_value_t = 42)]
    pub seed: u64,

    /// Trajectory sample count
    #[arg(long, value_name = "N", default_value_t = 500)]
    pub samples: usize,

    /// Trajectory duration in seconds
    #[arg(long, value_name = "T", default_value_t = dqlimb::trajectory::DEFAULT_DURATION)]
    pub duration: f64,

    /// Training dataset size
    #[arg(long, value_name = "N", default_value_t = 400_000)]
    pub dataset_size: usize,

    /// Maximum training epochs
    #[arg(long, value_name = "N", default_value_t = dqlimb::ik::TrainConfig::default().max_epochs)]
    pub epochs: usize,

    /// Start position "x,y,z" in meters
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple)]
    pub start: Option<[f64; 3]>,

    /// End position "x,y,z" in meters
    #[arg(long, value_name = "X,Y,Z", value_parser = parse_triple)]
    pub end: Option<[f64; 3]>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn triple(v: [f64; 3]) -> PureQuaternion {
    PureQuaternion::new(v[0], v[1], v[2])
}

/// Parses `argv` and runs the selected subcommand, mapping errors to the
/// documented exit codes.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Plan(args) => commands::cmd_plan(&args),
        Command::Fk(args) => commands::cmd_fk(&args),
        Command::Dataset(args) => commands::cmd_dataset(&args),
        Command::Train(args) => commands::cmd_train(&args),
        Command::Ik(args) => commands::cmd_ik(&args),
        Command::Dynamics(args) => commands::cmd_dynamics(&args),
        Command::Pipeline(args) => commands::cmd_pipeline(&args),
        Command::Verify(args) => commands::cmd_verify(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
