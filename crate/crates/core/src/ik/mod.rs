//! Learned inverse kinematics: dataset generation, network training, and
//! iterative refinement of network estimates.
//!
//! The data flow mirrors how the toolkit is used in practice. `generate_dataset`
//! draws range-of-motion-valid configurations and labels them with their
//! forward-kinematics tip state, `train_mlp` fits the fixed 6-20-9 network to
//! that data with a damped Gauss-Newton loop, `ik_infer` evaluates the network,
//! and `ik_refine` polishes any estimate with damped least squares until the
//! tip position residual is at numerical noise.

mod mlp;
mod refine;
mod train;

pub use mlp::{
    ik_infer, IkPrediction, Mlp, Standardizer, HIDDEN_DIM, INPUT_DIM, MODEL_FORMAT, OUTPUT_DIM,
    PARAM_COUNT,
};
pub use refine::{ik_refine, RefineConfig, RefineOutcome};
pub use train::{train_mlp, StopReason, TrainConfig, TrainReport};

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::kinematics::{fk_position, fk_velocity};
use crate::limb::{sample_configuration, sample_rates, JointState, LimbModel};
use crate::quat::PureQuaternion;
use crate::trajectory::TrajectorySample;

/// Column order used by every dataset file.
pub const DATASET_HEADER: &str =
    "xd,yd,zd,vxd,vyd,vzd,theta1,theta2,theta3,n1x,n1y,n1z,n3x,n3y,n3z";

/// Joint rates in the training data are drawn uniformly from this band (rad/s).
pub const DATASET_MAX_RATE: f64 = 1.0;

/// One supervised pair: the tip state that was observed and the joint
/// configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct IkSample {
    /// Tip position (m) followed by tip velocity (m/s).
    pub input: [f64; INPUT_DIM],
    /// Joint angles (rad) followed by the hip and ankle axis components.
    pub target: [f64; OUTPUT_DIM],
}

impl IkSample {
    pub fn from_state(model: &LimbModel, state: &JointState, rates: [f64; 3]) -> Result<Self> {
        let position = fk_position(model, state)?;
        let velocity = fk_velocity(model, state, &crate::limb::JointRates { theta_dot: rates })?;
        Ok(IkSample {
            input: [
                position.x, position.y, position.z, velocity.x, velocity.y, velocity.z,
            ],
            target: [
                state.theta[0],
                state.theta[1],
                state.theta[2],
                state.hip_axis.x,
                state.hip_axis.y,
                state.hip_axis.z,
                state.ankle_axis.x,
                state.ankle_axis.y,
                state.ankle_axis.z,
            ],
        })
    }

    pub fn state(&self) -> JointState {
        JointState::new(
            [self.target[0], self.target[1], self.target[2]],
            PureQuaternion::new(self.target[3], self.target[4], self.target[5]),
            PureQuaternion::new(self.target[6], self.target[7], self.target[8]),
        )
    }

    pub fn position(&self) -> PureQuaternion {
        PureQuaternion::new(self.input[0], self.input[1], self.input[2])
    }

    pub fn velocity(&self) -> PureQuaternion {
        PureQuaternion::new(self.input[3], self.input[4], self.input[5])
    }
}

/// Draws the sample at `index`. Each index gets its own generator stream, so
/// the dataset for a given seed is identical no matter how the index range is
/// partitioned across callers.
///
/// Targets are stored in canonical axis form ([`JointState::canonical_axes`]):
/// without it the data holds both mirrored representations of every posture
/// and a least-squares fit averages them toward zero, which costs roughly a
/// factor of two in task-space accuracy.
fn sample_row(model: &LimbModel, seed: u64, index: u64) -> Result<IkSample> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    let state = sample_configuration(model, &mut rng)?.canonical_axes();
    let rates = sample_rates(&mut rng, DATASET_MAX_RATE);
    IkSample::from_state(model, &state, rates.theta_dot)
}

/// Generates `count` labelled samples in memory.
pub fn generate_dataset(model: &LimbModel, count: usize, seed: u64) -> Result<Vec<IkSample>> {
    (0..count as u64)
        .map(|i| sample_row(model, seed, i))
        .collect()
}

fn write_sample_row<W: Write>(w: &mut W, sample: &IkSample) -> Result<()> {
    let mut line = String::with_capacity(256);
    for (i, v) in sample.input.iter().chain(&sample.target).enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(&format!("{v}"));
    }
    line.push('\n');
    w.write_all(line.as_bytes())?;
    Ok(())
}

/// Writes a dataset in CSV form, generating rows on the fly so arbitrarily
/// large datasets never need to fit in memory.
pub fn write_dataset<W: Write>(model: &LimbModel, count: usize, seed: u64, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{DATASET_HEADER}")?;
    for i in 0..count as u64 {
        let sample = sample_row(model, seed, i)?;
        write_sample_row(&mut w, &sample)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes already-generated samples in the same CSV form.
pub fn write_samples<W: Write>(samples: &[IkSample], out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{DATASET_HEADER}")?;
    for sample in samples {
        write_sample_row(&mut w, sample)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a dataset written by [`write_dataset`].
pub fn parse_dataset<R: Read>(input: R) -> Result<Vec<IkSample>> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("dataset: empty file".to_string()))??;
    if header.trim_end() != DATASET_HEADER {
        return Err(Error::Parse(format!(
            "dataset: unexpected header {:?}",
            header.trim_end()
        )));
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut values = [0.0; INPUT_DIM + OUTPUT_DIM];
        let mut fields = line.split(',');
        for (col, slot) in values.iter_mut().enumerate() {
            let field = fields.next().ok_or_else(|| {
                Error::Parse(format!(
                    "dataset: line {} has {} fields, expected {}",
                    lineno + 2,
                    col,
                    INPUT_DIM + OUTPUT_DIM
                ))
            })?;
            *slot = field.trim().parse::<f64>().map_err(|e| {
                Error::Parse(format!("dataset: line {}: {e}", lineno + 2))
            })?;
        }
        if fields.next().is_some() {
            return Err(Error::Parse(format!(
                "dataset: line {} has more than {} fields",
                lineno + 2,
                INPUT_DIM + OUTPUT_DIM
            )));
        }
        let mut input = [0.0; INPUT_DIM];
        input.copy_from_slice(&values[..INPUT_DIM]);
        let mut target = [0.0; OUTPUT_DIM];
        target.copy_from_slice(&values[INPUT_DIM..]);
        samples.push(IkSample { input, target });
    }
    Ok(samples)
}

pub fn read_dataset(path: &Path) -> Result<Vec<IkSample>> {
    let file = std::fs::File::open(path)?;
    parse_dataset(file)
}

/// Tip position error at one trajectory sample, desired minus achieved.
#[derive(Debug, Clone, Copy)]
pub struct ErrorSample {
    pub time: f64,
    pub error: [f64; 3],
}

/// Accuracy of a solver over a trajectory: root-mean-square error per axis,
/// the full error series for plotting, and how long the solver itself took.
#[derive(Debug, Clone)]
pub struct RmseReport {
    pub per_axis: [f64; 3],
    pub series: Vec<ErrorSample>,
    pub solve_seconds: f64,
}

impl RmseReport {
    fn from_errors(series: Vec<ErrorSample>, solve_seconds: f64) -> Self {
        let n = series.len().max(1) as f64;
        let mut sq = [0.0; 3];
        for e in &series {
            for a in 0..3 {
                sq[a] += e.error[a] * e.error[a];
            }
        }
        RmseReport {
            per_axis: [(sq[0] / n).sqrt(), (sq[1] / n).sqrt(), (sq[2] / n).sqrt()],
            series,
            solve_seconds,
        }
    }
}

/// Evaluates an arbitrary solver over a planned trajectory: for each sample
/// the solver produces a joint configuration whose forward kinematics is
/// compared with the desired position. `solve_seconds` covers only the
/// solver calls.
pub fn evaluate_rmse_with<F>(
    model: &LimbModel,
    samples: &[TrajectorySample],
    mut solve: F,
) -> Result<RmseReport>
where
    F: FnMut(&TrajectorySample) -> Result<JointState>,
{
    let start = Instant::now();
    let states = samples.iter().map(&mut solve).collect::<Result<Vec<JointState>>>()?;
    let solve_seconds = start.elapsed().as_secs_f64();
    let mut series = Vec::with_capacity(samples.len());
    for (s, state) in samples.iter().zip(&states) {
        let achieved = fk_position(model, state)?;
        series.push(ErrorSample {
            time: s.time,
            error: [
                s.position.x - achieved.x,
                s.position.y - achieved.y,
                s.position.z - achieved.z,
            ],
        });
    }
    Ok(RmseReport::from_errors(series, solve_seconds))
}

/// Evaluates the network alone: each desired state is pushed through the
/// network and the prediction compared against the desired position.
pub fn evaluate_rmse(
    mlp: &Mlp,
    model: &LimbModel,
    samples: &[TrajectorySample],
) -> Result<RmseReport> {
    evaluate_rmse_with(model, samples, |s| Ok(ik_infer(mlp, s.position, s.velocity).state))
}

/// Evaluates the full solver: network estimate followed by damped
/// least-squares refinement toward each desired position.
pub fn evaluate_rmse_refined(
    mlp: &Mlp,
    model: &LimbModel,
    samples: &[TrajectorySample],
    config: &RefineConfig,
) -> Result<RmseReport> {
    evaluate_rmse_with(model, samples, |s| {
        let guess = ik_infer(mlp, s.position, s.velocity).state;
        Ok(ik_refine(model, &guess, s.position, config)?.state)
    })
}
