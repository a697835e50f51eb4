//! Output formats and atomic file handling shared by the subcommands.
//!
//! Every artifact is written to a temporary sibling and renamed into place,
//! so a failing stage never leaves a partial file behind. All numeric CSV
//! fields use the shortest round-trippable decimal form, which makes the
//! files bit-reproducible for a given configuration and seed.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dqlimb::error::{Error, Result};
use dqlimb::ik::ErrorSample;
use dqlimb::limb::JointState;
use dqlimb::trajectory::TrajectorySample;
use dqlimb::PureQuaternion;

pub const TRAJECTORY_HEADER: &str = "t,x,y,z,vx,vy,vz,ax,ay,az,jx,jy,jz";
pub const JOINTS_HEADER: &str = "t,theta1,theta2,theta3,n1x,n1y,n1z,n3x,n3y,n3z";
pub const ERRORS_HEADER: &str = "t,ex,ey,ez";
pub const TORQUES_HEADER: &str = "t,tau1,tau2,tau3";
pub const ENERGY_HEADER: &str = "t,cumulative";

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".to_string());
    path.with_file_name(format!("{name}.tmp{}", std::process::id()))
}

/// Writes `bytes` to `path` atomically: temp file first, rename on success.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = temp_sibling(path);
    let result = fs::write(&tmp, bytes).and_then(|()| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

/// Streams output produced by `fill` to `path` atomically.
pub fn atomic_stream<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = temp_sibling(path);
    let run = (|| -> Result<()> {
        let mut writer = BufWriter::new(File::create(&tmp)?);
        fill(&mut writer)?;
        writer.flush()?;
        Ok(())
    })();
    match run {
        Ok(()) => fs::rename(&tmp, path).map_err(Error::from),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn csv_line(values: &[f64]) -> String {
    let mut line = String::with_capacity(16 * values.len());
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(&format!("{v}"));
    }
    line.push('\n');
    line
}

pub fn render_trajectory_csv(samples: &[TrajectorySample]) -> String {
    let mut text = String::from(TRAJECTORY_HEADER);
    text.push('\n');
    for s in samples {
        text.push_str(&csv_line(&[
            s.time,
            s.position.x,
            s.position.y,
            s.position.z,
            s.velocity.x,
            s.velocity.y,
            s.velocity.z,
            s.acceleration.x,
            s.acceleration.y,
            s.acceleration.z,
            s.jerk.x,
            s.jerk.y,
            s.jerk.z,
        ]));
    }
    text
}

pub fn render_joints_csv(rows: &[(f64, JointState)]) -> String {
    let mut text = String::from(JOINTS_HEADER);
    text.push('\n');
    for (t, s) in rows {
        text.push_str(&csv_line(&[
            *t,
            s.theta[0],
            s.theta[1],
            s.theta[2],
            s.hip_axis.x,
            s.hip_axis.y,
            s.hip_axis.z,
            s.ankle_axis.x,
            s.ankle_axis.y,
            s.ankle_axis.z,
        ]));
    }
    text
}

pub fn render_errors_csv(series: &[ErrorSample]) -> String {
    let mut text = String::from(ERRORS_HEADER);
    text.push('\n');
    for e in series {
        text.push_str(&csv_line(&[e.time, e.error[0], e.error[1], e.error[2]]));
    }
    text
}

pub fn render_torques_csv(rows: &[(f64, [f64; 3])]) -> String {
    let mut text = String::from(TORQUES_HEADER);
    text.push('\n');
    for (t, tau) in rows {
        text.push_str(&csv_line(&[*t, tau[0], tau[1], tau[2]]));
    }
    text
}

pub fn render_energy_csv(rows: &[(f64, f64)]) -> String {
    let mut text = String::from(ENERGY_HEADER);
    text.push('\n');
    for (t, e) in rows {
        text.push_str(&csv_line(&[*t, *e]));
    }
    text
}

fn parse_csv(path: &Path, header: &str) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|_| missing(path))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))??;
    if first.trim_end() != header {
        return Err(Error::Parse(format!(
            "{}: unexpected header {:?}",
            path.display(),
            first.trim_end()
        )));
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse(format!("{}: line {}: {e}", path.display(), i + 2)))?;
        if row.len() != width {
            return Err(Error::Parse(format!(
                "{}: line {} has {} fields, expected {width}",
                path.display(),
                i + 2,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn missing(path: &Path) -> Error {
    Error::MissingArtifact(path.display().to_string())
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectorySample>> {
    let rows = parse_csv(path, TRAJECTORY_HEADER)?;
    Ok(rows
        .into_iter()
        .map(|r| TrajectorySample {
            time: r[0],
            position: PureQuaternion::new(r[1], r[2], r[3]),
            velocity: PureQuaternion::new(r[4], r[5], r[6]),
            acceleration: PureQuaternion::new(r[7], r[8], r[9]),
            jerk: PureQuaternion::new(r[10], r[11], r[12]),
        })
        .collect())
}

pub fn read_joints_csv(path: &Path) -> Result<Vec<(f64, JointState)>> {
    let rows = parse_csv(path, JOINTS_HEADER)?;
    Ok(rows
        .into_iter()
        .map(|r| {
            (
                r[0],
                JointState::new(
                    [r[1], r[2], r[3]],
                    PureQuaternion::new(r[4], r[5], r[6]),
                    PureQuaternion::new(r[7], r[8], r[9]),
                ),
            )
        })
        .collect())
}

pub fn read_torques_csv(path: &Path) -> Result<Vec<(f64, [f64; 3])>> {
    let rows = parse_csv(path, TORQUES_HEADER)?;
    Ok(rows.into_iter().map(|r| (r[0], [r[1], r[2], r[3]])).collect())
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let rows = parse_csv(path, ENERGY_HEADER)?;
    Ok(rows.into_iter().map(|r| (r[0], r[1])).collect())
}

#[derive(Serialize, Deserialize)]
pub struct EnergyReportFile {
    pub format: String,
    pub duration_seconds: f64,
    /// Closed-form integral of squared task-space jerk over the trajectory.
    pub jerk_energy: f64,
    /// The same integral estimated from sampled positions alone.
    pub jerk_energy_estimate: f64,
    /// Qualitative published bound the value is reported against; the
    /// comparison is order-of-magnitude only.
    pub reference_bound: f64,
}

pub const ENERGY_FORMAT: &str = "dqlimb-energy/1";

#[derive(Serialize, Deserialize)]
pub struct TrainReportFile {
    pub format: String,
    pub epochs: usize,
    pub final_loss: f64,
    pub stop: String,
    pub wall_seconds: f64,
    pub validation_rmse: Vec<f64>,
}

pub const TRAIN_REPORT_FORMAT: &str = "dqlimb-train-report/1";

#[derive(Serialize, Deserialize)]
pub struct IkReportFile {
    pub format: String,
    pub samples: usize,
    pub rmse: Vec<f64>,
    pub refined_rmse: Vec<f64>,
    pub inference_seconds: f64,
    pub refine_seconds: f64,
    pub refine_tolerance: f64,
}

pub const IK_REPORT_FORMAT: &str = "dqlimb-ik-report/1";

#[derive(Serialize, Deserialize)]
pub struct VerifyFile {
    pub format: String,
    pub passed: bool,
    pub checks: Vec<CheckEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
}

pub const VERIFY_FORMAT: &str = "dqlimb-verify/1";

#[derive(Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub trajectory: ReportTrajectory,
    pub ik: ReportIk,
    pub training: ReportTraining,
    pub dynamics: ReportDynamics,
    pub checks: Vec<CheckEntry>,
}

#[derive(Serialize, Deserialize)]
pub struct ReportTrajectory {
    pub samples: usize,
    pub duration_seconds: f64,
    pub jerk_energy: f64,
    pub jerk_energy_estimate: f64,
    pub jerk_energy_reference_bound: f64,
}

#[derive(Serialize, Deserialize)]
pub struct ReportIk {
    pub rmse: Vec<f64>,
    pub refined_rmse: Vec<f64>,
    pub inference_seconds: f64,
    pub refine_seconds: f64,
}

#[derive(Serialize, Deserialize)]
pub struct ReportTraining {
    pub epochs: usize,
    pub final_loss: f64,
    pub stop: String,
    pub wall_seconds: f64,
}

#[derive(Serialize, Deserialize)]
pub struct ReportDynamics {
    pub peak_torque: Vec<f64>,
    /// Final value of the cumulative squared-joint-jerk integral.
    pub joint_jerk_energy: f64,
    pub jerk_energy_reference_bound: f64,
}

pub const REPORT_FORMAT: &str = "dqlimb-report/1";

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value)
        .map_err(|e| Error::Parse(format!("{}: serialization: {e}", path.display())))?;
    atomic_write(path, text.as_bytes())
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|_| missing(path))?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
