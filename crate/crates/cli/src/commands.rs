//! Implementations of the subcommands. All stages communicate through files
//! in the output directory, so each one can be rerun in isolation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dqlimb::error::{Error, Result};
use dqlimb::ik::{
    self, ik_infer, ik_refine, train_mlp, ErrorSample, Mlp, RefineConfig, TrainConfig,
};
use dqlimb::kinematics::{fk_position, fk_velocity};
use dqlimb::limb::{within_rom, JointAccels, JointRates, JointState, LimbModel};
use dqlimb::trajectory::{
    jerk_energy_from_positions, plan_min_jerk, BoundaryState, TrajectorySample, DEFAULT_END,
    DEFAULT_START,
};
use dqlimb::verify::run_standard_checks;
use dqlimb::{PureQuaternion, Wrench};

use crate::io;
use crate::{
    triple, DatasetArgs, DynamicsArgs, FkArgs, IkArgs, PipelineArgs, PlanArgs, TrainArgs,
    VerifyArgs,
};

/// Published qualitative bound the jerk-energy value is reported against.
pub const JERK_ENERGY_REFERENCE_BOUND: f64 = 0.4;

fn fmt3(v: [f64; 3]) -> String {
    format!("({:.6}, {:.6}, {:.6})", v[0], v[1], v[2])
}

fn plan_samples(
    start: Option<[f64; 3]>,
    end: Option<[f64; 3]>,
    duration: f64,
    count: usize,
) -> Result<(Vec<TrajectorySample>, f64)> {
    let start = start.map(triple).unwrap_or(DEFAULT_START);
    let end = end.map(triple).unwrap_or(DEFAULT_END);
    let plan = plan_min_jerk(
        &BoundaryState::at_rest(start),
        &BoundaryState::at_rest(end),
        duration,
    )?;
    Ok((plan.sample(count)?, plan.jerk_cost()))
}

fn write_plan_artifacts(
    out: &Path,
    samples: &[TrajectorySample],
    jerk_energy: f64,
    duration: f64,
) -> Result<()> {
    io::atomic_write(
        &out.join("trajectory.csv"),
        io::render_trajectory_csv(samples).as_bytes(),
    )?;

    let mut cumulative = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    for pair in samples.windows(2) {
        if cumulative.is_empty() {
            cumulative.push((pair[0].time, 0.0));
        }
        let h = pair[1].time - pair[0].time;
        acc += 0.5 * h * (pair[0].jerk.dot(pair[0].jerk) + pair[1].jerk.dot(pair[1].jerk));
        cumulative.push((pair[1].time, acc));
    }
    io::atomic_write(
        &out.join("energy.csv"),
        io::render_energy_csv(&cumulative).as_bytes(),
    )?;

    let positions: Vec<PureQuaternion> = samples.iter().map(|s| s.position).collect();
    let report = io::EnergyReportFile {
        format: io::ENERGY_FORMAT.to_string(),
        duration_seconds: duration,
        jerk_energy,
        jerk_energy_estimate: jerk_energy_from_positions(&positions, duration)?,
        reference_bound: JERK_ENERGY_REFERENCE_BOUND,
    };
    io::write_toml(&out.join("energy.toml"), &report)
}

pub fn cmd_plan(args: &PlanArgs) -> Result<()> {
    let out = &args.common.out;
    let (samples, jerk_energy) = plan_samples(args.start, args.end, args.duration, args.samples)?;
    write_plan_artifacts(out, &samples, jerk_energy, args.duration)?;
    let first = samples[0].position;
    println!(
        "planned {} samples over {} s, first position ({}, {}, {}), jerk energy {:.6} -> {}",
        samples.len(),
        args.duration,
        first.x,
        first.y,
        first.z,
        jerk_energy,
        out.join("trajectory.csv").display()
    );
    Ok(())
}

fn unit_axis_flag(flag: &str, v: [f64; 3]) -> Result<PureQuaternion> {
    let axis = triple(v);
    let defect = (axis.norm() - 1.0).abs();
    if !defect.is_finite() || defect > 1e-9 {
        return Err(Error::validation(
            flag,
            format!("must be a unit vector, norm deviates by {defect:.3e}"),
        ));
    }
    Ok(axis)
}

pub fn cmd_fk(args: &FkArgs) -> Result<()> {
    let model = args.common.model()?;
    let state = JointState::new(
        args.theta,
        unit_axis_flag("--hip-axis", args.hip_axis)?,
        unit_axis_flag("--ankle-axis", args.ankle_axis)?,
    );
    let check = within_rom(&model, &state)?;
    if !check.ok() {
        let list: Vec<String> = check.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::validation("--theta", list.join("; ")));
    }
    let tip = fk_position(&model, &state)?;
    match args.rates {
        Some(rates) => {
            let vel = fk_velocity(&model, &state, &JointRates { theta_dot: rates })?;
            println!(
                "tip ({}, {}, {}) m, velocity ({}, {}, {}) m/s",
                tip.x, tip.y, tip.z, vel.x, vel.y, vel.z
            );
        }
        None => println!("tip ({}, {}, {}) m", tip.x, tip.y, tip.z),
    }
    Ok(())
}

pub fn cmd_dataset(args: &DatasetArgs) -> Result<()> {
    let model = args.common.model()?;
    let path = args.common.out.join("dataset.csv");
    io::atomic_stream(&path, |w| ik::write_dataset(&model, args.dataset_size, args.seed, w))?;
    println!(
        "wrote {} inverse kinematics samples (seed {}) -> {}",
        args.dataset_size,
        args.seed,
        path.display()
    );
    Ok(())
}

fn train_on_file(
    model_path: &Path,
    report_path: &Path,
    dataset_path: &Path,
    config: &TrainConfig,
) -> Result<String> {
    if !dataset_path.exists() {
        return Err(io::missing(dataset_path));
    }
    let dataset = ik::read_dataset(dataset_path)?;
    let (mlp, report) = train_mlp(&dataset, config)?;
    io::atomic_write(model_path, mlp.render().as_bytes())?;
    io::write_toml(
        report_path,
        &io::TrainReportFile {
            format: io::TRAIN_REPORT_FORMAT.to_string(),
            epochs: report.epochs,
            final_loss: report.final_loss,
            stop: report.stop.as_str().to_string(),
            wall_seconds: report.wall_seconds,
            validation_rmse: report.validation_rmse.to_vec(),
        },
    )?;
    Ok(format!(
        "trained {} epochs in {:.1} s on {} samples (stop: {}), final loss {:.6} -> {}",
        report.epochs,
        report.wall_seconds,
        dataset.len(),
        report.stop,
        report.final_loss,
        model_path.display()
    ))
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let out = &args.common.out;
    let dataset_path = args.dataset.clone().unwrap_or_else(|| out.join("dataset.csv"));
    let config = TrainConfig {
        max_epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let line = train_on_file(
        &out.join("model.toml"),
        &out.join("train_report.toml"),
        &dataset_path,
        &config,
    )?;
    println!("{line}");
    Ok(())
}

fn load_mlp(path: &Path) -> Result<Mlp> {
    if !path.exists() {
        return Err(io::missing(path));
    }
    Mlp::load(path)
}

/// Runs the network over the trajectory, then refines each sample. The
/// refiner is warm-started from the previous refined state so the joint
/// series stays continuous across the redundant degrees of freedom; when a
/// warm start fails to converge the network's own guess is retried, and it
/// replaces the warm result only on a clear improvement, since near the
/// workspace boundary many postures tie to within the solver tolerance and
/// hopping between them would shred the series.
fn solve_ik(
    out: &Path,
    model: &LimbModel,
    mlp: &Mlp,
    samples: &[TrajectorySample],
) -> Result<String> {
    let network = ik::evaluate_rmse(mlp, model, samples)?;

    let refine = RefineConfig::default();
    let tracking = RefineConfig { stall_restart: false, ..RefineConfig::default() };
    let started = Instant::now();
    let mut joints = Vec::with_capacity(samples.len());
    let mut previous: Option<JointState> = None;
    for s in samples {
        let guess = ik_infer(mlp, s.position, s.velocity).state;
        let mut outcome = match previous {
            Some(prev) => ik_refine(model, &prev, s.position, &tracking)?,
            None => ik_refine(model, &guess, s.position, &refine)?,
        };
        if !outcome.converged && previous.is_some() {
            let from_net = ik_refine(model, &guess, s.position, &refine)?;
            if from_net.residual < 0.5 * outcome.residual {
                outcome = from_net;
            }
        }
        previous = Some(outcome.state);
        joints.push((s.time, outcome.state));
    }
    let refine_seconds = started.elapsed().as_secs_f64();

    let mut refined_series = Vec::with_capacity(samples.len());
    let mut sq = [0.0; 3];
    for (s, (_, state)) in samples.iter().zip(&joints) {
        let achieved = fk_position(model, state)?;
        let error = [
            s.position.x - achieved.x,
            s.position.y - achieved.y,
            s.position.z - achieved.z,
        ];
        for a in 0..3 {
            sq[a] += error[a] * error[a];
        }
        refined_series.push(ErrorSample { time: s.time, error });
    }
    let n = samples.len().max(1) as f64;
    let refined_rmse = [(sq[0] / n).sqrt(), (sq[1] / n).sqrt(), (sq[2] / n).sqrt()];

    io::atomic_write(&out.join("errors.csv"), io::render_errors_csv(&network.series).as_bytes())?;
    io::atomic_write(
        &out.join("errors_refined.csv"),
        io::render_errors_csv(&refined_series).as_bytes(),
    )?;
    io::atomic_write(&out.join("joints.csv"), io::render_joints_csv(&joints).as_bytes())?;
    io::write_toml(
        &out.join("ik_report.toml"),
        &io::IkReportFile {
            format: io::IK_REPORT_FORMAT.to_string(),
            samples: samples.len(),
            rmse: network.per_axis.to_vec(),
            refined_rmse: refined_rmse.to_vec(),
            inference_seconds: network.solve_seconds,
            refine_seconds,
            refine_tolerance: refine.tolerance,
        },
    )?;
    Ok(format!(
        "network rmse {} m, refined rmse {} m, inference {:.4} s -> {}",
        fmt3(network.per_axis),
        fmt3(refined_rmse),
        network.solve_seconds,
        out.join("joints.csv").display()
    ))
}

pub fn cmd_ik(args: &IkArgs) -> Result<()> {
    let out = &args.common.out;
    let model = args.common.model()?;
    let trajectory_path = args.trajectory.clone().unwrap_or_else(|| out.join("trajectory.csv"));
    let model_path = args.model.clone().unwrap_or_else(|| out.join("model.toml"));
    let samples = io::read_trajectory_csv(&trajectory_path)?;
    let mlp = load_mlp(&model_path)?;
    let line = solve_ik(out, &model, &mlp, &samples)?;
    println!("{line}");
    Ok(())
}

/// Shifts each angle series by whole turns so consecutive samples never jump
/// across the wrap at pi, which would wreck the finite differences.
fn unwrap_angles(rows: &mut [(f64, JointState)]) {
    use std::f64::consts::TAU;
    for j in 0..3 {
        for i in 1..rows.len() {
            let prev = rows[i - 1].1.theta[j];
            let theta = &mut rows[i].1.theta[j];
            *theta -= TAU * ((*theta - prev) / TAU).round();
        }
    }
}

fn torque_series(
    model: &LimbModel,
    rows: &[(f64, JointState)],
) -> Result<Vec<(f64, [f64; 3])>> {
    if rows.len() < 5 {
        return Err(Error::validation(
            "joints file",
            format!("need at least 5 rows for finite differences, got {}", rows.len()),
        ));
    }
    let h = rows[1].0 - rows[0].0;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::validation("joints file", "time column must be increasing"));
    }
    for pair in rows.windows(2) {
        if ((pair[1].0 - pair[0].0) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::validation("joints file", "time column must be evenly spaced"));
        }
    }

    let n = rows.len();
    let th = |i: usize, j: usize| rows[i].1.theta[j];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rate = [0.0; 3];
        let mut accel = [0.0; 3];
        for j in 0..3 {
            (rate[j], accel[j]) = if i == 0 {
                (
                    (-3.0 * th(0, j) + 4.0 * th(1, j) - th(2, j)) / (2.0 * h),
                    (2.0 * th(0, j) - 5.0 * th(1, j) + 4.0 * th(2, j) - th(3, j)) / (h * h),
                )
            } else if i == n - 1 {
                (
                    (3.0 * th(n - 1, j) - 4.0 * th(n - 2, j) + th(n - 3, j)) / (2.0 * h),
                    (2.0 * th(n - 1, j) - 5.0 * th(n - 2, j) + 4.0 * th(n - 3, j)
                        - th(n - 4, j))
                        / (h * h),
                )
            } else {
                (
                    (th(i + 1, j) - th(i - 1, j)) / (2.0 * h),
                    (th(i + 1, j) - 2.0 * th(i, j) + th(i - 1, j)) / (h * h),
                )
            };
        }
        let torques = dqlimb::dynamics::inverse_dynamics(
            model,
            &rows[i].1,
            &JointRates { theta_dot: rate },
            &JointAccels { theta_ddot: accel },
            &Wrench::ZERO,
        )?
        .joint_torques;
        out.push((rows[i].0, torques));
    }
    Ok(out)
}

/// Cumulative integral of the squared joint jerk, from central third
/// differences of the angle series. Defined on the interior samples where
/// the five-point stencil fits.
fn joint_jerk_energy_series(rows: &[(f64, JointState)], h: f64) -> Vec<(f64, f64)> {
    let n = rows.len();
    let mut series = Vec::with_capacity(n.saturating_sub(4));
    let mut acc = 0.0;
    let mut prev = None;
    for i in 2..n - 2 {
        let mut sum_sq = 0.0;
        for j in 0..3 {
            let jerk = (rows[i + 2].1.theta[j] - 2.0 * rows[i + 1].1.theta[j]
                + 2.0 * rows[i - 1].1.theta[j]
                - rows[i - 2].1.theta[j])
                / (2.0 * h * h * h);
            sum_sq += jerk * jerk;
        }
        if let Some(p) = prev {
            acc += 0.5 * h * (p + sum_sq);
        }
        series.push((rows[i].0, acc));
        prev = Some(sum_sq);
    }
    series
}

fn run_dynamics(out: &Path, model: &LimbModel, joints_path: &Path) -> Result<String> {
    let mut rows = io::read_joints_csv(joints_path)?;
    unwrap_angles(&mut rows);
    let torques = torque_series(model, &rows)?;
    io::atomic_write(&out.join("torques.csv"), io::render_torques_csv(&torques).as_bytes())?;
    let h = rows[1].0 - rows[0].0;
    let energy = joint_jerk_energy_series(&rows, h);
    io::atomic_write(&out.join("joint_energy.csv"), io::render_energy_csv(&energy).as_bytes())?;
    let mut peak = [0.0_f64; 3];
    for (_, tau) in &torques {
        for j in 0..3 {
            peak[j] = peak[j].max(tau[j].abs());
        }
    }
    Ok(format!(
        "wrote {} torque samples, peak |tau| {} N m, joint jerk energy {:.6} -> {}",
        torques.len(),
        fmt3(peak),
        energy.last().map(|e| e.1).unwrap_or(0.0),
        out.join("torques.csv").display()
    ))
}

pub fn cmd_dynamics(args: &DynamicsArgs) -> Result<()> {
    let out = &args.common.out;
    let model = args.common.model()?;
    let joints_path = args.joints.clone().unwrap_or_else(|| out.join("joints.csv"));
    let line = run_dynamics(out, &model, &joints_path)?;
    println!("{line}");
    Ok(())
}

fn run_verify(out: &Path, model: &LimbModel) -> Result<(Vec<io::CheckEntry>, usize)> {
    let outcomes = run_standard_checks(model)?;
    let mut entries = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for check in &outcomes {
        let status = if check.passed { "pass" } else { "FAIL" };
        println!("{}: {} ({})", check.name, status, check.detail);
        if !check.passed {
            failed += 1;
        }
        entries.push(io::CheckEntry { name: check.name.to_string(), passed: check.passed });
    }
    io::write_toml(
        &out.join("verify.toml"),
        &io::VerifyFile {
            format: io::VERIFY_FORMAT.to_string(),
            passed: failed == 0,
            checks: entries.clone(),
        },
    )?;
    Ok((entries, failed))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    let model = args.common.model()?;
    let (entries, failed) = run_verify(&args.common.out, &model)?;
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} of {} checks failed", entries.len())));
    }
    println!("all {} checks passed", entries.len());
    Ok(())
}

/// Assembles the pipeline report from the artifacts already on disk. Pure in
/// the file contents, so regenerating from unchanged artifacts is
/// byte-identical.
pub fn emit_report(out: &Path) -> Result<PathBuf> {
    let trajectory = io::read_trajectory_csv(&out.join("trajectory.csv"))?;
    let energy: io::EnergyReportFile = io::read_toml(&out.join("energy.toml"))?;
    let training: io::TrainReportFile = io::read_toml(&out.join("train_report.toml"))?;
    let ik_report: io::IkReportFile = io::read_toml(&out.join("ik_report.toml"))?;
    let torques = io::read_torques_csv(&out.join("torques.csv"))?;
    let joint_energy = io::read_energy_csv(&out.join("joint_energy.csv"))?;
    let verify: io::VerifyFile = io::read_toml(&out.join("verify.toml"))?;

    let mut peak = [0.0_f64; 3];
    for (_, tau) in &torques {
        for j in 0..3 {
            peak[j] = peak[j].max(tau[j].abs());
        }
    }
    let duration = trajectory.last().map(|s| s.time).unwrap_or(0.0);

    let report = io::ReportFile {
        format: io::REPORT_FORMAT.to_string(),
        trajectory: io::ReportTrajectory {
            samples: trajectory.len(),
            duration_seconds: duration,
            jerk_energy: energy.jerk_energy,
            jerk_energy_estimate: energy.jerk_energy_estimate,
            jerk_energy_reference_bound: energy.reference_bound,
        },
        ik: io::ReportIk {
            rmse: ik_report.rmse,
            refined_rmse: ik_report.refined_rmse,
            inference_seconds: ik_report.inference_seconds,
            refine_seconds: ik_report.refine_seconds,
        },
        training: io::ReportTraining {
            epochs: training.epochs,
            final_loss: training.final_loss,
            stop: training.stop,
            wall_seconds: training.wall_seconds,
        },
        dynamics: io::ReportDynamics {
            peak_torque: peak.to_vec(),
            joint_jerk_energy: joint_energy.last().map(|e| e.1).unwrap_or(0.0),
            jerk_energy_reference_bound: JERK_ENERGY_REFERENCE_BOUND,
        },
        checks: verify.checks,
    };
    let path = out.join("report.toml");
    io::write_toml(&path, &report)?;
    Ok(path)
}

pub fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let out = &args.common.out;
    let model = args.common.model()?;

    let (samples, jerk_energy) = plan_samples(args.start, args.end, args.duration, args.samples)?;
    write_plan_artifacts(out, &samples, jerk_energy, args.duration)?;
    println!(
        "plan: {} samples over {} s, jerk energy {:.6}",
        samples.len(),
        args.duration,
        jerk_energy
    );

    let dataset_path = out.join("dataset.csv");
    io::atomic_stream(&dataset_path, |w| {
        ik::write_dataset(&model, args.dataset_size, args.seed, w)
    })?;
    println!("dataset: {} samples (seed {})", args.dataset_size, args.seed);

    let config = TrainConfig { max_epochs: args.epochs, ..TrainConfig::default() };
    let line = train_on_file(
        &out.join("model.toml"),
        &out.join("train_report.toml"),
        &dataset_path,
        &config,
    )?;
    println!("train: {line}");

    let mlp = load_mlp(&out.join("model.toml"))?;
    let line = solve_ik(out, &model, &mlp, &samples)?;
    println!("ik: {line}");

    let line = run_dynamics(out, &model, &out.join("joints.csv"))?;
    println!("dynamics: {line}");

    let (_, failed) = run_verify(out, &model)?;
    let report = emit_report(out)?;
    println!("report -> {}", report.display());
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} oracle checks failed")));
    }
    Ok(())
}
