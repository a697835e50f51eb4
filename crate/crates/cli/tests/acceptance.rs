//! Acceptance suite: one test per published criterion. Each test prints a
//! single `criterion N: PASS/FAIL ...` line with the measured quantities
//! (shown with `cargo test --test acceptance -- --show-output`). The trained
//! network is shared by criteria 4, 5 and 8, so whichever of those runs
//! first pays the training time once.

use std::sync::OnceLock;
use std::time::Instant;

use dqlimb::ik::{
    evaluate_rmse, evaluate_rmse_refined, generate_dataset, train_mlp, Mlp, RefineConfig,
    TrainConfig, TrainReport, HIDDEN_DIM, OUTPUT_DIM,
};
use dqlimb::kinematics::fk_position;
use dqlimb::limb::LimbModel;
use dqlimb::trajectory::{
    plan_min_jerk, BoundaryState, MinJerkTrajectory, TrajectorySample, DEFAULT_DURATION,
    DEFAULT_END, DEFAULT_START,
};
use dqlimb::verify::{
    check_classical_agreement, check_fk_against_matrix, check_mass_matrix, check_min_jerk,
    check_pendulum, check_power_balance, check_velocity_against_finite_differences,
};
use dqlimb::{JointState, PureQuaternion};
use dqlimb_cli::commands::{cmd_dynamics, cmd_ik, cmd_plan, cmd_verify, emit_report};
use dqlimb_cli::io;
use dqlimb_cli::{CommonArgs, DynamicsArgs, IkArgs, PlanArgs, VerifyArgs};
use tempfile::tempdir;

fn verdict(criterion: usize, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {tag} {detail}");
    assert!(passed, "criterion {criterion}: {tag} {detail}");
}

struct Trained {
    mlp: Mlp,
    report: TrainReport,
    dataset_len: usize,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = LimbModel::default();
        let data = generate_dataset(&model, 50_000, 42).expect("dataset generation failed");
        let config = TrainConfig { max_epochs: 60, seed: 3, ..TrainConfig::default() };
        let (mlp, report) = train_mlp(&data, &config).expect("training failed");
        Trained { mlp, report, dataset_len: data.len() }
    })
}

fn default_reach() -> MinJerkTrajectory {
    plan_min_jerk(
        &BoundaryState::at_rest(DEFAULT_START),
        &BoundaryState::at_rest(DEFAULT_END),
        DEFAULT_DURATION,
    )
    .unwrap()
}

#[test]
fn criterion_1_fk_matches_the_matrix_chain() {
    let model = LimbModel::default();
    let start = Instant::now();
    let outcome = check_fk_against_matrix(&model, 100_000, 11).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        1,
        outcome.passed && elapsed < 10.0,
        &format!("{} in {elapsed:.2} s (budget 10 s)", outcome.detail),
    );
}

#[test]
fn criterion_2_tip_velocity_matches_finite_differences() {
    let model = LimbModel::default();
    let outcome = check_velocity_against_finite_differences(&model, 10_000, 12).unwrap();
    verdict(2, outcome.passed, &outcome.detail);
}

#[test]
fn criterion_3_min_jerk_boundaries_midpoint_and_cost() {
    let outcome = check_min_jerk().unwrap();
    verdict(3, outcome.passed, &outcome.detail);
}

#[test]
fn criterion_4_network_tracks_the_reach_within_bounds() {
    let model = LimbModel::default();
    let t = trained();
    let samples = default_reach().sample(500).unwrap();
    let report = evaluate_rmse(&t.mlp, &model, &samples).unwrap();

    let architecture_ok = HIDDEN_DIM == 20 && OUTPUT_DIM == 9;
    let rmse_ok = report.per_axis.iter().all(|v| *v <= 0.15);
    let train_ok = t.report.wall_seconds <= 1800.0;
    let inference_ok = report.solve_seconds < 0.1;
    verdict(
        4,
        t.dataset_len >= 50_000 && architecture_ok && rmse_ok && train_ok && inference_ok,
        &format!(
            "rmse [{:.4}, {:.4}, {:.4}] m (bound 0.15), {} samples, trained {:.0} s \
             (budget 1800 s), 500-sample inference {:.4} s (budget 0.1 s)",
            report.per_axis[0],
            report.per_axis[1],
            report.per_axis[2],
            t.dataset_len,
            t.report.wall_seconds,
            report.solve_seconds
        ),
    );
}

#[test]
fn criterion_5_refinement_reaches_micrometer_tracking() {
    let model = LimbModel::default();
    let t = trained();
    // One span sample sits in a slow-convergence basin of the trained
    // network's guess (550 iterations to close); give the solver headroom.
    let config = RefineConfig { max_iterations: 1000, ..RefineConfig::default() };

    let central: Vec<TrajectorySample> = default_reach()
        .sample(200)
        .unwrap()
        .into_iter()
        .filter(|s| (0.8..=1.2).contains(&s.time))
        .collect();
    let central_report = evaluate_rmse_refined(&t.mlp, &model, &central, &config).unwrap();

    let a = JointState::new([0.1, -0.3, 0.1], PureQuaternion::Z, PureQuaternion::Z);
    let b = JointState::new([0.25, -0.7, -0.1], PureQuaternion::Z, PureQuaternion::Z);
    let chord = plan_min_jerk(
        &BoundaryState::at_rest(fk_position(&model, &a).unwrap()),
        &BoundaryState::at_rest(fk_position(&model, &b).unwrap()),
        1.0,
    )
    .unwrap()
    .sample(40)
    .unwrap();
    let chord_report = evaluate_rmse_refined(&t.mlp, &model, &chord, &config).unwrap();

    let worst = central_report
        .per_axis
        .iter()
        .chain(&chord_report.per_axis)
        .fold(0.0_f64, |m, v| m.max(*v));
    verdict(
        5,
        worst < 1e-6,
        &format!(
            "refined rmse (1000-iteration budget): central span max {:.3e} m over {} samples, \
             chord max {:.3e} m over {} samples (bound 1e-6)",
            central_report.per_axis.iter().fold(0.0_f64, |m, v| m.max(*v)),
            central.len(),
            chord_report.per_axis.iter().fold(0.0_f64, |m, v| m.max(*v)),
            chord.len()
        ),
    );
}

#[test]
fn criterion_6_inverse_dynamics_matches_the_oracles() {
    let model = LimbModel::default();
    let pendulum = check_pendulum(100).unwrap();
    let classical = check_classical_agreement(&model, 10_000, 13).unwrap();
    verdict(
        6,
        pendulum.passed && classical.passed,
        &format!("{}; {}", pendulum.detail, classical.detail),
    );
}

#[test]
fn criterion_7_power_balance_holds_along_the_motion() {
    let model = LimbModel::default();
    let outcome = check_power_balance(&model).unwrap();
    verdict(7, outcome.passed, &outcome.detail);
}

#[test]
fn criterion_8_pipeline_reports_joint_jerk_energy() {
    let t = trained();
    let dir = tempdir().unwrap();
    let out = dir.path().to_path_buf();
    let common = || CommonArgs { config: None, out: out.clone() };

    cmd_plan(&PlanArgs {
        common: common(),
        duration: DEFAULT_DURATION,
        samples: 500,
        start: None,
        end: None,
    })
    .unwrap();
    io::atomic_write(&out.join("model.toml"), t.mlp.render().as_bytes()).unwrap();
    io::write_toml(
        &out.join("train_report.toml"),
        &io::TrainReportFile {
            format: io::TRAIN_REPORT_FORMAT.to_string(),
            epochs: t.report.epochs,
            final_loss: t.report.final_loss,
            stop: t.report.stop.as_str().to_string(),
            wall_seconds: t.report.wall_seconds,
            validation_rmse: t.report.validation_rmse.to_vec(),
        },
    )
    .unwrap();
    cmd_ik(&IkArgs { common: common(), model: None, trajectory: None }).unwrap();
    cmd_dynamics(&DynamicsArgs { common: common(), joints: None }).unwrap();
    cmd_verify(&VerifyArgs { common: common() }).unwrap();
    let path = emit_report(&out).unwrap();
    let report: io::ReportFile = io::read_toml(&path).unwrap();

    let energy = report.dynamics.joint_jerk_energy;
    let bound = report.dynamics.jerk_energy_reference_bound;
    verdict(
        8,
        energy.is_finite() && energy > 0.0 && bound == 0.4 && report.trajectory.jerk_energy.is_finite(),
        &format!(
            "joint jerk energy {energy:.3e} (finite, reported beside the {bound} reference \
             bound), task-space jerk energy {:.3e}",
            report.trajectory.jerk_energy
        ),
    );
}

#[test]
fn criterion_9_mass_matrix_is_symmetric_positive_definite() {
    let model = LimbModel::default();
    let outcome = check_mass_matrix(&model, 1000, 14).unwrap();
    verdict(9, outcome.passed, &outcome.detail);
}
