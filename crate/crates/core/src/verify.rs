//! Independent numerical oracles and pass/fail check runners.
//!
//! Everything here deliberately avoids the quaternion code paths it is
//! checking: forward kinematics is recomputed with Rodrigues rotation
//! matrices and homogeneous transforms, velocities with central finite
//! differences, inverse dynamics with a world-frame Newton-Euler sweep on
//! rotation matrices, and the pendulum against its textbook equation of
//! motion. The check runners bundle these into named outcomes consumed by
//! the command-line `verify` subcommand and the acceptance suite.

use crate::dq::Wrench;
use crate::dynamics::{
    extract_mvg, inverse_dynamics, kinetic_energy, mass_matrix, potential_energy,
};
use crate::error::{Error, Result};
use crate::kinematics::{fk_position, fk_velocity};
use crate::limb::{
    sample_configuration, sample_rates, sample_unit_axis, JointAccels, JointRates, JointState,
    LimbModel, KNEE_AXIS,
};
use crate::quat::PureQuaternion;
use crate::trajectory::{plan_min_jerk, BoundaryState, DEFAULT_DURATION, DEFAULT_END, DEFAULT_START};
use nalgebra::{Cholesky, Matrix3, Matrix4, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;
use std::time::Instant;

/// Result of one named verification check.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn v3(p: PureQuaternion) -> Vector3<f64> {
    Vector3::new(p.x, p.y, p.z)
}

fn rodrigues(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = Matrix3::new(
        0.0, -axis.z, axis.y,
        axis.z, 0.0, -axis.x,
        -axis.y, axis.x, 0.0,
    );
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Forward kinematics redone with homogeneous matrices: the same chain of
/// translations and negative-angle rotations, no quaternions involved.
pub fn matrix_fk_pose(model: &LimbModel, state: &JointState) -> Result<Matrix4<f64>> {
    state.validate()?;
    let t = |v: Vector3<f64>| {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&v);
        m
    };
    let r = |axis: PureQuaternion, angle: f64| {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rodrigues(v3(axis), angle));
        m
    };
    Ok(t(Vector3::new(0.0, 0.0, model.pelvis_offset))
        * r(state.hip_axis, -state.theta[0])
        * t(Vector3::new(model.thigh.length, 0.0, 0.0))
        * r(KNEE_AXIS, -state.theta[1])
        * t(Vector3::new(model.shank.length, 0.0, 0.0))
        * r(state.ankle_axis, -(state.theta[2] + PI)))
}

/// Foot tip position from the homogeneous-matrix chain.
pub fn matrix_fk_position(model: &LimbModel, state: &JointState) -> Result<PureQuaternion> {
    let p = matrix_fk_pose(model, state)?
        * Vector4::new(model.foot.length, 0.0, 0.0, 1.0);
    Ok(PureQuaternion::new(p.x, p.y, p.z))
}

/// World-frame recursive Newton-Euler on rotation matrices: per-link rigid
/// body kinematics, then an explicit force/moment balance from the foot
/// inward. Follows the same joint conventions as the chain (negative-angle
/// rotations, ankle half-turn) but shares no code with the dual quaternion
/// sweep.
pub fn classical_inverse_dynamics(
    model: &LimbModel,
    state: &JointState,
    rates: &JointRates,
    accels: &JointAccels,
    external: &Wrench,
) -> Result<[f64; 3]> {
    state.validate()?;
    let axes_local = [v3(state.hip_axis), v3(KNEE_AXIS), v3(state.ankle_axis)];
    let angles = [state.theta[0], state.theta[1], state.theta[2] + PI];
    let a: Vec<Matrix3<f64>> =
        (0..3).map(|i| rodrigues(axes_local[i], -angles[i])).collect();
    let w = [a[0], a[0] * a[1], a[0] * a[1] * a[2]];
    let axis_w = [axes_local[0], w[0] * axes_local[1], w[1] * axes_local[2]];
    let (qd, qdd) = (rates.theta_dot, accels.theta_ddot);

    let mut om = [Vector3::zeros(); 3];
    let mut al = [Vector3::zeros(); 3];
    om[0] = -qd[0] * axis_w[0];
    al[0] = -qdd[0] * axis_w[0];
    for i in 1..3 {
        let rel = -qd[i] * axis_w[i];
        om[i] = om[i - 1] + rel;
        al[i] = al[i - 1] - qdd[i] * axis_w[i] + om[i - 1].cross(&rel);
    }

    let segs = model.segments();
    let seg_vec = [
        w[0] * Vector3::new(segs[0].length, 0.0, 0.0),
        w[1] * Vector3::new(segs[1].length, 0.0, 0.0),
        w[2] * Vector3::new(segs[2].length, 0.0, 0.0),
    ];
    let mut o = [Vector3::new(0.0, 0.0, model.pelvis_offset); 3];
    for i in 1..3 {
        o[i] = o[i - 1] + seg_vec[i - 1];
    }
    let tip = o[2] + seg_vec[2];
    let mut ddo = [Vector3::zeros(); 3];
    for i in 1..3 {
        ddo[i] = ddo[i - 1]
            + al[i - 1].cross(&seg_vec[i - 1])
            + om[i - 1].cross(&om[i - 1].cross(&seg_vec[i - 1]));
    }

    let mut p = [Vector3::zeros(); 3];
    let mut ddp = [Vector3::zeros(); 3];
    let mut iw = [Matrix3::zeros(); 3];
    for i in 0..3 {
        let c = w[i] * v3(segs[i].com);
        p[i] = o[i] + c;
        ddp[i] = ddo[i] + al[i].cross(&c) + om[i].cross(&om[i].cross(&c));
        iw[i] = w[i] * Matrix3::from_diagonal(&v3(segs[i].inertia)) * w[i].transpose();
    }

    let g = v3(model.gravity);
    let (fe, te) = (v3(external.force), v3(external.torque));
    let mut tau = [0.0; 3];
    let mut f_child = Vector3::zeros();
    let mut t_child = Vector3::zeros();
    let mut o_child = Vector3::zeros();
    for i in (0..3).rev() {
        let m = segs[i].mass;
        let mut force = ddp[i] * m - g * m + f_child;
        if i == 2 {
            force -= fe;
        }
        let mut couple = iw[i] * al[i] + om[i].cross(&(iw[i] * om[i]))
            - (o[i] - p[i]).cross(&force)
            + t_child;
        if i < 2 {
            couple += (o_child - p[i]).cross(&f_child);
        } else {
            couple -= te + (tip - p[i]).cross(&fe);
        }
        tau[i] = couple.dot(&(-axis_w[i]));
        f_child = force;
        t_child = couple;
        o_child = o[i];
    }
    Ok(tau)
}

/// Joint accelerations from applied torques, for the energy checks only:
/// solves `M qdd = tau - bias` with the bias torques taken at zero
/// acceleration.
fn forward_dynamics(
    model: &LimbModel,
    state: &JointState,
    rates: &JointRates,
    applied: &[f64; 3],
) -> Result<[f64; 3]> {
    let bias = inverse_dynamics(model, state, rates, &JointAccels::default(), &Wrench::ZERO)?
        .joint_torques;
    let m = mass_matrix(model, state)?;
    let rhs = Vector3::new(
        applied[0] - bias[0],
        applied[1] - bias[1],
        applied[2] - bias[2],
    );
    let qdd = Cholesky::new(m)
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?
        .solve(&rhs);
    Ok([qdd.x, qdd.y, qdd.z])
}

fn random_box_state<R: Rng + ?Sized>(model: &LimbModel, rng: &mut R) -> JointState {
    let knee = model.rom.knee_flexion_extension;
    JointState::new(
        [
            rng.gen_range(-PI..PI),
            rng.gen_range(knee[0].to_radians()..knee[1].to_radians()),
            rng.gen_range(-PI..PI),
        ],
        sample_unit_axis(rng),
        sample_unit_axis(rng),
    )
}

/// Dual quaternion forward kinematics against the homogeneous-matrix chain
/// over motion-range-valid random states.
pub fn check_fk_against_matrix(
    model: &LimbModel,
    count: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let started = Instant::now();
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        states.push(sample_configuration(model, &mut rng)?);
    }
    let generation = started.elapsed().as_secs_f64();

    let sweep_started = Instant::now();
    let mut max_diff: f64 = 0.0;
    for state in &states {
        let dq_tip = crate::kinematics::fk_pose(model, state)?.position;
        let matrix_tip = matrix_fk_position(model, state)?;
        max_diff = max_diff.max((dq_tip - matrix_tip).norm());
    }
    let sweep = sweep_started.elapsed().as_secs_f64();
    let total = started.elapsed().as_secs_f64();
    Ok(CheckOutcome {
        name: "fk_vs_matrix_oracle",
        passed: max_diff < 1e-10 && total < 10.0,
        detail: format!(
            "max |dp| = {max_diff:.3e} m over {count} states in {total:.2} s \
             (sampling {generation:.2} s, comparison {sweep:.2} s)"
        ),
    })
}

/// Velocity from the lever-arm formula against central finite differences
/// of the position chain.
pub fn check_velocity_against_finite_differences(
    model: &LimbModel,
    count: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut max_diff: f64 = 0.0;
    for _ in 0..count {
        let state = random_box_state(model, &mut rng);
        let rates = sample_rates(&mut rng, 1.0);
        let v = fk_velocity(model, &state, &rates)?;
        let shifted = |s: f64| {
            let mut st = state;
            for k in 0..3 {
                st.theta[k] += s * rates.theta_dot[k];
            }
            fk_position(model, &st)
        };
        let fd = (shifted(h)? - shifted(-h)?).scale(1.0 / (2.0 * h));
        max_diff = max_diff.max((v - fd).norm());
    }
    Ok(CheckOutcome {
        name: "velocity_vs_finite_differences",
        passed: max_diff < 1e-5,
        detail: format!("max |dv| = {max_diff:.3e} m/s over {count} states"),
    })
}

/// Planner boundary conditions, midpoint symmetry and the closed-form
/// rest-to-rest jerk cost on the default segment.
pub fn check_min_jerk() -> Result<CheckOutcome> {
    let start = BoundaryState::at_rest(DEFAULT_START);
    let end = BoundaryState::at_rest(DEFAULT_END);
    let plan = plan_min_jerk(&start, &end, DEFAULT_DURATION)?;

    let mut boundary_err: f64 = 0.0;
    for (got, want) in [
        (plan.position(0.0), DEFAULT_START),
        (plan.position(DEFAULT_DURATION), DEFAULT_END),
        (plan.velocity(0.0), PureQuaternion::ZERO),
        (plan.velocity(DEFAULT_DURATION), PureQuaternion::ZERO),
        (plan.acceleration(0.0), PureQuaternion::ZERO),
        (plan.acceleration(DEFAULT_DURATION), PureQuaternion::ZERO),
    ] {
        boundary_err = boundary_err.max((got - want).norm());
    }
    let mid = plan.position(0.5 * DEFAULT_DURATION);
    let mean = (DEFAULT_START + DEFAULT_END).scale(0.5);
    let midpoint_err = (mid - mean).norm();
    let d = DEFAULT_END - DEFAULT_START;
    let closed_form = 720.0 * d.dot(d) / DEFAULT_DURATION.powi(5);
    let cost_rel = ((plan.jerk_cost() - closed_form) / closed_form).abs();
    Ok(CheckOutcome {
        name: "min_jerk_closed_form",
        passed: boundary_err < 1e-12 && midpoint_err < 1e-12 && cost_rel < 1e-9,
        detail: format!(
            "boundary residual {boundary_err:.3e} m, midpoint residual {midpoint_err:.3e} m, \
             jerk cost {:.6} vs closed form {closed_form:.6} (rel {cost_rel:.3e})",
            plan.jerk_cost()
        ),
    })
}

/// Knee-only swing with the hip and ankle locked against the compound
/// pendulum equation `tau = I qdd + m g lc cos(theta)`.
pub fn check_pendulum(points: usize) -> Result<CheckOutcome> {
    let mut model = LimbModel::default();
    model.gravity = PureQuaternion::new(0.0, 9.81, 0.0);
    model.foot.mass = 1e-10;
    model.foot.inertia = PureQuaternion::new(1e-12, 1e-12, 1e-12);
    let m = model.shank.mass;
    let lc = model.shank.com.x;
    let inertia_about_knee = model.shank.inertia.z + m * lc * lc;

    let mut max_diff: f64 = 0.0;
    for k in 0..points {
        let s = k as f64 / (points - 1).max(1) as f64;
        let theta2 = -2.5 + 2.45 * s;
        let qd = 1.5 - 3.0 * s;
        let qdd = -2.0 + 4.0 * s;
        let state = JointState::new([0.0, theta2, 0.0], KNEE_AXIS, KNEE_AXIS);
        let rates = JointRates { theta_dot: [0.0, qd, 0.0] };
        let accels = JointAccels { theta_ddot: [0.0, qdd, 0.0] };
        let tau = inverse_dynamics(&model, &state, &rates, &accels, &Wrench::ZERO)?
            .joint_torques[1];
        let analytic = inertia_about_knee * qdd + m * 9.81 * lc * theta2.cos();
        max_diff = max_diff.max((tau - analytic).abs());
    }
    Ok(CheckOutcome {
        name: "pendulum_analytic_torque",
        passed: max_diff < 1e-8,
        detail: format!("max |dtau| = {max_diff:.3e} N m over {points} sweep points"),
    })
}

/// Dual quaternion sweep against the world-frame rotation-matrix sweep over
/// random state/rate/acceleration triples.
pub fn check_classical_agreement(
    model: &LimbModel,
    count: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut max_diff: f64 = 0.0;
    for _ in 0..count {
        let state = random_box_state(model, &mut rng);
        let rates = sample_rates(&mut rng, 2.0);
        let accels = JointAccels {
            theta_ddot: [
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ],
        };
        let dq_tau = inverse_dynamics(model, &state, &rates, &accels, &Wrench::ZERO)?
            .joint_torques;
        let cl_tau = classical_inverse_dynamics(model, &state, &rates, &accels, &Wrench::ZERO)?;
        for i in 0..3 {
            max_diff = max_diff.max((dq_tau[i] - cl_tau[i]).abs());
        }
    }
    Ok(CheckOutcome {
        name: "rnea_vs_classical",
        passed: max_diff < 1e-9,
        detail: format!("max |dtau| = {max_diff:.3e} N m over {count} triples"),
    })
}

/// Mass-matrix symmetry, positive definiteness and the probing reassembly
/// `M qdd + V + G = inverse_dynamics` over motion-range-valid states.
pub fn check_mass_matrix(model: &LimbModel, count: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut max_asym: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut max_reassembly: f64 = 0.0;
    for _ in 0..count {
        let state = sample_configuration(model, &mut rng)?;
        let rates = sample_rates(&mut rng, 2.0);
        let (m, v, g) = extract_mvg(model, &state, &rates)?;
        max_asym = max_asym.max((m - m.transpose()).abs().max());
        let sym = (m + m.transpose()) * 0.5;
        for eig in sym.symmetric_eigenvalues().iter() {
            min_eig = min_eig.min(*eig);
        }
        let accels = JointAccels {
            theta_ddot: [
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ],
        };
        let qdd = Vector3::from(accels.theta_ddot);
        let rebuilt = m * qdd;
        let direct =
            inverse_dynamics(model, &state, &rates, &accels, &Wrench::ZERO)?.joint_torques;
        for i in 0..3 {
            max_reassembly = max_reassembly.max((direct[i] - rebuilt[i] - v[i] - g[i]).abs());
        }
    }
    Ok(CheckOutcome {
        name: "mass_matrix_properties",
        passed: max_asym < 1e-9 && min_eig > 0.0 && max_reassembly < 1e-9,
        detail: format!(
            "max asymmetry {max_asym:.3e}, min eigenvalue {min_eig:.3e}, \
             max reassembly residual {max_reassembly:.3e} N m over {count} states"
        ),
    })
}

/// Integrates free motion under constant joint torques for 2 s at 1 kHz
/// with a fourth-order Runge-Kutta stepper and compares the energy gained
/// against the work integral of the applied torques.
pub fn check_power_balance(model: &LimbModel) -> Result<CheckOutcome> {
    let hip_axis = PureQuaternion::new(0.0, 0.6, 0.8);
    let ankle_axis = KNEE_AXIS;
    let applied = [0.5, -0.3, 0.2];
    let dt = 1e-3;
    let steps = 2000;

    let state_of = |y: &[f64; 7]| JointState::new([y[0], y[1], y[2]], hip_axis, ankle_axis);
    let rates_of = |y: &[f64; 7]| JointRates { theta_dot: [y[3], y[4], y[5]] };
    let deriv = |y: &[f64; 7]| -> Result<[f64; 7]> {
        let state = state_of(y);
        let rates = rates_of(y);
        let qdd = forward_dynamics(model, &state, &rates, &applied)?;
        let power = applied[0] * y[3] + applied[1] * y[4] + applied[2] * y[5];
        Ok([y[3], y[4], y[5], qdd[0], qdd[1], qdd[2], power])
    };
    let energy_of = |y: &[f64; 7]| -> Result<f64> {
        Ok(kinetic_energy(model, &state_of(y), &rates_of(y))?
            + potential_energy(model, &state_of(y))?)
    };

    let mut y = [0.3, -0.8, 0.2, 0.5, -0.4, 0.3, 0.0];
    let initial = energy_of(&y)?;
    let mut max_err: f64 = 0.0;
    let mut max_energy = initial.abs();
    for _ in 0..steps {
        let k1 = deriv(&y)?;
        let mut y2 = y;
        for i in 0..7 {
            y2[i] = y[i] + 0.5 * dt * k1[i];
        }
        let k2 = deriv(&y2)?;
        let mut y3 = y;
        for i in 0..7 {
            y3[i] = y[i] + 0.5 * dt * k2[i];
        }
        let k3 = deriv(&y3)?;
        let mut y4 = y;
        for i in 0..7 {
            y4[i] = y[i] + dt * k3[i];
        }
        let k4 = deriv(&y4)?;
        for i in 0..7 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let energy = energy_of(&y)?;
        max_energy = max_energy.max(energy.abs());
        max_err = max_err.max((energy - initial - y[6]).abs());
    }
    let drift = max_err / max_energy;
    Ok(CheckOutcome {
        name: "power_balance",
        passed: drift < 1e-5,
        detail: format!(
            "relative drift {drift:.3e} over {steps} steps at dt = {dt} s \
             (max |E - E0 - W| = {max_err:.3e} J)"
        ),
    })
}

/// The full oracle suite at its standard sizes.
pub fn run_standard_checks(model: &LimbModel) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_fk_against_matrix(model, 100_000, 11)?,
        check_velocity_against_finite_differences(model, 10_000, 12)?,
        check_min_jerk()?,
        check_pendulum(100)?,
        check_classical_agreement(model, 10_000, 13)?,
        check_mass_matrix(model, 1000, 14)?,
        check_power_balance(model)?,
    ])
}
