//! Inverse dynamics of the chain by a recursive Newton-Euler sweep carried
//! out on dual quaternion transforms between successive center-of-mass
//! frames: a forward pass propagating twists and their rates from the fixed
//! base, and a backward pass accumulating wrenches from the foot inward.
//! Joint torques are the projections of the transmitted wrenches onto the
//! joint screws, so that `tau = M(q) qdd + V(q, qd) + G(q)` with the mass
//! matrix, velocity and gravity terms recoverable by probing
//! ([`extract_mvg`]).
//!
//! Each link's working frame sits at its center of mass with axes parallel
//! to the link frame; gravity is taken from the model and an optional
//! external wrench acts at the foot tip in base coordinates.

use crate::dq::{DualQuaternion, Twist, Wrench};
use crate::error::{Error, Result};
use crate::kinematics::{chain_points, joint_rotations};
use crate::limb::{JointAccels, JointRates, JointState, LimbModel, KNEE_AXIS};
use crate::quat::{quat_inner, PureQuaternion, Quaternion};
use nalgebra::Matrix3;

/// Body-frame inertia tensor held as three rows, applied to angular
/// quantities through inner products.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaOperator {
    pub rows: [PureQuaternion; 3],
}

impl InertiaOperator {
    pub fn diagonal(moments: PureQuaternion) -> Self {
        InertiaOperator {
            rows: [
                PureQuaternion::new(moments.x, 0.0, 0.0),
                PureQuaternion::new(0.0, moments.y, 0.0),
                PureQuaternion::new(0.0, 0.0, moments.z),
            ],
        }
    }

    pub fn apply(&self, p: PureQuaternion) -> PureQuaternion {
        PureQuaternion::new(
            quat_inner(self.rows[0], p),
            quat_inner(self.rows[1], p),
            quat_inner(self.rows[2], p),
        )
    }
}

/// Per-link products of the forward sweep, all expressed in that link's
/// center-of-mass frame.
#[derive(Clone, Copy, Debug)]
pub struct LinkFrame {
    /// Pose of the previous center-of-mass frame in this one; its adjoint
    /// carries twists across the joint.
    pub prev_com_pose: DualQuaternion,
    /// Pose of the link's joint-origin frame in this one.
    pub link_pose: DualQuaternion,
    /// Joint screw: unit-rate twist this joint adds, already at the center
    /// of mass.
    pub joint_screw: Twist,
    /// Twist of the link relative to the base.
    pub twist: Twist,
    pub twist_rate: Twist,
    /// Orientation of this frame's axes in the base frame.
    pub base_rotation: Quaternion,
}

/// Forward-sweep output, consumed by [`backward_recursion`]. Carries the
/// inputs it was computed from so a mismatched backward call is caught.
#[derive(Clone, Copy, Debug)]
pub struct LinkMotion {
    pub frames: [LinkFrame; 3],
    model: LimbModel,
    state: JointState,
}

impl LinkMotion {
    pub fn state(&self) -> &JointState {
        &self.state
    }
}

/// Joint torques and the full wrenches transmitted through each joint,
/// expressed in the link frames at the joint origins.
#[derive(Clone, Copy, Debug)]
pub struct DynamicsResult {
    pub joint_torques: [f64; 3],
    pub joint_wrenches: [Wrench; 3],
}

fn rot(q: Quaternion) -> DualQuaternion {
    DualQuaternion::new(q, Quaternion::ZERO)
}

/// Propagates twists and twist rates outward from the fixed base (both zero
/// there), one joint at a time:
///
/// ```text
/// xi_i  = Ad(Y_i) xi_{i-1} + S_i qd_i
/// dxi_i = Ad(Y_i) dxi_{i-1} + S_i qdd_i + [xi_i, S_i qd_i]
/// ```
///
/// A positive joint rate turns the distal link by the negative angle about
/// the joint axis, so the screw's angular part is the negated axis; its
/// linear part is the lever arm to the center of mass, produced by moving
/// the joint-origin twist with the adjoint of the link pose.
pub fn forward_recursion(
    model: &LimbModel,
    state: &JointState,
    rates: &JointRates,
    accels: &JointAccels,
) -> Result<LinkMotion> {
    state.validate()?;
    let rotations = joint_rotations(state)?;
    let displacements = [
        PureQuaternion::Z.scale(model.pelvis_offset),
        PureQuaternion::X.scale(model.thigh.length),
        PureQuaternion::X.scale(model.shank.length),
    ];
    let axes = [state.hip_axis, KNEE_AXIS, state.ankle_axis];
    let segments = model.segments();

    let mut frames = [None, None, None];
    let mut twist = Twist::ZERO;
    let mut twist_rate = Twist::ZERO;
    let mut base_rotation = Quaternion::IDENTITY;
    let mut prev_com = PureQuaternion::ZERO;
    for i in 0..3 {
        let link_in_prev = DualQuaternion::translation_vec(displacements[i])
            * rot(rotations[i].conjugate());
        let prev_com_pose = DualQuaternion::translation_vec(-segments[i].com)
            * link_in_prev.inverse()
            * DualQuaternion::translation_vec(prev_com);
        let link_pose = DualQuaternion::translation_vec(-segments[i].com);
        let joint_screw =
            link_pose.transform_twist(Twist::new(-axes[i], PureQuaternion::ZERO));

        let rate_twist = joint_screw.scale(rates.theta_dot[i]);
        twist = prev_com_pose.transform_twist(twist) + rate_twist;
        twist_rate = prev_com_pose.transform_twist(twist_rate)
            + joint_screw.scale(accels.theta_ddot[i])
            + twist.cross(rate_twist);
        base_rotation = base_rotation * rotations[i].conjugate();

        frames[i] = Some(LinkFrame {
            prev_com_pose,
            link_pose,
            joint_screw,
            twist,
            twist_rate,
            base_rotation,
        });
        prev_com = segments[i].com;
    }
    Ok(LinkMotion {
        frames: [frames[0].unwrap(), frames[1].unwrap(), frames[2].unwrap()],
        model: *model,
        state: *state,
    })
}

/// World positions of the three segment centers of mass.
pub fn com_positions(model: &LimbModel, state: &JointState) -> Result<[PureQuaternion; 3]> {
    let rotations = joint_rotations(state)?;
    let chain = chain_points(model, state)?;
    let q1 = rotations[0].conjugate();
    let q12 = q1 * rotations[1].conjugate();
    let q123 = q12 * rotations[2].conjugate();
    Ok([
        chain[0] + q1.rotate(model.thigh.com),
        chain[1] + q12.rotate(model.shank.com),
        chain[2] + q123.rotate(model.foot.com),
    ])
}

/// Accumulates wrenches from the foot inward. Each link contributes its
/// Newton-Euler wrench at the center of mass (gravity rotated into the
/// body frame and subtracted, applied moments from the rotating inertia),
/// the external wrench acting at the foot tip is transported to the foot's
/// center of mass and subtracted, and child wrenches are carried across
/// joints by the adjoint of the inverted inter-frame pose. Joint torque
/// `i` is the pairing of the transmitted wrench with joint screw `i`.
pub fn backward_recursion(
    model: &LimbModel,
    motion: &LinkMotion,
    external: &Wrench,
) -> Result<DynamicsResult> {
    if motion.model != *model {
        return Err(Error::FrameMismatch(
            "forward sweep was computed for a different model".into(),
        ));
    }
    let segments = model.segments();
    let chain = chain_points(model, &motion.state)?;

    let mut joint_torques = [0.0; 3];
    let mut joint_wrenches = [Wrench::ZERO; 3];
    let mut carried: Option<(Wrench, DualQuaternion)> = None;
    for i in (0..3).rev() {
        let seg = segments[i];
        let frame = &motion.frames[i];
        let omega = frame.twist.angular;
        let vel = frame.twist.linear;
        let inertia = InertiaOperator::diagonal(seg.inertia);

        let gravity_local = frame.base_rotation.conjugate().rotate(model.gravity);
        let force = (frame.twist_rate.linear + omega.cross(vel) - gravity_local)
            .scale(seg.mass);
        let torque =
            inertia.apply(frame.twist_rate.angular) + omega.cross(inertia.apply(omega));
        let mut wrench = Wrench::new(force, torque);

        if i == 2 {
            let com_world = chain[2] + frame.base_rotation.rotate(seg.com);
            let moment_at_com =
                external.torque + (chain[3] - com_world).cross(external.force);
            let into_body = frame.base_rotation.conjugate();
            wrench = wrench
                - Wrench::new(into_body.rotate(external.force), into_body.rotate(moment_at_com));
        }
        if let Some((child_wrench, child_pose)) = carried {
            wrench = wrench + child_pose.inverse().transform_wrench(child_wrench);
        }

        joint_torques[i] = frame.joint_screw.dot(wrench);
        joint_wrenches[i] = DualQuaternion::translation_vec(seg.com).transform_wrench(wrench);
        carried = Some((wrench, frame.prev_com_pose));
    }
    Ok(DynamicsResult { joint_torques, joint_wrenches })
}

/// Joint torques required to realize the given accelerations: the forward
/// sweep followed by the backward sweep. Gravity comes from the model; the
/// external wrench acts at the foot tip in base coordinates.
pub fn inverse_dynamics(
    model: &LimbModel,
    state: &JointState,
    rates: &JointRates,
    accels: &JointAccels,
    external: &Wrench,
) -> Result<DynamicsResult> {
    let motion = forward_recursion(model, state, rates, accels)?;
    backward_recursion(model, &motion, external)
}

pub(crate) fn mass_matrix(model: &LimbModel, state: &JointState) -> Result<Matrix3<f64>> {
    let mut weightless = *model;
    weightless.gravity = PureQuaternion::ZERO;
    let mut m = Matrix3::zeros();
    for j in 0..3 {
        let mut accels = JointAccels::default();
        accels.theta_ddot[j] = 1.0;
        let column = inverse_dynamics(
            &weightless,
            state,
            &JointRates::default(),
            &accels,
            &Wrench::ZERO,
        )?
        .joint_torques;
        for i in 0..3 {
            m[(i, j)] = column[i];
        }
    }
    Ok(m)
}

/// Splits the dynamics at a state into `tau = M qdd + V + G` by probing:
/// gravity torques at rest give `G`, torques at the given rates with zero
/// acceleration give `V + G`, and unit accelerations on a weightless model
/// give the columns of `M`.
pub fn extract_mvg(
    model: &LimbModel,
    state: &JointState,
    rates: &JointRates,
) -> Result<(Matrix3<f64>, [f64; 3], [f64; 3])> {
    let zero_rates = JointRates::default();
    let zero_accels = JointAccels::default();
    let g = inverse_dynamics(model, state, &zero_rates, &zero_accels, &Wrench::ZERO)?
        .joint_torques;
    let vg = inverse_dynamics(model, state, rates, &zero_accels, &Wrench::ZERO)?
        .joint_torques;
    let v = [vg[0] - g[0], vg[1] - g[1], vg[2] - g[2]];
    Ok((mass_matrix(model, state)?, v, g))
}

/// Total kinetic energy of the three links at the given rates.
pub fn kinetic_energy(
    model: &LimbModel,
    state: &JointState,
    rates: &JointRates,
) -> Result<f64> {
    let motion = forward_recursion(model, state, rates, &JointAccels::default())?;
    let mut energy = 0.0;
    for (seg, frame) in model.segments().into_iter().zip(&motion.frames) {
        let inertia = InertiaOperator::diagonal(seg.inertia);
        let v = frame.twist.linear;
        let w = frame.twist.angular;
        energy += 0.5 * seg.mass * v.dot(v) + 0.5 * w.dot(inertia.apply(w));
    }
    Ok(energy)
}

/// Gravitational potential energy, zero level at the base origin.
pub fn potential_energy(model: &LimbModel, state: &JointState) -> Result<f64> {
    let coms = com_positions(model, state)?;
    let masses = [model.thigh.mass, model.shank.mass, model.foot.mass];
    Ok(-masses
        .iter()
        .zip(&coms)
        .map(|(m, p)| m * model.gravity.dot(*p))
        .sum::<f64>())
}
