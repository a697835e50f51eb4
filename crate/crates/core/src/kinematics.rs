//! Forward kinematics of the hip-knee-ankle chain as dual quaternion
//! products: end-effector pose, chain joint positions, and end-effector
//! linear velocity.
//!
//! The chain transform is an alternating product of fixed translations along
//! the segments and conjugated joint rotations,
//!
//! ```text
//! L = T(d0 z) R1* T(L1 x) R2* T(L2 x) R3*
//! ```
//!
//! so a positive joint angle turns its distal segment by the negative angle
//! about the joint axis. The ankle rotation carries a built-in half-turn:
//! at `theta3 = 0` the foot lies folded back along the shank, and the foot
//! tip is reported rather than the ankle. The foot tip enters as the point
//! `1 + eps L3 x` and comes back from the sandwich `L P conj(L)` with its
//! base-frame position in the dual part.

use crate::dq::DualQuaternion;
use crate::error::Result;
use crate::limb::{JointRates, JointState, LimbModel, KNEE_AXIS};
use crate::quat::{PureQuaternion, Quaternion};
use std::f64::consts::PI;

/// Pose and end point of the chain for one joint state.
#[derive(Clone, Copy, Debug)]
pub struct FkPose {
    /// Base-from-foot rigid transform; its translation is the ankle.
    pub pose: DualQuaternion,
    /// Foot tip as a unit dual quaternion `1 + eps p`.
    pub end_point: DualQuaternion,
    /// Foot tip position in the base frame, meters.
    pub position: PureQuaternion,
}

/// The three joint rotations `r1, r2, r3` for a state, including the ankle
/// half-turn offset. The chain applies their conjugates.
pub fn joint_rotations(state: &JointState) -> Result<[Quaternion; 3]> {
    Ok([
        Quaternion::from_axis_angle(state.hip_axis, state.theta[0])?,
        Quaternion::from_axis_angle(KNEE_AXIS, state.theta[1])?,
        Quaternion::from_axis_angle(state.ankle_axis, state.theta[2] + PI)?,
    ])
}

fn rot(q: Quaternion) -> DualQuaternion {
    DualQuaternion::new(q, Quaternion::ZERO)
}

/// Full forward kinematics: chain pose, embedded end point and its position.
pub fn fk_pose(model: &LimbModel, state: &JointState) -> Result<FkPose> {
    state.validate()?;
    let [r1, r2, r3] = joint_rotations(state)?;
    let pose = DualQuaternion::translation_vec(model.hip_position())
        * rot(r1.conjugate())
        * DualQuaternion::translation_vec(PureQuaternion::X.scale(model.thigh.length))
        * rot(r2.conjugate())
        * DualQuaternion::translation_vec(PureQuaternion::X.scale(model.shank.length))
        * rot(r3.conjugate());
    let tip = DualQuaternion::point(PureQuaternion::X.scale(model.foot.length));
    let end_point = pose * tip * pose.conjugate();
    let position = end_point.point_position();
    Ok(FkPose { pose, end_point, position })
}

/// Base-frame positions of hip, knee, ankle and foot tip.
pub fn chain_points(model: &LimbModel, state: &JointState) -> Result<[PureQuaternion; 4]> {
    state.validate()?;
    let [r1, r2, r3] = joint_rotations(state)?;
    let hip = model.hip_position();
    let q1 = r1.conjugate();
    let knee = hip + q1.rotate(PureQuaternion::X.scale(model.thigh.length));
    let q12 = q1 * r2.conjugate();
    let ankle = knee + q12.rotate(PureQuaternion::X.scale(model.shank.length));
    let q123 = q12 * r3.conjugate();
    let tip = ankle + q123.rotate(PureQuaternion::X.scale(model.foot.length));
    Ok([hip, knee, ankle, tip])
}

/// Foot tip position only.
pub fn fk_position(model: &LimbModel, state: &JointState) -> Result<PureQuaternion> {
    Ok(chain_points(model, state)?[3])
}

/// Lever-arm term `p x omega` evaluated as the dual quaternion commutator
/// of the point `1 + eps p` with the angular rate `omega`.
fn lever_term(p: PureQuaternion, omega: PureQuaternion) -> PureQuaternion {
    let point = DualQuaternion::point(p);
    let rate = DualQuaternion::new(omega.as_quaternion(), Quaternion::ZERO);
    point.commutator(rate).dual.vector()
}

/// Linear velocity of the foot tip for given joint angle rates, with the
/// hip and ankle axes held fixed.
///
/// Each joint contributes the cross product of the tip's position relative
/// to that joint (expressed in the joint's proximal frame) with the joint's
/// angular rate, rotated out to the base frame.
pub fn fk_velocity(
    model: &LimbModel,
    state: &JointState,
    rates: &JointRates,
) -> Result<PureQuaternion> {
    state.validate()?;
    let [r1, r2, r3] = joint_rotations(state)?;
    let l1x = PureQuaternion::X.scale(model.thigh.length);
    let l2x = PureQuaternion::X.scale(model.shank.length);
    let l3x = PureQuaternion::X.scale(model.foot.length);

    let tip_from_ankle = r3.conjugate().rotate(l3x);
    let tip_from_knee = r2.conjugate().rotate(tip_from_ankle + l2x);
    let tip_from_hip = r1.conjugate().rotate(tip_from_knee + l1x);

    let omega1 = state.hip_axis.scale(rates.theta_dot[0]);
    let omega2 = KNEE_AXIS.scale(rates.theta_dot[1]);
    let omega3 = state.ankle_axis.scale(rates.theta_dot[2]);

    let q1 = r1.conjugate();
    let q12 = q1 * r2.conjugate();
    let v = lever_term(tip_from_hip, omega1)
        + q1.rotate(lever_term(tip_from_knee, omega2))
        + q12.rotate(lever_term(tip_from_ankle, omega3));
    Ok(v)
}
