//! Dual quaternions `D = q0 + eps q1` over `f64`, where `eps^2 = 0`.
//!
//! A dual quaternion is stored as its primary and dual quaternion parts; the
//! dual unit is never represented symbolically. Unit dual quaternions encode
//! rigid poses: a rotation `r` followed by a translation `t` is
//! `(1 + eps t/2) r = r + eps (t r)/2`. Points embed as `1 + eps p` and
//! transform through the conjugation sandwich `D P D̄`, where `D̄` conjugates
//! both quaternion parts and flips the sign of the dual unit. Twists and
//! wrenches ride in the vector parts of a pure pair `w + eps v` and transform
//! through the plain sandwich `D T D^{-1}`.

use crate::error::{Error, Result};
use crate::quat::{PureQuaternion, Quaternion, UNIT_TOL};
use nalgebra::Matrix4;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualQuaternion {
    pub primary: Quaternion,
    pub dual: Quaternion,
}

impl DualQuaternion {
    pub const IDENTITY: DualQuaternion =
        DualQuaternion { primary: Quaternion::IDENTITY, dual: Quaternion::ZERO };

    #[inline]
    pub const fn new(primary: Quaternion, dual: Quaternion) -> Self {
        DualQuaternion { primary, dual }
    }

    /// Rotation by `angle` radians about the unit `axis`:
    /// `cos(angle/2) + axis sin(angle/2)`, dual part zero.
    pub fn rotation(axis: PureQuaternion, angle: f64) -> Result<Self> {
        Ok(DualQuaternion {
            primary: Quaternion::from_axis_angle(axis, angle)?,
            dual: Quaternion::ZERO,
        })
    }

    /// Translation by `displacement` along the unit `axis`:
    /// `1 + eps (displacement/2) axis`. The axis may be arbitrary when the
    /// displacement is exactly zero.
    pub fn translation(axis: PureQuaternion, displacement: f64) -> Result<Self> {
        if displacement == 0.0 {
            return Ok(DualQuaternion::IDENTITY);
        }
        axis.check_unit_axis()?;
        Ok(Self::translation_vec(axis.scale(displacement)))
    }

    /// Translation by the vector `t`, i.e. `1 + eps t/2`.
    #[inline]
    pub fn translation_vec(t: PureQuaternion) -> Self {
        DualQuaternion {
            primary: Quaternion::IDENTITY,
            dual: t.scale(0.5).as_quaternion(),
        }
    }

    /// Point `p` embedded as `1 + eps p`.
    #[inline]
    pub fn point(p: PureQuaternion) -> Self {
        DualQuaternion { primary: Quaternion::IDENTITY, dual: p.as_quaternion() }
    }

    /// Position carried by a point dual quaternion (the vector of its dual
    /// part). Inverse of [`DualQuaternion::point`].
    #[inline]
    pub fn point_position(self) -> PureQuaternion {
        self.dual.vector()
    }

    /// Pose with rotation `r` (unit) and translation `t`: acts on points as
    /// `p -> r p r* + t`.
    pub fn from_rotation_translation(r: Quaternion, t: PureQuaternion) -> Result<Self> {
        r.check_unit()?;
        Ok(DualQuaternion { primary: r, dual: (t.as_quaternion() * r).scale(0.5) })
    }

    /// Rotation part of a pose.
    #[inline]
    pub fn rotation_part(self) -> Quaternion {
        self.primary
    }

    /// Translation part of a pose, recovered as the vector of `2 q1 q0*`.
    #[inline]
    pub fn translation_part(self) -> PureQuaternion {
        (self.dual * self.primary.conjugate()).scale(2.0).vector()
    }

    /// Conjugate `q0* - eps q1*`. This is the involution used in point and
    /// pose sandwiches; it anti-commutes over products and leaves translation
    /// dual quaternions fixed.
    #[inline]
    pub fn conjugate(self) -> Self {
        DualQuaternion { primary: self.primary.conjugate(), dual: -self.dual.conjugate() }
    }

    /// Inverse of a unit pose: quaternion-conjugate of both parts.
    #[inline]
    pub fn inverse(self) -> Self {
        debug_assert!(self.is_unit(1e-6));
        DualQuaternion { primary: self.primary.conjugate(), dual: self.dual.conjugate() }
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        DualQuaternion { primary: self.primary.scale(s), dual: self.dual.scale(s) }
    }

    /// Commutator `(self other - other self) / 2`.
    #[inline]
    pub fn commutator(self, other: Self) -> Self {
        (self * other - other * self).scale(0.5)
    }

    /// A pose dual quaternion is unit when its primary part has norm one and
    /// the primary and dual parts are orthogonal.
    #[inline]
    pub fn is_unit(self, tol: f64) -> bool {
        (self.primary.norm_squared() - 1.0).abs() <= tol
            && self.primary.dot(self.dual).abs() <= tol
    }

    pub fn check_unit_pose(self) -> Result<()> {
        let norm_defect = (self.primary.norm() - 1.0).abs();
        let ortho_defect = self.primary.dot(self.dual).abs();
        let defect = norm_defect.max(ortho_defect);
        if !defect.is_finite() || defect > UNIT_TOL {
            return Err(Error::NonUnitDualQuaternion { defect });
        }
        Ok(())
    }

    /// Renormalizes a nearly-unit pose: divides by the primary norm and
    /// removes the dual component parallel to the primary part.
    pub fn normalize_pose(self) -> Result<Self> {
        let n = self.primary.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::NonUnitDualQuaternion { defect: f64::INFINITY });
        }
        let primary = self.primary.scale(1.0 / n);
        let dual = self.dual.scale(1.0 / n);
        let drift = primary.dot(dual);
        Ok(DualQuaternion { primary, dual: dual - primary.scale(drift) })
    }

    /// Applies a unit pose to a point: the dual-part vector of
    /// `self (1 + eps p) self̄`.
    pub fn transform_point(self, p: PureQuaternion) -> PureQuaternion {
        debug_assert!(self.is_unit(1e-6));
        self.primary.rotate(p) + self.translation_part()
    }

    /// Re-expresses a twist given in the source frame of this pose in its
    /// target frame, equal to the sandwich `x T x^{-1}` on the pure pair.
    pub fn transform_twist(self, t: Twist) -> Twist {
        debug_assert!(self.is_unit(1e-6));
        let angular = self.primary.rotate(t.angular);
        let linear = self.primary.rotate(t.linear) + self.translation_part().cross(angular);
        Twist { angular, linear }
    }

    /// Re-expresses a wrench given in the source frame of this pose in its
    /// target frame; the same sandwich as [`DualQuaternion::transform_twist`]
    /// with force in the primary slot and torque in the dual slot.
    pub fn transform_wrench(self, w: Wrench) -> Wrench {
        debug_assert!(self.is_unit(1e-6));
        let force = self.primary.rotate(w.force);
        let torque = self.primary.rotate(w.torque) + self.translation_part().cross(force);
        Wrench { force, torque }
    }

    /// Homogeneous 4x4 matrix of a unit pose. Used by the verification
    /// oracles and reporting; the library itself never round-trips through
    /// matrices.
    pub fn to_homogeneous(self) -> Result<Matrix4<f64>> {
        self.check_unit_pose()?;
        let q = self.primary;
        let (w, x, y, z) = (q.w, q.x, q.y, q.z);
        let t = self.translation_part();
        Ok(Matrix4::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            t.x,
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            t.y,
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ))
    }
}

impl Mul for DualQuaternion {
    type Output = DualQuaternion;

    /// `(p1 + eps d1)(p2 + eps d2) = p1 p2 + eps (p1 d2 + d1 p2)`.
    #[inline]
    fn mul(self, o: DualQuaternion) -> DualQuaternion {
        DualQuaternion {
            primary: self.primary * o.primary,
            dual: self.primary * o.dual + self.dual * o.primary,
        }
    }
}

impl Add for DualQuaternion {
    type Output = DualQuaternion;
    #[inline]
    fn add(self, o: DualQuaternion) -> DualQuaternion {
        DualQuaternion { primary: self.primary + o.primary, dual: self.dual + o.dual }
    }
}

impl Sub for DualQuaternion {
    type Output = DualQuaternion;
    #[inline]
    fn sub(self, o: DualQuaternion) -> DualQuaternion {
        DualQuaternion { primary: self.primary - o.primary, dual: self.dual - o.dual }
    }
}

impl Neg for DualQuaternion {
    type Output = DualQuaternion;
    #[inline]
    fn neg(self) -> DualQuaternion {
        self.scale(-1.0)
    }
}

/// Time derivative of a rotation dual quaternion with fixed axis:
/// `(1/2) D_R Omega` with `Omega = rate * axis`.
pub fn rotation_derivative(axis: PureQuaternion, angle: f64, rate: f64) -> Result<DualQuaternion> {
    let d = DualQuaternion::rotation(axis, angle)?;
    let omega = DualQuaternion::new(axis.scale(rate).as_quaternion(), Quaternion::ZERO);
    Ok((d * omega).scale(0.5))
}

/// Time derivative of the conjugate of a rotation dual quaternion:
/// `-(1/2) Omega D_R*`.
pub fn rotation_conjugate_derivative(
    axis: PureQuaternion,
    angle: f64,
    rate: f64,
) -> Result<DualQuaternion> {
    let d = DualQuaternion::rotation(axis, angle)?;
    let omega = DualQuaternion::new(axis.scale(rate).as_quaternion(), Quaternion::ZERO);
    Ok((omega * d.conjugate()).scale(-0.5))
}

/// Time derivative of a translation dual quaternion along a possibly moving
/// axis: `eps ((rate/2) axis + (displacement/2) axis_rate)`. Pass a zero
/// `axis_rate` for the usual fixed-axis case.
pub fn translation_derivative(
    axis: PureQuaternion,
    displacement: f64,
    displacement_rate: f64,
    axis_rate: PureQuaternion,
) -> Result<DualQuaternion> {
    axis.check_unit_axis()?;
    let dual = axis.scale(0.5 * displacement_rate) + axis_rate.scale(0.5 * displacement);
    Ok(DualQuaternion::new(Quaternion::ZERO, dual.as_quaternion()))
}

/// Rigid-body twist: angular velocity and the linear velocity of the point
/// at the origin of the frame it is expressed in. Packs into a dual
/// quaternion as `angular + eps linear`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Twist {
    pub angular: PureQuaternion,
    pub linear: PureQuaternion,
}

/// Wrench: force and the torque about the origin of the frame it is
/// expressed in. Packs into a dual quaternion as `force + eps torque`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Wrench {
    pub force: PureQuaternion,
    pub torque: PureQuaternion,
}

impl Twist {
    pub const ZERO: Twist = Twist {
        angular: PureQuaternion::ZERO,
        linear: PureQuaternion::ZERO,
    };

    #[inline]
    pub fn new(angular: PureQuaternion, linear: PureQuaternion) -> Self {
        Twist { angular, linear }
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Twist { angular: self.angular.scale(s), linear: self.linear.scale(s) }
    }

    /// Twist commutator, the dual-quaternion commutator restricted to pure
    /// pairs: angular `w1 x w2`, linear `w1 x v2 + v1 x w2`.
    #[inline]
    pub fn cross(self, o: Twist) -> Twist {
        Twist {
            angular: self.angular.cross(o.angular),
            linear: self.angular.cross(o.linear) + self.linear.cross(o.angular),
        }
    }

    /// Power pairing with a wrench expressed in the same frame.
    #[inline]
    pub fn dot(self, w: Wrench) -> f64 {
        self.angular.dot(w.torque) + self.linear.dot(w.force)
    }

    #[inline]
    pub fn as_dual_quaternion(self) -> DualQuaternion {
        DualQuaternion::new(self.angular.as_quaternion(), self.linear.as_quaternion())
    }
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        force: PureQuaternion::ZERO,
        torque: PureQuaternion::ZERO,
    };

    #[inline]
    pub fn new(force: PureQuaternion, torque: PureQuaternion) -> Self {
        Wrench { force, torque }
    }

    #[inline]
    pub fn as_dual_quaternion(self) -> DualQuaternion {
        DualQuaternion::new(self.force.as_quaternion(), self.torque.as_quaternion())
    }
}

impl Add for Twist {
    type Output = Twist;
    #[inline]
    fn add(self, o: Twist) -> Twist {
        Twist { angular: self.angular + o.angular, linear: self.linear + o.linear }
    }
}

impl Add for Wrench {
    type Output = Wrench;
    #[inline]
    fn add(self, o: Wrench) -> Wrench {
        Wrench { force: self.force + o.force, torque: self.torque + o.torque }
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    #[inline]
    fn sub(self, o: Wrench) -> Wrench {
        Wrench { force: self.force - o.force, torque: self.torque - o.torque }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose_fixture() -> DualQuaternion {
        let axis = PureQuaternion::new(0.2, -0.4, 0.6).normalize().unwrap();
        let r = Quaternion::from_axis_angle(axis, 0.83).unwrap();
        DualQuaternion::from_rotation_translation(r, PureQuaternion::new(0.3, -0.1, 1.2)).unwrap()
    }

    #[test]
    fn conjugate_anti_commutes_over_products() {
        let a = pose_fixture();
        let b = DualQuaternion::rotation(PureQuaternion::Y, -0.7).unwrap()
            * DualQuaternion::translation_vec(PureQuaternion::new(0.0, 2.0, -0.5));
        let lhs = (a * b).conjugate();
        let rhs = b.conjugate() * a.conjugate();
        assert!((lhs.primary - rhs.primary).norm() < 1e-14);
        assert!((lhs.dual - rhs.dual).norm() < 1e-14);
    }

    #[test]
    fn translation_is_self_conjugate() {
        let t = DualQuaternion::translation(PureQuaternion::Z, 0.75).unwrap();
        assert_eq!(t.conjugate(), t);
    }

    #[test]
    fn point_roundtrip_and_transform() {
        let p = PureQuaternion::new(0.4, -0.2, 0.9);
        assert_eq!(DualQuaternion::point(p).point_position(), p);

        // Pure translation moves the point, pure rotation spins it about the
        // origin, and a combined pose does rotation first.
        let x = pose_fixture();
        let sandwich = x * DualQuaternion::point(p) * x.conjugate();
        let direct = x.transform_point(p);
        assert!((sandwich.point_position() - direct).norm() < 1e-14);
        assert!((sandwich.primary - Quaternion::IDENTITY).norm() < 1e-14);

        let expect = x.rotation_part().rotate(p) + x.translation_part();
        assert!((direct - expect).norm() < 1e-14);
    }

    #[test]
    fn pose_inverse_is_two_sided() {
        let x = pose_fixture();
        let e1 = x * x.inverse();
        let e2 = x.inverse() * x;
        for e in [e1, e2] {
            assert!((e.primary - Quaternion::IDENTITY).norm() < 1e-14);
            assert!(e.dual.norm() < 1e-14);
        }
    }

    #[test]
    fn twist_transform_matches_sandwich() {
        let x = pose_fixture();
        let t = Twist::new(
            PureQuaternion::new(0.3, 1.0, -0.2),
            PureQuaternion::new(-0.6, 0.25, 0.8),
        );
        let fast = x.transform_twist(t);
        let sandwich = x * t.as_dual_quaternion() * x.inverse();
        assert!((sandwich.primary.vector() - fast.angular).norm() < 1e-14);
        assert!(sandwich.primary.w.abs() < 1e-14);
        assert!((sandwich.dual.vector() - fast.linear).norm() < 1e-14);
        assert!(sandwich.dual.w.abs() < 1e-14);
    }

    #[test]
    fn twist_cross_matches_commutator() {
        let a = Twist::new(
            PureQuaternion::new(0.1, -0.9, 0.33),
            PureQuaternion::new(1.4, 0.2, -0.7),
        );
        let b = Twist::new(
            PureQuaternion::new(-0.5, 0.6, 0.8),
            PureQuaternion::new(0.05, -1.1, 0.4),
        );
        let via_dq = a.as_dual_quaternion().commutator(b.as_dual_quaternion());
        let direct = a.cross(b);
        assert!((via_dq.primary.vector() - direct.angular).norm() < 1e-14);
        assert!((via_dq.dual.vector() - direct.linear).norm() < 1e-14);
    }

    #[test]
    fn rotation_derivative_matches_finite_differences() {
        let axis = PureQuaternion::new(-0.3, 0.5, 0.81).normalize().unwrap();
        let angle = 0.9_f64;
        let rate = 1.7_f64;
        let h = 1e-6;
        let fd = |f: &dyn Fn(f64) -> DualQuaternion| {
            let plus = f(angle + rate * h);
            let minus = f(angle - rate * h);
            (plus - minus).scale(1.0 / (2.0 * h))
        };

        let analytic = rotation_derivative(axis, angle, rate).unwrap();
        let numeric = fd(&|a| DualQuaternion::rotation(axis, a).unwrap());
        assert!((analytic.primary - numeric.primary).norm() < 1e-9);

        let analytic_c = rotation_conjugate_derivative(axis, angle, rate).unwrap();
        let numeric_c = fd(&|a| DualQuaternion::rotation(axis, a).unwrap().conjugate());
        assert!((analytic_c.primary - numeric_c.primary).norm() < 1e-9);
    }

    #[test]
    fn translation_derivative_covers_moving_axes() {
        // Fixed axis: only the displacement rate contributes.
        let d = translation_derivative(PureQuaternion::X, 2.0, 3.0, PureQuaternion::ZERO).unwrap();
        assert_eq!(d.dual.vector(), PureQuaternion::new(1.5, 0.0, 0.0));
        assert_eq!(d.primary, Quaternion::ZERO);

        // Moving axis: finite differences over t of (d(t)/2) axis(t), with
        // d(t) = 2 + 3t and axis(t) rotating in the xy plane.
        let h = 1e-6;
        let traj = |t: f64| {
            let axis = PureQuaternion::new(t.cos(), t.sin(), 0.0);
            axis.scale(0.5 * (2.0 + 3.0 * t))
        };
        let numeric = (traj(h) - traj(-h)).scale(1.0 / (2.0 * h));
        let analytic = translation_derivative(
            PureQuaternion::X,
            2.0,
            3.0,
            PureQuaternion::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        assert!((analytic.dual.vector() - numeric).norm() < 1e-9);
    }

    #[test]
    fn homogeneous_matrix_agrees_with_point_action() {
        let x = pose_fixture();
        let m = x.to_homogeneous().unwrap();
        let p = PureQuaternion::new(-0.7, 0.45, 0.2);
        let via_dq = x.transform_point(p);
        let v = m * nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
        assert!((via_dq.x - v[0]).abs() < 1e-14);
        assert!((via_dq.y - v[1]).abs() < 1e-14);
        assert!((via_dq.z - v[2]).abs() < 1e-14);
    }

    #[test]
    fn non_unit_pose_is_rejected_by_homogeneous_conversion() {
        let bad = DualQuaternion::new(Quaternion::new(1.1, 0.0, 0.0, 0.0), Quaternion::ZERO);
        assert!(matches!(
            bad.to_homogeneous(),
            Err(Error::NonUnitDualQuaternion { .. })
        ));
    }

    #[test]
    fn normalize_pose_restores_unit_invariants() {
        let x = pose_fixture();
        let drifted = DualQuaternion::new(
            x.primary.scale(1.0 + 3e-8),
            x.dual + x.primary.scale(2e-8),
        );
        assert!(drifted.check_unit_pose().is_err());
        let fixed = drifted.normalize_pose().unwrap();
        assert!(fixed.check_unit_pose().is_ok());
        assert!((fixed.translation_part() - x.translation_part()).norm() < 1e-6);
    }
}
