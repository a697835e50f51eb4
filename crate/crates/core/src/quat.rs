//! Quaternion algebra over `f64` with the Hamilton convention
//! (`ij = k`, `jk = i`, `ki = j`, `i² = j² = k² = -1`).
//!
//! Two types live here: a general [`Quaternion`] and a [`PureQuaternion`]
//! (zero scalar part), which doubles as the 3-vector type used throughout
//! the crate. Unit quaternions act on pure quaternions through the
//! conjugation sandwich `q p q*`.

use crate::error::{Error, Result};
use std::ops::{Add, Mul, Neg, Sub};

/// Tolerance used by the unit-length preconditions on rotation axes,
/// quaternions and pose dual quaternions. Inputs further than this from
/// unit length are rejected rather than silently renormalized.
pub const UNIT_TOL: f64 = 1e-9;

/// Quaternion `w + x i + y j + z k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Quaternion with zero scalar part, also used as a plain 3-vector.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PureQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };
    pub const ZERO: Quaternion = Quaternion { w: 0.0, x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    /// Unit quaternion `cos(angle/2) + axis sin(angle/2)` rotating by `angle`
    /// (radians) about the unit `axis`.
    pub fn from_axis_angle(axis: PureQuaternion, angle: f64) -> Result<Self> {
        axis.check_unit_axis()?;
        let (s, c) = (0.5 * angle).sin_cos();
        Ok(Quaternion { w: c, x: s * axis.x, y: s * axis.y, z: s * axis.z })
    }

    #[inline]
    pub fn conjugate(self) -> Self {
        Quaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Four-dimensional dot product.
    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn normalize(self) -> Result<Self> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::NonUnitQuaternion { defect: f64::INFINITY });
        }
        Ok(self.scale(1.0 / n))
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        Quaternion { w: s * self.w, x: s * self.x, y: s * self.y, z: s * self.z }
    }

    #[inline]
    pub fn vector(self) -> PureQuaternion {
        PureQuaternion { x: self.x, y: self.y, z: self.z }
    }

    #[inline]
    pub fn is_unit(self, tol: f64) -> bool {
        (self.norm_squared() - 1.0).abs() <= tol
    }

    pub fn check_unit(self) -> Result<()> {
        let defect = (self.norm() - 1.0).abs();
        if defect > UNIT_TOL {
            return Err(Error::NonUnitQuaternion { defect });
        }
        Ok(())
    }

    /// Rotation sandwich `q p q*` for a unit quaternion, mapping the pure
    /// quaternion `p` to its rotated image.
    pub fn adjoint(self, p: PureQuaternion) -> Result<PureQuaternion> {
        self.check_unit()?;
        Ok(self.rotate(p))
    }

    /// Same sandwich as [`Quaternion::adjoint`] but without the unit check.
    /// Callers must guarantee `self` is unit length.
    #[inline]
    pub(crate) fn rotate(self, p: PureQuaternion) -> PureQuaternion {
        debug_assert!(self.is_unit(1e-6));
        // q p q* expanded: p + 2 w (v x p) + 2 v x (v x p), v = vector(q).
        let v = self.vector();
        let t = v.cross(p);
        let u = v.cross(t);
        PureQuaternion {
            x: p.x + 2.0 * (self.w * t.x + u.x),
            y: p.y + 2.0 * (self.w * t.y + u.y),
            z: p.z + 2.0 * (self.w * t.z + u.z),
        }
    }
}

impl PureQuaternion {
    pub const ZERO: PureQuaternion = PureQuaternion { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: PureQuaternion = PureQuaternion { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: PureQuaternion = PureQuaternion { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: PureQuaternion = PureQuaternion { x: 0.0, y: 0.0, z: 1.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        PureQuaternion { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        PureQuaternion {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        PureQuaternion { x: s * self.x, y: s * self.y, z: s * self.z }
    }

    pub fn normalize(self) -> Result<Self> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::NonUnitAxis { defect: f64::INFINITY });
        }
        Ok(self.scale(1.0 / n))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn check_unit_axis(self) -> Result<()> {
        let defect = (self.norm() - 1.0).abs();
        if !defect.is_finite() || defect > UNIT_TOL {
            return Err(Error::NonUnitAxis { defect });
        }
        Ok(())
    }

    #[inline]
    pub fn as_quaternion(self) -> Quaternion {
        Quaternion { w: 0.0, x: self.x, y: self.y, z: self.z }
    }
}

/// Inner product of two pure quaternions, `-(ab + ba)/2`. Coincides with the
/// Euclidean dot product of the corresponding 3-vectors.
#[inline]
pub fn quat_inner(a: PureQuaternion, b: PureQuaternion) -> f64 {
    a.dot(b)
}

/// Cross product of two pure quaternions, `(ab - ba)/2`.
#[inline]
pub fn quat_cross(a: PureQuaternion, b: PureQuaternion) -> PureQuaternion {
    a.cross(b)
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product.
    #[inline]
    fn mul(self, o: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion { w: self.w + o.w, x: self.x + o.x, y: self.y + o.y, z: self.z + o.z }
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion { w: self.w - o.w, x: self.x - o.x, y: self.y - o.y, z: self.z - o.z }
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

impl Add for PureQuaternion {
    type Output = PureQuaternion;
    #[inline]
    fn add(self, o: PureQuaternion) -> PureQuaternion {
        PureQuaternion { x: self.x + o.x, y: self.y + o.y, z: self.z + o.z }
    }
}

impl Sub for PureQuaternion {
    type Output = PureQuaternion;
    #[inline]
    fn sub(self, o: PureQuaternion) -> PureQuaternion {
        PureQuaternion { x: self.x - o.x, y: self.y - o.y, z: self.z - o.z }
    }
}

impl Neg for PureQuaternion {
    type Output = PureQuaternion;
    #[inline]
    fn neg(self) -> PureQuaternion {
        self.scale(-1.0)
    }
}

impl From<PureQuaternion> for Quaternion {
    fn from(p: PureQuaternion) -> Quaternion {
        p.as_quaternion()
    }
}

impl From<[f64; 3]> for PureQuaternion {
    fn from(v: [f64; 3]) -> PureQuaternion {
        PureQuaternion { x: v[0], y: v[1], z: v[2] }
    }
}

impl From<PureQuaternion> for [f64; 3] {
    fn from(p: PureQuaternion) -> [f64; 3] {
        [p.x, p.y, p.z]
    }
}
