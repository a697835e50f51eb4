//! Minimum-jerk task-space planning: per-axis quintic polynomials matching
//! position, velocity and acceleration at both ends, which minimize the
//! jerk cost `J = integral of |d^3 p / dt^3|^2 dt` over all sufficiently
//! smooth curves with those boundary conditions. Also provides a
//! finite-difference jerk-cost estimator that works from sampled positions
//! alone.

use crate::error::{Error, Result};
use crate::quat::PureQuaternion;

/// Default planning demo: a comfortable reach in front of the hip.
pub const DEFAULT_START: PureQuaternion = PureQuaternion { x: 0.8, y: -0.06, z: 0.1 };
pub const DEFAULT_END: PureQuaternion = PureQuaternion { x: 0.7, y: 0.48, z: 0.08 };
pub const DEFAULT_DURATION: f64 = 2.0;

/// Position, velocity and acceleration at one end of a planned segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryState {
    pub position: PureQuaternion,
    pub velocity: PureQuaternion,
    pub acceleration: PureQuaternion,
}

impl BoundaryState {
    pub fn at_rest(position: PureQuaternion) -> Self {
        BoundaryState {
            position,
            velocity: PureQuaternion::ZERO,
            acceleration: PureQuaternion::ZERO,
        }
    }

    fn validate(&self, which: &str) -> Result<()> {
        for (name, v) in [
            ("position", self.position),
            ("velocity", self.velocity),
            ("acceleration", self.acceleration),
        ] {
            if !v.is_finite() {
                return Err(Error::validation(format!("{which}.{name}"), "must be finite"));
            }
        }
        Ok(())
    }
}

/// One axis of the plan, `p(t) = c0 + c1 t + ... + c5 t^5`.
#[derive(Clone, Copy, Debug)]
struct Quintic {
    c: [f64; 6],
}

impl Quintic {
    fn fit(p0: f64, v0: f64, a0: f64, p1: f64, v1: f64, a1: f64, t: f64) -> Self {
        let (t2, t3, t4, t5) = (t * t, t * t * t, t * t * t * t, t * t * t * t * t);
        let a = p1 - p0 - v0 * t - 0.5 * a0 * t2;
        let b = v1 - v0 - a0 * t;
        let c = a1 - a0;
        Quintic {
            c: [
                p0,
                v0,
                0.5 * a0,
                (10.0 * a - 4.0 * b * t + 0.5 * c * t2) / t3,
                (-15.0 * a + 7.0 * b * t - c * t2) / t4,
                (6.0 * a - 3.0 * b * t + 0.5 * c * t2) / t5,
            ],
        }
    }

    fn position(&self, t: f64) -> f64 {
        let c = &self.c;
        ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0]
    }

    fn velocity(&self, t: f64) -> f64 {
        let c = &self.c;
        (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]
    }

    fn acceleration(&self, t: f64) -> f64 {
        let c = &self.c;
        ((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2]
    }

    fn jerk(&self, t: f64) -> f64 {
        let c = &self.c;
        (60.0 * c[5] * t + 24.0 * c[4]) * t + 6.0 * c[3]
    }

    /// Exact `integral of jerk^2` over `[0, duration]`; the jerk is the
    /// quadratic `alpha + beta t + gamma t^2`.
    fn jerk_squared_integral(&self, duration: f64) -> f64 {
        let alpha = 6.0 * self.c[3];
        let beta = 24.0 * self.c[4];
        let gamma = 60.0 * self.c[5];
        let t = duration;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t * t * t * t, t * t * t * t * t);
        alpha * alpha * t
            + alpha * beta * t2
            + (beta * beta / 3.0 + 2.0 * alpha * gamma / 3.0) * t3
            + 0.5 * beta * gamma * t4
            + gamma * gamma * t5 / 5.0
    }
}

/// A planned segment: three independent quintics over a common duration.
#[derive(Clone, Copy, Debug)]
pub struct MinJerkTrajectory {
    axes: [Quintic; 3],
    duration: f64,
}

/// The planned state at one sample instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: PureQuaternion,
    pub velocity: PureQuaternion,
    pub acceleration: PureQuaternion,
    pub jerk: PureQuaternion,
}

/// Fits the unique jerk-minimizing quintic segment between two boundary
/// states over the given duration.
pub fn plan_min_jerk(
    start: &BoundaryState,
    end: &BoundaryState,
    duration: f64,
) -> Result<MinJerkTrajectory> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidDuration(duration));
    }
    start.validate("start")?;
    end.validate("end")?;
    let axis = |p0: f64, v0: f64, a0: f64, p1: f64, v1: f64, a1: f64| {
        Quintic::fit(p0, v0, a0, p1, v1, a1, duration)
    };
    let (s, e) = (start, end);
    Ok(MinJerkTrajectory {
        axes: [
            axis(s.position.x, s.velocity.x, s.acceleration.x, e.position.x, e.velocity.x, e.acceleration.x),
            axis(s.position.y, s.velocity.y, s.acceleration.y, e.position.y, e.velocity.y, e.acceleration.y),
            axis(s.position.z, s.velocity.z, s.acceleration.z, e.position.z, e.velocity.z, e.acceleration.z),
        ],
        duration,
    })
}

impl MinJerkTrajectory {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    fn eval(&self, f: impl Fn(&Quintic, f64) -> f64, t: f64) -> PureQuaternion {
        PureQuaternion::new(f(&self.axes[0], t), f(&self.axes[1], t), f(&self.axes[2], t))
    }

    pub fn position(&self, t: f64) -> PureQuaternion {
        self.eval(Quintic::position, t)
    }

    pub fn velocity(&self, t: f64) -> PureQuaternion {
        self.eval(Quintic::velocity, t)
    }

    pub fn acceleration(&self, t: f64) -> PureQuaternion {
        self.eval(Quintic::acceleration, t)
    }

    pub fn jerk(&self, t: f64) -> PureQuaternion {
        self.eval(Quintic::jerk, t)
    }

    pub fn state_at(&self, t: f64) -> TrajectorySample {
        TrajectorySample {
            time: t,
            position: self.position(t),
            velocity: self.velocity(t),
            acceleration: self.acceleration(t),
            jerk: self.jerk(t),
        }
    }

    /// `count` samples uniformly spaced over `[0, duration]`, endpoints
    /// included.
    pub fn sample(&self, count: usize) -> Result<Vec<TrajectorySample>> {
        if count < 2 {
            return Err(Error::InvalidSampleCount { got: count, need: 2 });
        }
        let step = self.duration / (count - 1) as f64;
        Ok((0..count).map(|k| self.state_at(k as f64 * step)).collect())
    }

    /// Exact jerk cost of this plan. For rest-to-rest segments this equals
    /// `720 |p1 - p0|^2 / duration^5`.
    pub fn jerk_cost(&self) -> f64 {
        self.axes.iter().map(|q| q.jerk_squared_integral(self.duration)).sum()
    }
}

/// Estimates the jerk cost from uniformly spaced position samples alone:
/// third derivatives by finite differences (five-point central stencil in
/// the interior, one-sided third differences at the two points nearest each
/// end), then the trapezoid rule on `|jerk|^2`. Exact for cubics; needs at
/// least five samples.
pub fn jerk_energy_from_positions(positions: &[PureQuaternion], duration: f64) -> Result<f64> {
    let n = positions.len();
    if n < 5 {
        return Err(Error::TooFewSamples { got: n, need: 5 });
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidDuration(duration));
    }
    let h = duration / (n - 1) as f64;
    let h3 = h * h * h;
    let p = positions;
    let jerk = |i: usize| -> PureQuaternion {
        let d = if i < 2 {
            // forward third difference, exact through cubic terms
            p[i + 3] - p[i + 2].scale(3.0) + p[i + 1].scale(3.0) - p[i]
        } else if i >= n - 2 {
            p[i] - p[i - 1].scale(3.0) + p[i - 2].scale(3.0) - p[i - 3]
        } else {
            (p[i + 2] - p[i - 2] + (p[i - 1] - p[i + 1]).scale(2.0)).scale(0.5)
        };
        d.scale(1.0 / h3)
    };
    let sq = |i: usize| {
        let j = jerk(i);
        j.dot(j)
    };
    let mut total = 0.5 * (sq(0) + sq(n - 1));
    for i in 1..n - 1 {
        total += sq(i);
    }
    Ok(total * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_boundary(rng: &mut ChaCha20Rng) -> BoundaryState {
        let mut v = || PureQuaternion::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        BoundaryState { position: v(), velocity: v(), acceleration: v() }
    }

    #[test]
    fn boundary_conditions_are_met_exactly() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for _ in 0..40 {
            let (s, e) = (random_boundary(&mut rng), random_boundary(&mut rng));
            let t = rng.gen_range(0.3..4.0);
            let plan = plan_min_jerk(&s, &e, t).unwrap();
            for (got, want) in [
                (plan.position(0.0), s.position),
                (plan.velocity(0.0), s.velocity),
                (plan.acceleration(0.0), s.acceleration),
                (plan.position(t), e.position),
                (plan.velocity(t), e.velocity),
                (plan.acceleration(t), e.acceleration),
            ] {
                assert_abs_diff_eq!(got.x, want.x, epsilon = 1e-9);
                assert_abs_diff_eq!(got.y, want.y, epsilon = 1e-9);
                assert_abs_diff_eq!(got.z, want.z, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rest_to_rest_cost_has_closed_form() {
        let s = BoundaryState::at_rest(DEFAULT_START);
        let e = BoundaryState::at_rest(DEFAULT_END);
        let plan = plan_min_jerk(&s, &e, DEFAULT_DURATION).unwrap();
        let d = DEFAULT_END - DEFAULT_START;
        let expected = 720.0 * d.dot(d) / DEFAULT_DURATION.powi(5);
        assert_relative_eq!(plan.jerk_cost(), expected, max_relative = 1e-12);
    }

    #[test]
    fn rest_to_rest_midpoint_is_the_mean() {
        let s = BoundaryState::at_rest(PureQuaternion::new(0.2, -0.4, 0.9));
        let e = BoundaryState::at_rest(PureQuaternion::new(-0.6, 1.0, 0.3));
        let plan = plan_min_jerk(&s, &e, 1.7).unwrap();
        let mid = plan.position(0.85);
        let mean = (s.position + e.position).scale(0.5);
        assert_abs_diff_eq!(mid.x, mean.x, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.y, mean.y, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.z, mean.z, epsilon = 1e-12);
    }

    #[test]
    fn doubling_the_duration_divides_rest_cost_by_32() {
        let s = BoundaryState::at_rest(PureQuaternion::new(0.1, 0.2, 0.3));
        let e = BoundaryState::at_rest(PureQuaternion::new(0.9, -0.5, 0.0));
        let short = plan_min_jerk(&s, &e, 1.3).unwrap();
        let long = plan_min_jerk(&s, &e, 2.6).unwrap();
        assert_relative_eq!(long.jerk_cost(), short.jerk_cost() / 32.0, max_relative = 1e-12);
    }

    #[test]
    fn finite_difference_estimate_converges_to_exact_cost() {
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        let (s, e) = (random_boundary(&mut rng), random_boundary(&mut rng));
        let plan = plan_min_jerk(&s, &e, 2.0).unwrap();
        let positions: Vec<_> =
            plan.sample(4001).unwrap().iter().map(|s| s.position).collect();
        let est = jerk_energy_from_positions(&positions, 2.0).unwrap();
        assert_relative_eq!(est, plan.jerk_cost(), max_relative = 1e-4);
    }

    #[test]
    fn estimator_is_exact_for_constant_jerk() {
        // p(t) = c t^3 has constant jerk 6c; every stencil and the trapezoid
        // rule are exact, so the estimate must equal |6c|^2 T to roundoff.
        let c = PureQuaternion::new(0.3, -0.7, 0.2);
        let t_total = 1.8;
        let n = 37;
        let positions: Vec<_> = (0..n)
            .map(|k| {
                let t = t_total * k as f64 / (n - 1) as f64;
                c.scale(t * t * t)
            })
            .collect();
        let est = jerk_energy_from_positions(&positions, t_total).unwrap();
        let jerk = c.scale(6.0);
        assert_relative_eq!(est, jerk.dot(jerk) * t_total, max_relative = 1e-10);
    }

    #[test]
    fn admissible_perturbations_only_increase_the_cost() {
        // delta(t) = eps t^3 (T-t)^3 keeps all six boundary conditions, so
        // the quintic must beat every perturbed curve. The perturbed cost is
        // integrated with composite Simpson on the exact perturbed jerk.
        let s = BoundaryState::at_rest(PureQuaternion::new(0.0, 0.1, -0.2));
        let e = BoundaryState::at_rest(PureQuaternion::new(0.5, -0.3, 0.4));
        let t_total = 2.0;
        let plan = plan_min_jerk(&s, &e, t_total).unwrap();
        let base = plan.jerk_cost();
        for eps in [1e-3, -1e-3, 0.05, -0.02] {
            let delta_jerk = |t: f64| {
                eps * (6.0 * t_total.powi(3) - 72.0 * t_total.powi(2) * t
                    + 180.0 * t_total * t * t
                    - 120.0 * t * t * t)
            };
            let f = |t: f64| {
                let j = plan.jerk(t);
                let jx = j.x + delta_jerk(t);
                jx * jx + j.y * j.y + j.z * j.z
            };
            let n = 2000;
            let h = t_total / n as f64;
            let mut sum = f(0.0) + f(t_total);
            for k in 1..n {
                sum += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            let perturbed = sum * h / 3.0;
            assert!(
                perturbed > base,
                "eps = {eps}: perturbed {perturbed} <= base {base}"
            );
        }
    }

    #[test]
    fn samples_cover_both_endpoints() {
        let s = BoundaryState::at_rest(DEFAULT_START);
        let e = BoundaryState::at_rest(DEFAULT_END);
        let plan = plan_min_jerk(&s, &e, 2.0).unwrap();
        let samples = plan.sample(11).unwrap();
        assert_eq!(samples.len(), 11);
        assert_eq!(samples[0].time, 0.0);
        assert_abs_diff_eq!(samples[10].time, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(samples[0].position.x, DEFAULT_START.x, epsilon = 1e-15);
        assert_abs_diff_eq!(samples[10].position.y, DEFAULT_END.y, epsilon = 1e-9);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let s = BoundaryState::at_rest(DEFAULT_START);
        let e = BoundaryState::at_rest(DEFAULT_END);
        assert!(matches!(plan_min_jerk(&s, &e, 0.0), Err(Error::InvalidDuration(_))));
        assert!(matches!(plan_min_jerk(&s, &e, f64::NAN), Err(Error::InvalidDuration(_))));
        let plan = plan_min_jerk(&s, &e, 1.0).unwrap();
        assert!(matches!(plan.sample(1), Err(Error::InvalidSampleCount { .. })));
        let four = vec![PureQuaternion::ZERO; 4];
        assert!(matches!(
            jerk_energy_from_positions(&four, 1.0),
            Err(Error::TooFewSamples { got: 4, need: 5 })
        ));
        let mut bad = s;
        bad.velocity = PureQuaternion::new(f64::NAN, 0.0, 0.0);
        assert!(plan_min_jerk(&bad, &e, 1.0).is_err());
    }
}
