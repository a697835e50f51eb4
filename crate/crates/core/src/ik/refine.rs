//! Damped least-squares polishing of a joint-configuration estimate.
//!
//! The network lands close to a working configuration; this pass drives the
//! remaining tip position error to numerical noise. Nine parameters
//! (three angles, two axes) are adjusted against the three-component position
//! residual, so the system is underdetermined and damping picks the
//! smallest-norm update. Axes are projected back to the unit sphere and the
//! knee angle clamped into its motion range after every step.

use nalgebra::{Cholesky, SMatrix, SVector};

use crate::error::Result;
use crate::kinematics::fk_position;
use crate::limb::{within_rom, JointState, LimbModel};
use crate::quat::PureQuaternion;

use super::mlp::renormalize_axis;

#[derive(Debug, Clone)]
pub struct RefineConfig {
    /// Stop once the position residual norm (m) falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Central-difference step for the numerical Jacobian.
    pub fd_step: f64,
    /// Initial damping factor; adapts as steps succeed or fail.
    pub lambda0: f64,
    /// Retry once from a fixed interior posture when the search stalls.
    /// Helps isolated solves escape bad starting branches; disable when
    /// tracking a continuous trajectory, where jumping to the restart branch
    /// would tear the joint series apart.
    pub stall_restart: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            tolerance: 1e-9,
            max_iterations: 200,
            fd_step: 1e-6,
            lambda0: 1e-3,
            stall_restart: true,
        }
    }
}

/// Best configuration found by [`ik_refine`], with the tip position residual
/// that remains. `converged` reports whether the residual met the tolerance;
/// for unreachable targets it stays false and the residual approximates the
/// distance from the target to the reachable workspace.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub state: JointState,
    /// Norm of `target - fk_position(state)` in meters.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn pack(state: &JointState) -> [f64; 9] {
    [
        state.theta[0],
        state.theta[1],
        state.theta[2],
        state.hip_axis.x,
        state.hip_axis.y,
        state.hip_axis.z,
        state.ankle_axis.x,
        state.ankle_axis.y,
        state.ankle_axis.z,
    ]
}

fn unpack(w: &[f64; 9]) -> JointState {
    JointState::new(
        [w[0], w[1], w[2]],
        renormalize_axis(w[3], w[4], w[5]),
        renormalize_axis(w[6], w[7], w[8]),
    )
}

fn wrap_angle(a: f64) -> f64 {
    if a.is_finite() {
        a.sin().atan2(a.cos())
    } else {
        a
    }
}

fn project(model: &LimbModel, w: &mut [f64; 9]) {
    w[0] = wrap_angle(w[0]);
    w[2] = wrap_angle(w[2]);
    let knee = model.rom.knee_flexion_extension;
    w[1] = w[1].clamp(knee[0].to_radians(), knee[1].to_radians());
    let hip = renormalize_axis(w[3], w[4], w[5]);
    w[3] = hip.x;
    w[4] = hip.y;
    w[5] = hip.z;
    let ankle = renormalize_axis(w[6], w[7], w[8]);
    w[6] = ankle.x;
    w[7] = ankle.y;
    w[8] = ankle.z;
}

fn residual(
    model: &LimbModel,
    w: &[f64; 9],
    target: PureQuaternion,
) -> Result<(SVector<f64, 3>, JointState)> {
    let state = unpack(w);
    let p = fk_position(model, &state)?;
    Ok((
        SVector::<f64, 3>::new(target.x - p.x, target.y - p.y, target.z - p.z),
        state,
    ))
}

fn rom_ok(model: &LimbModel, state: &JointState) -> bool {
    within_rom(model, state).map(|c| c.ok()).unwrap_or(false)
}

/// Interior restart point for stalled searches: near the neutral posture but
/// deliberately off every symmetry axis, so no residual direction is blind to
/// the Jacobian the way it can be at exactly neutral.
fn restart_state() -> JointState {
    JointState::new(
        [0.08, -0.12, 0.06],
        renormalize_axis(0.15, 0.1, 1.0),
        renormalize_axis(-0.1, 0.12, 1.0),
    )
}

/// Iteratively corrects `initial` so the foot tip lands on `target`.
///
/// Once the iterate sits inside the valid motion range the search never
/// leaves it: full steps that would exit are shortened until they stay
/// feasible, which lets the solver slide along range boundaries toward
/// targets near the edge of the workspace. Always returns a best-effort
/// answer: the configuration with the smallest residual among the valid
/// iterates visited, falling back to the neutral posture if the search never
/// entered the valid range. Callers decide what residual is acceptable via
/// `converged`.
pub fn ik_refine(
    model: &LimbModel,
    initial: &JointState,
    target: PureQuaternion,
    config: &RefineConfig,
) -> Result<RefineOutcome> {
    let mut w = pack(initial);
    project(model, &mut w);
    let (mut r, state) = residual(model, &w, target)?;
    let mut r_norm = r.norm();
    let mut in_rom = rom_ok(model, &state);
    let mut best: Option<(JointState, f64)> = if in_rom && r_norm.is_finite() {
        Some((state, r_norm))
    } else {
        None
    };
    if in_rom && r_norm <= config.tolerance {
        return Ok(RefineOutcome {
            state,
            residual: r_norm,
            iterations: 0,
            converged: true,
        });
    }

    let full_fractions: &[f64] = &[1.0, 0.5, 0.25, 0.125, 0.0625];
    let fallback_fractions: &[f64] = &[1.0, 0.25, 0.0625];
    let mut plans: Vec<(Vec<usize>, &[f64])> = Vec::with_capacity(13);
    plans.push(((0..9).collect(), full_fractions));
    for block in [[0, 1, 2], [3, 4, 5], [6, 7, 8]] {
        plans.push((block.to_vec(), fallback_fractions));
    }
    for i in 0..9 {
        plans.push((vec![i], fallback_fractions));
    }

    let mut lambda = config.lambda0;
    let mut iterations = 0;
    let mut stalled = 0usize;
    let mut restarted = false;
    for iter in 1..=config.max_iterations {
        iterations = iter;
        // Two ways a search goes wrong enough to warrant the one interior
        // restart: no accepted step for a long stretch, or convergence onto
        // the solution sheet outside the valid motion range (descending the
        // residual never pulls the iterate back into range, so waiting
        // longer cannot help).
        let infeasibly_converged = !in_rom && r_norm <= config.tolerance.max(1e-9);
        if (stalled >= 15 || infeasibly_converged) && !restarted && config.stall_restart {
            restarted = true;
            stalled = 0;
            lambda = config.lambda0;
            w = pack(&restart_state());
            project(model, &mut w);
            let (r0, anchor) = residual(model, &w, target)?;
            r = r0;
            r_norm = r.norm();
            in_rom = rom_ok(model, &anchor);
            if in_rom && best.as_ref().map(|(_, b)| r_norm < *b).unwrap_or(true) {
                best = Some((anchor, r_norm));
            }
        }
        let mut jac = SMatrix::<f64, 3, 9>::zeros();
        for col in 0..9 {
            let mut plus = w;
            plus[col] += config.fd_step;
            let mut minus = w;
            minus[col] -= config.fd_step;
            let (rp, _) = residual(model, &plus, target)?;
            let (rm, _) = residual(model, &minus, target)?;
            jac.set_column(col, &((rp - rm) / (2.0 * config.fd_step)));
        }
        let mut a = jac.transpose() * jac;
        for i in 0..9 {
            a[(i, i)] += lambda * lambda;
        }
        let b = jac.transpose() * r;
        let Some(ch) = Cholesky::new(a) else {
            lambda *= 4.0;
            continue;
        };
        let step = ch.solve(&b);

        // The full step first, progressively shortened. When every fraction
        // of it is unusable (pressed against a motion-range boundary the
        // step points across), fall back to moving one parameter block or a
        // single coordinate at a time: restricted moves can slide along a
        // boundary that blocks the joint step.
        let mut accepted = false;
        'plans: for (mask, fractions) in &plans {
            for &fraction in *fractions {
                let mut cand = w;
                for &i in mask {
                    cand[i] -= fraction * step[i];
                }
                project(model, &mut cand);
                let (r_new, cand_state) = residual(model, &cand, target)?;
                let norm_new = r_new.norm();
                if !(norm_new < r_norm) {
                    continue;
                }
                let cand_in_rom = rom_ok(model, &cand_state);
                if in_rom && !cand_in_rom {
                    continue;
                }
                w = cand;
                r = r_new;
                r_norm = norm_new;
                if cand_in_rom {
                    in_rom = true;
                    if best.as_ref().map(|(_, b)| norm_new < *b).unwrap_or(true) {
                        best = Some((cand_state, norm_new));
                    }
                }
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break 'plans;
            }
        }
        if accepted {
            stalled = 0;
        } else {
            stalled += 1;
            lambda *= 4.0;
        }
        if best.as_ref().map(|(_, b)| *b <= config.tolerance) == Some(true) {
            break;
        }
    }

    let (state, residual) = match best {
        Some(found) => found,
        None => {
            let neutral = JointState::neutral();
            let p = fk_position(model, &neutral)?;
            let d = PureQuaternion::new(target.x - p.x, target.y - p.y, target.z - p.z).norm();
            (neutral, d)
        }
    };
    Ok(RefineOutcome {
        converged: residual <= config.tolerance,
        state,
        residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limb::{sample_configuration, LimbModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn converged_input_returns_in_zero_iterations() {
        let model = LimbModel::default();
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let state = sample_configuration(&model, &mut rng).unwrap();
        let target = fk_position(&model, &state).unwrap();
        let out = ik_refine(&model, &state, target, &RefineConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        assert!(out.residual <= 1e-9);
        assert_eq!(out.state.theta, state.theta);
    }

    #[test]
    fn wrap_and_clamp_projection() {
        let model = LimbModel::default();
        let mut w = [
            4.0 * std::f64::consts::PI + 0.25,
            1.0,
            -7.0,
            0.0,
            0.0,
            2.0,
            3.0,
            0.0,
            0.0,
        ];
        project(&model, &mut w);
        assert!((w[0] - 0.25).abs() < 1e-12);
        assert_eq!(w[1], 0.0);
        assert!(w[2] > -std::f64::consts::PI && w[2] <= std::f64::consts::PI);
        assert_eq!(w[5], 1.0);
        assert_eq!(w[6], 1.0);
    }

    #[test]
    fn recovers_from_small_perturbations() {
        let model = LimbModel::default();
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let config = RefineConfig::default();
        for _ in 0..25 {
            let state = sample_configuration(&model, &mut rng).unwrap();
            let target = fk_position(&model, &state).unwrap();
            let perturbed = crate::ik::tests_support::perturb(&state, 5f64.to_radians(), &mut rng);
            let out = ik_refine(&model, &perturbed, target, &config).unwrap();
            assert!(
                out.residual < 1e-8,
                "residual {} after {} iterations",
                out.residual,
                out.iterations
            );
            assert!(within_rom(&model, &out.state).unwrap().ok());
        }
    }

    #[test]
    fn unreachable_target_reports_honest_residual() {
        let model = LimbModel::default();
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let state = sample_configuration(&model, &mut rng).unwrap();
        let target = PureQuaternion::new(2.0, 0.0, model.pelvis_offset);
        let out = ik_refine(&model, &state, target, &RefineConfig::default()).unwrap();
        assert!(!out.converged);
        let ball = 2.0 - model.reach();
        let folded =
            2.0 - (model.thigh.length + model.shank.length - model.foot.length);
        assert!(out.residual >= ball - 1e-9, "residual {}", out.residual);
        assert!(out.residual <= folded + 1e-9, "residual {}", out.residual);
        assert!(within_rom(&model, &out.state).unwrap().ok());
    }
}
