//! Property tests for the quaternion and dual-quaternion algebra: basis
//! table, norm multiplicativity, adjoint geometry, associativity, dual-part
//! nilpotency and the analytic derivative formulas.

use dqlimb::dq::{
    rotation_conjugate_derivative, rotation_derivative, translation_derivative, DualQuaternion,
};
use dqlimb::quat::{quat_cross, quat_inner};
use dqlimb::{PureQuaternion, Quaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn comp() -> impl Strategy<Value = f64> {
    -1.5f64..1.5
}

fn quat() -> impl Strategy<Value = Quaternion> {
    (comp(), comp(), comp(), comp()).prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
}

fn unit_quat() -> impl Strategy<Value = Quaternion> {
    quat().prop_filter_map("norm too small", |q| q.normalize().ok())
}

fn vec3() -> impl Strategy<Value = PureQuaternion> {
    (comp(), comp(), comp()).prop_map(|(x, y, z)| PureQuaternion::new(x, y, z))
}

fn dual_quat() -> impl Strategy<Value = DualQuaternion> {
    (quat(), quat()).prop_map(|(p, d)| DualQuaternion::new(p, d))
}

fn pose() -> impl Strategy<Value = DualQuaternion> {
    (unit_quat(), vec3())
        .prop_map(|(r, t)| DualQuaternion::from_rotation_translation(r, t).unwrap())
}

fn random_quat<R: Rng>(rng: &mut R) -> Quaternion {
    Quaternion::new(
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
        rng.gen_range(-2.0..2.0),
    )
}

fn dq_close(a: DualQuaternion, b: DualQuaternion, tol: f64) -> bool {
    (a.primary - b.primary).norm() < tol && (a.dual - b.dual).norm() < tol
}

#[test]
fn hamilton_basis_table() {
    let e = [
        Quaternion::new(1.0, 0.0, 0.0, 0.0),
        Quaternion::new(0.0, 1.0, 0.0, 0.0),
        Quaternion::new(0.0, 0.0, 1.0, 0.0),
        Quaternion::new(0.0, 0.0, 0.0, 1.0),
    ];
    let [one, i, j, k] = e;
    // Row-major products e[r] * e[c] for the right-handed table ij = k.
    let expected = [
        [one, i, j, k],
        [i, -one, k, -j],
        [j, -k, -one, i],
        [k, j, -i, -one],
    ];
    for r in 0..4 {
        for c in 0..4 {
            assert_eq!(e[r] * e[c], expected[r][c], "basis product {r} * {c}");
        }
    }
}

#[test]
fn quaternion_norm_is_multiplicative() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100_000 {
        let a = random_quat(&mut rng);
        let b = random_quat(&mut rng);
        let lhs = (a * b).norm();
        let rhs = a.norm() * b.norm();
        assert!(
            (lhs - rhs).abs() <= 1e-12 * rhs.max(1e-30),
            "|ab| = {lhs}, |a||b| = {rhs}"
        );
    }
}

proptest! {
    #[test]
    fn conjugate_reverses_quaternion_products(a in quat(), b in quat()) {
        let lhs = (a * b).conjugate();
        let rhs = b.conjugate() * a.conjugate();
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn adjoint_preserves_norm_and_inner_products(q in unit_quat(), p in vec3(), r in vec3()) {
        let pq = q.adjoint(p).unwrap();
        let rq = q.adjoint(r).unwrap();
        prop_assert!((pq.norm() - p.norm()).abs() < 1e-12 * (1.0 + p.norm()));
        prop_assert!((pq.dot(rq) - p.dot(r)).abs() < 1e-11 * (1.0 + p.norm() * r.norm()));
    }

    #[test]
    fn adjoint_of_conjugate_inverts_adjoint(q in unit_quat(), p in vec3()) {
        let back = q.conjugate().adjoint(q.adjoint(p).unwrap()).unwrap();
        prop_assert!((back - p).norm() < 1e-10);
    }

    #[test]
    fn dual_quaternion_product_associates(a in dual_quat(), b in dual_quat(), c in dual_quat()) {
        let lhs = (a * b) * c;
        let rhs = a * (b * c);
        let scale = 1.0
            + (a.primary.norm() + a.dual.norm())
                * (b.primary.norm() + b.dual.norm())
                * (c.primary.norm() + c.dual.norm());
        prop_assert!(dq_close(lhs, rhs, 1e-12 * scale));
    }

    #[test]
    fn dual_parts_never_reach_the_primary(p1 in quat(), d1 in quat(), p2 in quat(), d2 in quat()) {
        let full = DualQuaternion::new(p1, d1) * DualQuaternion::new(p2, d2);
        let bare = DualQuaternion::new(p1, Quaternion::ZERO) * DualQuaternion::new(p2, Quaternion::ZERO);
        // The primary row of the product is exactly p1 p2, independent of
        // either dual part, because eps^2 = 0 drops the d1 d2 term.
        prop_assert_eq!(full.primary, bare.primary);

        let eps_only = DualQuaternion::new(Quaternion::ZERO, d1) * DualQuaternion::new(Quaternion::ZERO, d2);
        prop_assert_eq!(eps_only.primary, Quaternion::ZERO);
        prop_assert_eq!(eps_only.dual, Quaternion::ZERO);
    }

    #[test]
    fn unit_poses_close_under_multiplication(a in pose(), b in pose()) {
        prop_assert!((a * b).is_unit(1e-9));
    }

    #[test]
    fn pose_products_compose_point_maps(a in pose(), b in pose(), p in vec3()) {
        let composed = (a * b).transform_point(p);
        let nested = a.transform_point(b.transform_point(p));
        prop_assert!((composed - nested).norm() < 1e-10);
    }

    #[test]
    fn cross_and_inner_match_component_oracles(a in vec3(), b in vec3()) {
        let c = quat_cross(a, b);
        prop_assert!((c.x - (a.y * b.z - a.z * b.y)).abs() < 1e-14);
        prop_assert!((c.y - (a.z * b.x - a.x * b.z)).abs() < 1e-14);
        prop_assert!((c.z - (a.x * b.y - a.y * b.x)).abs() < 1e-14);
        let d = quat_inner(a, b);
        prop_assert!((d - (a.x * b.x + a.y * b.y + a.z * b.z)).abs() < 1e-14);

        // The quaternion product of two pure quaternions carries both at once:
        // a b = -a.b + a x b.
        let prod = a.as_quaternion() * b.as_quaternion();
        prop_assert!((prod.w + d).abs() < 1e-13);
        prop_assert!((prod.vector() - c).norm() < 1e-13);
    }
}

#[test]
fn rotation_derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-5;
    for _ in 0..50 {
        let axis = PureQuaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize()
        .unwrap();
        let t: f64 = rng.gen_range(0.1..2.0);
        let angle = |t: f64| 0.9 * (1.3 * t).sin() + 0.4 * t;
        let rate = 0.9 * 1.3 * (1.3 * t).cos() + 0.4;

        let analytic = rotation_derivative(axis, angle(t), rate).unwrap();
        let plus = DualQuaternion::rotation(axis, angle(t + h)).unwrap();
        let minus = DualQuaternion::rotation(axis, angle(t - h)).unwrap();
        let fd = (plus - minus).scale(0.5 / h);
        assert!(dq_close(analytic, fd, 1e-6));

        let analytic_conj = rotation_conjugate_derivative(axis, angle(t), rate).unwrap();
        let fd_conj = (plus.conjugate() - minus.conjugate()).scale(0.5 / h);
        assert!(dq_close(analytic_conj, fd_conj, 1e-6));
    }
}

#[test]
fn translation_derivative_matches_finite_differences() {
    let h = 1e-5;
    let disp = |t: f64| 0.6 * t * t - 0.2 * t + 0.5;
    let disp_rate = |t: f64| 1.2 * t - 0.2;

    // Fixed axis first, then an axis swinging in the xy plane so the
    // axis-rate term of the derivative is exercised too.
    let fixed = PureQuaternion::new(0.6, -0.48, 0.64).normalize().unwrap();
    for t in [0.3, 0.9, 1.7] {
        let analytic =
            translation_derivative(fixed, disp(t), disp_rate(t), PureQuaternion::ZERO).unwrap();
        let plus = DualQuaternion::translation(fixed, disp(t + h)).unwrap();
        let minus = DualQuaternion::translation(fixed, disp(t - h)).unwrap();
        assert!(dq_close(analytic, (plus - minus).scale(0.5 / h), 1e-7));
    }

    let axis = |t: f64| PureQuaternion::new((0.7 * t).cos(), (0.7 * t).sin(), 0.0);
    let axis_rate =
        |t: f64| PureQuaternion::new(-0.7 * (0.7 * t).sin(), 0.7 * (0.7 * t).cos(), 0.0);
    for t in [0.2, 0.8, 1.5] {
        let analytic =
            translation_derivative(axis(t), disp(t), disp_rate(t), axis_rate(t)).unwrap();
        let plus = DualQuaternion::translation(axis(t + h), disp(t + h)).unwrap();
        let minus = DualQuaternion::translation(axis(t - h), disp(t - h)).unwrap();
        assert!(dq_close(analytic, (plus - minus).scale(0.5 / h), 1e-7));
    }
}
