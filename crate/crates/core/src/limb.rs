//! Lower-limb model: segment geometry and inertia, range-of-motion table,
//! joint state, configuration parsing and rejection sampling.
//!
//! The chain has a fixed pelvis-to-hip offset and three moving segments
//! (thigh, shank, foot) driven by seven degrees of freedom: a hip angle with
//! a free unit axis, a knee angle about the fixed axis `z`, and an ankle
//! angle with a free unit axis. In the base frame the extended limb lies
//! along `+x`, the pelvis-to-hip offset along `+z`, and knee flexion bends
//! the shank towards `+y`; x/y/z therefore play the roles of the
//! inferior, posterior and lateral anatomical axes.

use crate::error::{Error, Result};
use crate::kinematics;
use crate::quat::PureQuaternion;
use rand::Rng;
use serde::Deserialize;
use std::fmt;
use std::path::Path;

/// Knee rotation axis, fixed in the thigh frame.
pub const KNEE_AXIS: PureQuaternion = PureQuaternion { x: 0.0, y: 0.0, z: 1.0 };

/// Cylinder radius used for the default segment inertia model.
pub const DEFAULT_SEGMENT_RADIUS: f64 = 0.05;

/// Rejection-sampling budget before [`sample_configuration`] gives up.
const SAMPLING_ATTEMPTS: usize = 10_000;

/// One rigid segment. The segment extends along local `+x` from its joint;
/// `com` is the center of mass in that frame and `inertia` holds the
/// principal moments about the center of mass, aligned with the local axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub length: f64,
    pub mass: f64,
    pub com: PureQuaternion,
    pub inertia: PureQuaternion,
}

impl Segment {
    /// Segment modeled as a uniform solid cylinder of the given radius,
    /// center of mass at mid-length.
    pub fn uniform_rod(length: f64, mass: f64, radius: f64) -> Self {
        let axial = 0.5 * mass * radius * radius;
        let transverse = mass * (length * length / 12.0 + radius * radius / 4.0);
        Segment {
            length,
            mass,
            com: PureQuaternion::new(0.5 * length, 0.0, 0.0),
            inertia: PureQuaternion::new(axial, transverse, transverse),
        }
    }
}

/// Range-of-motion bounds in degrees, `[min, max]` per row.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RomTable {
    pub hip_flexion_extension: [f64; 2],
    pub hip_adduction_abduction: [f64; 2],
    pub hip_medial_lateral_rotation: [f64; 2],
    pub knee_flexion_extension: [f64; 2],
    pub ankle_plantar_dorsiflexion: [f64; 2],
    pub ankle_pronation_external_rotation: [f64; 2],
    pub ankle_inversion_eversion: [f64; 2],
}

impl Default for RomTable {
    fn default() -> Self {
        RomTable {
            hip_flexion_extension: [-30.0, 120.0],
            hip_adduction_abduction: [-20.0, 45.0],
            hip_medial_lateral_rotation: [-50.0, 40.0],
            knee_flexion_extension: [-150.0, 0.0],
            ankle_plantar_dorsiflexion: [-40.0, 20.0],
            ankle_pronation_external_rotation: [-35.0, 30.0],
            ankle_inversion_eversion: [-35.0, 20.0],
        }
    }
}

impl RomTable {
    fn rows(&self) -> [(&'static str, [f64; 2]); 7] {
        [
            ("hip_flexion_extension", self.hip_flexion_extension),
            ("hip_adduction_abduction", self.hip_adduction_abduction),
            ("hip_medial_lateral_rotation", self.hip_medial_lateral_rotation),
            ("knee_flexion_extension", self.knee_flexion_extension),
            ("ankle_plantar_dorsiflexion", self.ankle_plantar_dorsiflexion),
            ("ankle_pronation_external_rotation", self.ankle_pronation_external_rotation),
            ("ankle_inversion_eversion", self.ankle_inversion_eversion),
        ]
    }
}

/// Full model: geometry, inertia, motion bounds and gravity (base frame,
/// m/s^2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimbModel {
    pub pelvis_offset: f64,
    pub thigh: Segment,
    pub shank: Segment,
    pub foot: Segment,
    pub rom: RomTable,
    pub gravity: PureQuaternion,
}

impl Default for LimbModel {
    /// Anthropometric placeholder limb: 0.1 m pelvis offset, 0.44/0.43/0.10 m
    /// segments of 10.5/3.5/1.2 kg with uniform-cylinder inertias.
    fn default() -> Self {
        LimbModel {
            pelvis_offset: 0.1,
            thigh: Segment::uniform_rod(0.44, 10.5, DEFAULT_SEGMENT_RADIUS),
            shank: Segment::uniform_rod(0.43, 3.5, DEFAULT_SEGMENT_RADIUS),
            foot: Segment::uniform_rod(0.10, 1.2, DEFAULT_SEGMENT_RADIUS),
            rom: RomTable::default(),
            gravity: PureQuaternion::new(0.0, 0.0, -9.81),
        }
    }
}

impl LimbModel {
    pub fn segments(&self) -> [&Segment; 3] {
        [&self.thigh, &self.shank, &self.foot]
    }

    /// Hip position in the base frame.
    pub fn hip_position(&self) -> PureQuaternion {
        PureQuaternion::new(0.0, 0.0, self.pelvis_offset)
    }

    /// Sum of the moving segment lengths, the radius of the ball that bounds
    /// the end effector around the hip.
    pub fn reach(&self) -> f64 {
        self.thigh.length + self.shank.length + self.foot.length
    }

    pub fn validate(&self) -> Result<()> {
        validate_positive("segments.pelvis_offset", self.pelvis_offset)?;
        for (name, seg) in [
            ("segments.thigh", &self.thigh),
            ("segments.shank", &self.shank),
            ("segments.foot", &self.foot),
        ] {
            validate_positive(&format!("{name}.length"), seg.length)?;
            validate_positive(&format!("{name}.mass"), seg.mass)?;
            if !seg.com.is_finite() {
                return Err(Error::validation(format!("{name}.com"), "must be finite"));
            }
            let i = seg.inertia;
            for (axis, v) in [("x", i.x), ("y", i.y), ("z", i.z)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::validation(
                        format!("{name}.inertia.{axis}"),
                        "principal moments must be positive",
                    ));
                }
            }
            let slack = 1e-12 * (i.x + i.y + i.z);
            if i.x + i.y < i.z - slack || i.y + i.z < i.x - slack || i.z + i.x < i.y - slack {
                return Err(Error::validation(
                    format!("{name}.inertia"),
                    "principal moments must satisfy the triangle inequality",
                ));
            }
        }
        for (row, bounds) in self.rom.rows() {
            if !(bounds[0].is_finite() && bounds[1].is_finite() && bounds[0] < bounds[1]) {
                return Err(Error::validation(
                    format!("rom.{row}"),
                    "bounds must be finite with min < max",
                ));
            }
        }
        if !self.gravity.is_finite() {
            return Err(Error::validation("gravity.vector", "must be finite"));
        }
        Ok(())
    }
}

fn validate_positive(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::validation(field, format!("must be positive, got {v}")));
    }
    Ok(())
}

/// Joint configuration: three angles in radians plus the hip and ankle
/// rotation axes (unit vectors; the knee axis is fixed).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointState {
    pub theta: [f64; 3],
    pub hip_axis: PureQuaternion,
    pub ankle_axis: PureQuaternion,
}

impl JointState {
    pub fn new(theta: [f64; 3], hip_axis: PureQuaternion, ankle_axis: PureQuaternion) -> Self {
        JointState { theta, hip_axis, ankle_axis }
    }

    /// All angles zero, both free axes aligned with the knee axis.
    pub fn neutral() -> Self {
        JointState { theta: [0.0; 3], hip_axis: KNEE_AXIS, ankle_axis: KNEE_AXIS }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.theta.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::validation(format!("theta{}", i + 1), "must be finite"));
            }
        }
        self.hip_axis.check_unit_axis()?;
        self.ankle_axis.check_unit_axis()?;
        Ok(())
    }

    /// The same posture with each free axis flipped into the `z >= 0`
    /// hemisphere, negating its angle to compensate. `(n, theta)` and
    /// `(-n, -theta)` describe one rotation, so every configuration has two
    /// equivalent representations per free axis; this picks a single one.
    /// Forward kinematics and motion-range checks are unaffected.
    pub fn canonical_axes(&self) -> JointState {
        let mut s = *self;
        if s.hip_axis.z < 0.0 {
            s.theta[0] = -s.theta[0];
            s.hip_axis = -s.hip_axis;
        }
        if s.ankle_axis.z < 0.0 {
            s.theta[2] = -s.theta[2];
            s.ankle_axis = -s.ankle_axis;
        }
        s
    }
}

/// Joint angle rates in rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JointRates {
    pub theta_dot: [f64; 3],
}

/// Joint angle accelerations in rad/s^2.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JointAccels {
    pub theta_ddot: [f64; 3],
}

/// One range-of-motion row, used to name violations in reports and errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RomConstraint {
    HipFlexionExtension,
    HipAdductionAbduction,
    HipMedialLateralRotation,
    KneeFlexionExtension,
    AnklePlantarDorsiflexion,
    AnklePronationExternalRotation,
    AnkleInversionEversion,
}

impl fmt::Display for RomConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RomConstraint::HipFlexionExtension => "hip flexion/extension",
            RomConstraint::HipAdductionAbduction => "hip adduction/abduction",
            RomConstraint::HipMedialLateralRotation => "hip medial/lateral rotation",
            RomConstraint::KneeFlexionExtension => "knee flexion/extension",
            RomConstraint::AnklePlantarDorsiflexion => "ankle plantarflexion/dorsiflexion",
            RomConstraint::AnklePronationExternalRotation => "ankle pronation/external rotation",
            RomConstraint::AnkleInversionEversion => "ankle inversion/eversion",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RomViolation {
    pub constraint: RomConstraint,
    pub angle_deg: f64,
    pub bounds_deg: [f64; 2],
}

impl fmt::Display for RomViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {:.2} deg outside [{:.1}, {:.1}] deg",
            self.constraint, self.angle_deg, self.bounds_deg[0], self.bounds_deg[1]
        )
    }
}

/// Outcome of a range-of-motion check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RomCheck {
    pub violations: Vec<RomViolation>,
}

impl RomCheck {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Signed angle of `u` in the sagittal plane, measured from `+x` with the
/// anterior side (`-y`) positive. Degrees.
fn sagittal_angle_deg(u: PureQuaternion) -> f64 {
    (-u.y).atan2(u.x).to_degrees()
}

/// Signed elevation of `u` out of the plane normal to the given base-axis
/// component. Degrees.
fn elevation_deg(component: f64) -> f64 {
    component.clamp(-1.0, 1.0).asin().to_degrees()
}

/// Checks the seven range-of-motion rows for a joint state.
///
/// The knee row bounds `theta2` directly. The hip rows constrain the thigh
/// direction (hip to knee) and the ankle rows the foot long axis; because the
/// ankle parameterization folds the foot back along the shank at
/// `theta3 = 0`, the foot axis is measured tip-to-ankle so that the model's
/// zero posture sits at zero on every row. Rows against `x` are signed
/// sagittal-plane angles; rows against `z` and `y` are signed elevations
/// towards the lateral and posterior axes.
pub fn within_rom(model: &LimbModel, state: &JointState) -> Result<RomCheck> {
    let chain = kinematics::chain_points(model, state)?;
    let thigh_dir = (chain[1] - chain[0]).normalize()?;
    let foot_axis = (chain[2] - chain[3]).normalize()?;

    let rom = &model.rom;
    let rows = [
        (
            RomConstraint::HipFlexionExtension,
            sagittal_angle_deg(thigh_dir),
            rom.hip_flexion_extension,
        ),
        (
            RomConstraint::HipAdductionAbduction,
            elevation_deg(thigh_dir.z),
            rom.hip_adduction_abduction,
        ),
        (
            RomConstraint::HipMedialLateralRotation,
            elevation_deg(thigh_dir.y),
            rom.hip_medial_lateral_rotation,
        ),
        (
            RomConstraint::KneeFlexionExtension,
            state.theta[1].to_degrees(),
            rom.knee_flexion_extension,
        ),
        (
            RomConstraint::AnklePlantarDorsiflexion,
            sagittal_angle_deg(foot_axis),
            rom.ankle_plantar_dorsiflexion,
        ),
        (
            RomConstraint::AnklePronationExternalRotation,
            elevation_deg(foot_axis.z),
            rom.ankle_pronation_external_rotation,
        ),
        (
            RomConstraint::AnkleInversionEversion,
            elevation_deg(foot_axis.y),
            rom.ankle_inversion_eversion,
        ),
    ];

    let mut check = RomCheck::default();
    for (constraint, angle_deg, bounds_deg) in rows {
        if angle_deg < bounds_deg[0] || angle_deg > bounds_deg[1] {
            check.violations.push(RomViolation { constraint, angle_deg, bounds_deg });
        }
    }
    Ok(check)
}

/// Uniformly distributed unit vector.
pub fn sample_unit_axis<R: Rng + ?Sized>(rng: &mut R) -> PureQuaternion {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    PureQuaternion::new(r * phi.cos(), r * phi.sin(), z)
}

/// Draws a joint state uniformly from conservative per-angle boxes (full
/// circle for the hip and ankle angles, the knee row bounds for the knee)
/// with uniformly distributed axes, rejecting states that fail
/// [`within_rom`]. Deterministic for a fixed generator state.
pub fn sample_configuration<R: Rng + ?Sized>(
    model: &LimbModel,
    rng: &mut R,
) -> Result<JointState> {
    use std::f64::consts::PI;
    let knee = model.rom.knee_flexion_extension;
    for _ in 0..SAMPLING_ATTEMPTS {
        let state = JointState {
            theta: [
                rng.gen_range(-PI..PI),
                rng.gen_range(knee[0].to_radians()..knee[1].to_radians()),
                rng.gen_range(-PI..PI),
            ],
            hip_axis: sample_unit_axis(rng),
            ankle_axis: sample_unit_axis(rng),
        };
        if within_rom(model, &state)?.ok() {
            return Ok(state);
        }
    }
    Err(Error::SamplingExhausted { attempts: SAMPLING_ATTEMPTS })
}

/// Joint rates drawn uniformly from `[-max_rate, max_rate]` per joint.
pub fn sample_rates<R: Rng + ?Sized>(rng: &mut R, max_rate: f64) -> JointRates {
    JointRates {
        theta_dot: [
            rng.gen_range(-max_rate..max_rate),
            rng.gen_range(-max_rate..max_rate),
            rng.gen_range(-max_rate..max_rate),
        ],
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentConfig {
    length: f64,
    mass: f64,
    com: Option<[f64; 3]>,
    inertia: Option<[f64; 3]>,
    radius: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentsConfig {
    pelvis_offset: f64,
    thigh: SegmentConfig,
    shank: SegmentConfig,
    foot: SegmentConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GravityConfig {
    vector: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LimbConfigFile {
    segments: SegmentsConfig,
    rom: Option<RomTable>,
    gravity: Option<GravityConfig>,
}

impl SegmentConfig {
    fn build(&self) -> Segment {
        let radius = self.radius.unwrap_or(DEFAULT_SEGMENT_RADIUS);
        let mut seg = Segment::uniform_rod(self.length, self.mass, radius);
        if let Some(com) = self.com {
            seg.com = com.into();
        }
        if let Some(inertia) = self.inertia {
            seg.inertia = inertia.into();
        }
        seg
    }
}

/// Parses a limb configuration document (TOML: `[segments]`, optional
/// `[rom]` and `[gravity]` sections; lengths in meters, masses in kilograms,
/// angles in degrees). Missing sections fall back to the defaults.
pub fn parse_limb_config(text: &str) -> Result<LimbModel> {
    let file: LimbConfigFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("limb config: {e}")))?;
    let defaults = LimbModel::default();
    let model = LimbModel {
        pelvis_offset: file.segments.pelvis_offset,
        thigh: file.segments.thigh.build(),
        shank: file.segments.shank.build(),
        foot: file.segments.foot.build(),
        rom: file.rom.unwrap_or_default(),
        gravity: file.gravity.map(|g| g.vector.into()).unwrap_or(defaults.gravity),
    };
    model.validate()?;
    Ok(model)
}

/// Reads and parses a limb configuration file.
pub fn load_limb_config(path: impl AsRef<Path>) -> Result<LimbModel> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_limb_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rom_rows_match_published_bounds() {
        let rom = RomTable::default();
        assert_eq!(rom.hip_flexion_extension, [-30.0, 120.0]);
        assert_eq!(rom.hip_adduction_abduction, [-20.0, 45.0]);
        assert_eq!(rom.hip_medial_lateral_rotation, [-50.0, 40.0]);
        assert_eq!(rom.knee_flexion_extension, [-150.0, 0.0]);
        assert_eq!(rom.ankle_plantar_dorsiflexion, [-40.0, 20.0]);
        assert_eq!(rom.ankle_pronation_external_rotation, [-35.0, 30.0]);
        assert_eq!(rom.ankle_inversion_eversion, [-35.0, 20.0]);
    }

    #[test]
    fn near_neutral_posture_passes_every_row() {
        let model = LimbModel::default();
        let state = JointState::new([0.0, (-10.0_f64).to_radians(), 0.0], KNEE_AXIS, KNEE_AXIS);
        let check = within_rom(&model, &state).unwrap();
        assert!(check.ok(), "violations: {:?}", check.violations);
    }

    #[test]
    fn hyperflexed_knee_fails_the_knee_row() {
        let model = LimbModel::default();
        let state = JointState::new([0.0, (-160.0_f64).to_radians(), 0.0], KNEE_AXIS, KNEE_AXIS);
        let check = within_rom(&model, &state).unwrap();
        assert!(!check.ok());
        assert!(check
            .violations
            .iter()
            .any(|v| v.constraint == RomConstraint::KneeFlexionExtension));
    }

    #[test]
    fn knee_row_passes_monotonically_towards_zero() {
        // If theta2 passes, every shallower flexion with the same remaining
        // state passes the knee row too.
        let model = LimbModel::default();
        let mut state = JointState::new([0.2, (-120.0_f64).to_radians(), 0.4],
            PureQuaternion::new(0.0, 0.6, 0.8), KNEE_AXIS);
        let knee_ok = |s: &JointState| {
            within_rom(&model, s)
                .unwrap()
                .violations
                .iter()
                .all(|v| v.constraint != RomConstraint::KneeFlexionExtension)
        };
        assert!(knee_ok(&state));
        let start = state.theta[1];
        for k in 0..=20 {
            state.theta[1] = start * (1.0 - k as f64 / 20.0);
            assert!(knee_ok(&state), "theta2 = {}", state.theta[1]);
        }
    }

    #[test]
    fn sampling_respects_the_knee_box_and_is_seeded() {
        use rand::SeedableRng;
        let model = LimbModel::default();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let knee = model.rom.knee_flexion_extension;
        for _ in 0..200 {
            let s = sample_configuration(&model, &mut rng).unwrap();
            assert!(within_rom(&model, &s).unwrap().ok());
            let deg = s.theta[1].to_degrees();
            assert!(deg >= knee[0] && deg <= knee[1]);
        }
        let mut a = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let mut b = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        assert_eq!(
            sample_configuration(&model, &mut a).unwrap(),
            sample_configuration(&model, &mut b).unwrap()
        );
    }

    #[test]
    fn config_parsing_round_trips_the_default_model() {
        let text = r#"
            [segments]
            pelvis_offset = 0.1

            [segments.thigh]
            length = 0.44
            mass = 10.5

            [segments.shank]
            length = 0.43
            mass = 3.5

            [segments.foot]
            length = 0.10
            mass = 1.2
        "#;
        let model = parse_limb_config(text).unwrap();
        assert_eq!(model, LimbModel::default());
    }

    #[test]
    fn config_validation_names_the_offending_field() {
        let text = r#"
            [segments]
            pelvis_offset = 0.1

            [segments.thigh]
            length = -0.44
            mass = 10.5

            [segments.shank]
            length = 0.43
            mass = 3.5

            [segments.foot]
            length = 0.10
            mass = 1.2
        "#;
        let err = parse_limb_config(text).unwrap_err();
        assert!(err.to_string().contains("segments.thigh.length"), "{err}");
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let text = r#"
            [segments]
            pelvis_offset = 0.1
            typo_key = 1.0

            [segments.thigh]
            length = 0.44
            mass = 10.5

            [segments.shank]
            length = 0.43
            mass = 3.5

            [segments.foot]
            length = 0.10
            mass = 1.2
        "#;
        assert!(matches!(parse_limb_config(text), Err(Error::Parse(_))));
    }

    #[test]
    fn inertia_triangle_violation_is_rejected() {
        let mut model = LimbModel::default();
        model.thigh.inertia = PureQuaternion::new(1.0, 0.1, 2.0);
        let err = model.validate().unwrap_err();
        assert!(err.to_string().contains("triangle"), "{err}");
    }

    #[test]
    fn canonical_axes_preserves_the_posture() {
        use rand::SeedableRng;
        let model = LimbModel::default();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(31);
        for _ in 0..50 {
            let state = sample_configuration(&model, &mut rng).unwrap();
            let canon = state.canonical_axes();
            assert!(canon.hip_axis.z >= 0.0);
            assert!(canon.ankle_axis.z >= 0.0);
            assert_eq!(canon.canonical_axes(), canon);
            let before = crate::kinematics::chain_points(&model, &state).unwrap();
            let after = crate::kinematics::chain_points(&model, &canon).unwrap();
            for (b, a) in before.iter().zip(&after) {
                assert!((*b - *a).norm() < 1e-14);
            }
            assert_eq!(
                within_rom(&model, &canon).unwrap().ok(),
                within_rom(&model, &state).unwrap().ok()
            );
        }
    }
}
