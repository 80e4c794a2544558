//! Marker-relative handover geometry: rigid-body pose composition, planar
//! marker offsets, the camera-relative goal vector, and trial scoring.
//!
//! The wrist marker pose `T_OA` and glove marker pose `T_OC` are inputs
//! (camera-frame fixtures or simulator output); the grasp point offsets are
//! planar in each marker's own frame. The goal motion is the difference of
//! the two offset translations.

use alloc::vec::Vec;
use core::fmt;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rigid-body pose: rotation matrix plus translation in millimetres,
/// equivalent to a 4x4 homogeneous transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// Row-major 3x3 rotation.
    pub rotation: [[f64; 3]; 3],
    /// Translation in millimetres.
    pub translation: [f64; 3],
}

/// Planar grasp-point offset expressed in a marker's own frame. The x
/// component is zero by construction: the wrist offset is (0, dy, dz) and
/// the glove offset (0, 0, dz).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarOffset {
    pub dy_mm: f64,
    pub dz_mm: f64,
}

impl PlanarOffset {
    pub fn new(dy_mm: f64, dz_mm: f64) -> Self {
        Self { dy_mm, dz_mm }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryError {
    /// RᵀR deviates from identity beyond tolerance.
    NotOrthonormal,
    /// det(R) is not +1: a reflection or degenerate matrix.
    NotProperRotation,
    NonFiniteValue,
    /// A trial event log without a terminal event cannot be scored.
    IncompleteTrialLog,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::NotOrthonormal => write!(f, "rotation matrix is not orthonormal"),
            GeometryError::NotProperRotation => write!(f, "rotation matrix determinant is not +1"),
            GeometryError::NonFiniteValue => write!(f, "pose contains a non-finite value"),
            GeometryError::IncompleteTrialLog => {
                write!(f, "trial event log has no terminal event")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

impl Pose {
    /// Validates the rotation invariants before accepting the pose.
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self, GeometryError> {
        let pose = Self { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Pure translation.
    pub fn from_translation(t: [f64; 3]) -> Self {
        Self { rotation: Pose::identity().rotation, translation: t }
    }

    /// Rotation about the x axis by `angle` radians.
    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
            translation: [0.0; 3],
        }
    }

    /// Rotation about the y axis by `angle` radians.
    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Self {
            rotation: [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
            translation: [0.0; 3],
        }
    }

    /// Rotation about the z axis by `angle` radians.
    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Self {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for row in &self.rotation {
            for &v in row {
                if !v.is_finite() {
                    return Err(GeometryError::NonFiniteValue);
                }
            }
        }
        for &v in &self.translation {
            if !v.is_finite() {
                return Err(GeometryError::NonFiniteValue);
            }
        }
        let r = &self.rotation;
        // RᵀR == I within tolerance.
        for i in 0..3 {
            for j in 0..3 {
                let dot = r[0][i] * r[0][j] + r[1][i] * r[1][j] + r[2][i] * r[2][j];
                let expected = if i == j { 1.0 } else { 0.0 };
                if libm::fabs(dot - expected) > ORTHONORMAL_TOL {
                    return Err(GeometryError::NotOrthonormal);
                }
            }
        }
        if libm::fabs(self.determinant() - 1.0) > ORTHONORMAL_TOL {
            return Err(GeometryError::NotProperRotation);
        }
        Ok(())
    }

    fn determinant(&self) -> f64 {
        let r = &self.rotation;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    /// Applies the rotation to a vector.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [
            r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
            r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
            r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
        ]
    }

    /// Inverse pose: (Rᵀ, -Rᵀt).
    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let t = self.translation;
        let rt_t = [
            rt[0][0] * t[0] + rt[0][1] * t[1] + rt[0][2] * t[2],
            rt[1][0] * t[0] + rt[1][1] * t[1] + rt[1][2] * t[2],
            rt[2][0] * t[0] + rt[2][1] * t[1] + rt[2][2] * t[2],
        ];
        Self { rotation: rt, translation: [-rt_t[0], -rt_t[1], -rt_t[2]] }
    }
}

/// Homogeneous product `a · b`: validates both operands, returns a pose
/// satisfying the same invariants.
pub fn compose(a: &Pose, b: &Pose) -> Result<Pose, GeometryError> {
    a.validate()?;
    b.validate()?;
    let mut rotation = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rotation[i][j] = a.rotation[i][0] * b.rotation[0][j]
                + a.rotation[i][1] * b.rotation[1][j]
                + a.rotation[i][2] * b.rotation[2][j];
        }
    }
    let rb = a.rotate(b.translation);
    Ok(Pose {
        rotation,
        translation: [
            a.translation[0] + rb[0],
            a.translation[1] + rb[1],
            a.translation[2] + rb[2],
        ],
    })
}

/// Composes `base` with a pure translation (0, dy, dz) expressed in the
/// base's own frame: the planar marker-to-grasp-point constraint.
pub fn offset_pose(base: &Pose, offset: &PlanarOffset) -> Result<Pose, GeometryError> {
    compose(base, &Pose::from_translation([0.0, offset.dy_mm, offset.dz_mm]))
}

/// Solves the camera-relative goal vector BD.
///
/// The wrist grasp point B is the wrist marker pose offset by
/// `(0, dy, dz)`; the glove grasp point D is the glove marker pose offset
/// by `(0, 0, dz)`. BD is the difference of the two translational
/// components, CD - AB.
pub fn solve_goal(
    t_oa: &Pose,
    t_oc: &Pose,
    wrist_offset: &PlanarOffset,
    glove_offset: &PlanarOffset,
) -> Result<[f64; 3], GeometryError> {
    let t_ab = offset_pose(t_oa, wrist_offset)?;
    let t_cd = offset_pose(t_oc, &PlanarOffset::new(0.0, glove_offset.dz_mm))?;
    let ab = t_ab.translation;
    let cd = t_cd.translation;
    Ok([cd[0] - ab[0], cd[1] - ab[1], cd[2] - ab[2]])
}

/// Outcome classes of one handover trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    Success,
    Partial,
    Failure,
}

/// Points awarded for a handover trial: 1, 0.5 or 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialScore {
    pub value: f64,
    pub outcome: TrialOutcome,
}

impl TrialScore {
    fn of(outcome: TrialOutcome) -> Self {
        let value = match outcome {
            TrialOutcome::Success => 1.0,
            TrialOutcome::Partial => 0.5,
            TrialOutcome::Failure => 0.0,
        };
        Self { value, outcome }
    }
}

/// Controlled vocabulary of trial events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialEvent {
    /// The grasp controller reached and held the settling band.
    Settled,
    /// The object slipped from the grasp during the carry.
    Slip,
    /// The object ended up in the bin (deliberate release or lucky fall).
    ReleasedInBin,
    /// The object left the grasp and did not reach the bin.
    ObjectLost,
    /// The trial ran out of time before completing.
    Timeout,
}

impl TrialEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialEvent::Settled => "settled",
            TrialEvent::Slip => "slip",
            TrialEvent::ReleasedInBin => "released_in_bin",
            TrialEvent::ObjectLost => "object_lost",
            TrialEvent::Timeout => "timeout",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "settled" => TrialEvent::Settled,
            "slip" => TrialEvent::Slip,
            "released_in_bin" => TrialEvent::ReleasedInBin,
            "object_lost" => TrialEvent::ObjectLost,
            "timeout" => TrialEvent::Timeout,
            _ => return None,
        })
    }

    /// Terminal events end a trial.
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            TrialEvent::ReleasedInBin | TrialEvent::ObjectLost | TrialEvent::Timeout
        )
    }
}

impl fmt::Display for TrialEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps a timestamped trial event log onto a score.
///
/// 1 point for a clean deposit, 0.5 when the object slipped but still ended
/// in the bin, 0 when the object was lost or the controller never
/// stabilised. The log must contain a terminal event.
pub fn score_trial(events: &[(f64, TrialEvent)]) -> Result<TrialScore, GeometryError> {
    let terminal = events
        .iter()
        .find(|(_, e)| e.is_terminal())
        .ok_or(GeometryError::IncompleteTrialLog)?
        .1;
    let settled = events.iter().any(|(_, e)| *e == TrialEvent::Settled);
    let slipped = events.iter().any(|(_, e)| *e == TrialEvent::Slip);
    let outcome = match terminal {
        TrialEvent::ReleasedInBin if settled && !slipped => TrialOutcome::Success,
        TrialEvent::ReleasedInBin if settled && slipped => TrialOutcome::Partial,
        // Reaching the bin without ever stabilising still fails.
        TrialEvent::ReleasedInBin => TrialOutcome::Failure,
        TrialEvent::ObjectLost | TrialEvent::Timeout => TrialOutcome::Failure,
        // Terminal events are only the three above.
        TrialEvent::Settled | TrialEvent::Slip => unreachable!(),
    };
    Ok(TrialScore::of(outcome))
}

/// Parses one fixture line of 12 numbers: row-major rotation then
/// translation.
pub fn pose_from_fixture_values(values: &[f64]) -> Result<Pose, GeometryError> {
    if values.len() != 12 {
        return Err(GeometryError::NonFiniteValue);
    }
    Pose::new(
        [
            [values[0], values[1], values[2]],
            [values[3], values[4], values[5]],
            [values[6], values[7], values[8]],
        ],
        [values[9], values[10], values[11]],
    )
}

/// Serialises a pose as the 12-number fixture layout.
pub fn pose_to_fixture_values(pose: &Pose) -> Vec<f64> {
    let mut out = Vec::with_capacity(12);
    for row in &pose.rotation {
        out.extend_from_slice(row);
    }
    out.extend_from_slice(&pose.translation);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const PI: f64 = core::f64::consts::PI;

    #[test]
    fn compose_with_identity_is_identity_op() {
        let p = Pose::new(Pose::rot_z(0.3).rotation, [1.0, -2.0, 3.0]).unwrap();
        let c = compose(&Pose::identity(), &p).unwrap();
        assert_eq!(c, p);
        let c = compose(&p, &Pose::identity()).unwrap();
        assert_eq!(c, p);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let p = Pose::new(Pose::rot_y(1.1).rotation, [5.0, 6.0, 7.0]).unwrap();
        let c = compose(&p, &p.inverse()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((c.rotation[i][j] - expected).abs() < 1e-9);
            }
            assert!(c.translation[i].abs() < 1e-9);
        }
    }

    #[test]
    fn compose_rejects_invalid_rotation() {
        let bad = Pose {
            rotation: [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        };
        assert_eq!(compose(&bad, &Pose::identity()).unwrap_err(), GeometryError::NotOrthonormal);
        let reflection = Pose {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]],
            translation: [0.0; 3],
        };
        assert_eq!(
            compose(&reflection, &Pose::identity()).unwrap_err(),
            GeometryError::NotProperRotation
        );
    }

    #[test]
    fn offset_pose_zero_offset_is_noop() {
        let base = Pose::new(Pose::rot_x(0.7).rotation, [1.0, 2.0, 3.0]).unwrap();
        let p = offset_pose(&base, &PlanarOffset::default()).unwrap();
        assert_eq!(p, base);
    }

    #[test]
    fn offset_pose_identity_base_translates_in_place() {
        let p = offset_pose(&Pose::identity(), &PlanarOffset::new(0.0, 4.5)).unwrap();
        assert_eq!(p.translation, [0.0, 0.0, 4.5]);
    }

    #[test]
    fn offset_pose_rotates_offset_into_world() {
        // 90 degrees about x maps +y to +z and +z to -y.
        let base = Pose::rot_x(PI / 2.0);
        let p = offset_pose(&base, &PlanarOffset::new(2.0, 3.0)).unwrap();
        assert!((p.translation[0] - 0.0).abs() < 1e-12);
        assert!((p.translation[1] - (-3.0)).abs() < 1e-12);
        assert!((p.translation[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solve_goal_coincident_markers_zero_offsets() {
        let p = Pose::new(Pose::rot_z(0.5).rotation, [10.0, 20.0, 30.0]).unwrap();
        let bd = solve_goal(&p, &p, &PlanarOffset::default(), &PlanarOffset::default()).unwrap();
        assert_eq!(bd, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn solve_goal_pure_translation() {
        let a = Pose::from_translation([0.0, 0.0, 0.0]);
        let c = Pose::from_translation([100.0, 0.0, 0.0]);
        let bd = solve_goal(&a, &c, &PlanarOffset::default(), &PlanarOffset::default()).unwrap();
        assert_eq!(bd, [100.0, 0.0, 0.0]);
    }

    #[test]
    fn glove_offset_dy_is_ignored() {
        // The glove constraint is (0, 0, dz) regardless of the dy field.
        let a = Pose::identity();
        let c = Pose::from_translation([50.0, 0.0, 0.0]);
        let bd = solve_goal(&a, &c, &PlanarOffset::default(), &PlanarOffset::new(99.0, 10.0)).unwrap();
        assert_eq!(bd, [50.0, 0.0, 10.0]);
    }

    #[test]
    fn score_trial_outcome_mapping() {
        let full = vec![
            (1.0, TrialEvent::Settled),
            (4.0, TrialEvent::ReleasedInBin),
        ];
        assert_eq!(score_trial(&full).unwrap().value, 1.0);

        let partial = vec![
            (1.0, TrialEvent::Settled),
            (3.0, TrialEvent::Slip),
            (3.2, TrialEvent::ReleasedInBin),
        ];
        let s = score_trial(&partial).unwrap();
        assert_eq!(s.value, 0.5);
        assert_eq!(s.outcome, TrialOutcome::Partial);

        let never_settled = vec![(6.0, TrialEvent::Timeout)];
        assert_eq!(score_trial(&never_settled).unwrap().value, 0.0);

        let dropped = vec![(1.0, TrialEvent::Settled), (2.5, TrialEvent::ObjectLost)];
        assert_eq!(score_trial(&dropped).unwrap().value, 0.0);
    }

    #[test]
    fn score_trial_requires_terminal_event() {
        let incomplete = vec![(1.0, TrialEvent::Settled)];
        assert_eq!(score_trial(&incomplete).unwrap_err(), GeometryError::IncompleteTrialLog);
    }

    #[test]
    fn fixture_roundtrip() {
        let p = Pose::new(Pose::rot_y(0.25).rotation, [1.5, -2.5, 3.5]).unwrap();
        let values = pose_to_fixture_values(&p);
        let q = pose_from_fixture_values(&values).unwrap();
        assert_eq!(p, q);
    }
}
