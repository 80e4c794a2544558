#![allow(clippy::needless_range_loop)]

//! Property tests for pose composition and the goal-vector solve, verified
//! against an independent 4x4 homogeneous-matrix oracle.

use proptest::prelude::*;
use softgrasp_core::geometry::{
    compose, offset_pose, score_trial, solve_goal, PlanarOffset, Pose, TrialEvent,
};
use softgrasp_core::rng::SplitMix64;

type Mat4 = [[f64; 4]; 4];

fn mat4_identity() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mat4_from_pose(p: &Pose) -> Mat4 {
    let mut m = mat4_identity();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = p.rotation[i][j];
        }
        m[i][3] = p.translation[i];
    }
    m
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

fn mat4_translation_offset(x: f64, y: f64, z: f64) -> Mat4 {
    let mut m = mat4_identity();
    m[0][3] = x;
    m[1][3] = y;
    m[2][3] = z;
    m
}

/// Rotation built directly from raw 3x3 products so pose construction does
/// not depend on the library's own compose.
fn raw_rotation(ax: f64, ay: f64, az: f64) -> [[f64; 3]; 3] {
    let rx = [
        [1.0, 0.0, 0.0],
        [0.0, ax.cos(), -ax.sin()],
        [0.0, ax.sin(), ax.cos()],
    ];
    let ry = [
        [ay.cos(), 0.0, ay.sin()],
        [0.0, 1.0, 0.0],
        [-ay.sin(), 0.0, ay.cos()],
    ];
    let rz = [
        [az.cos(), -az.sin(), 0.0],
        [az.sin(), az.cos(), 0.0],
        [0.0, 0.0, 1.0],
    ];
    let mul = |a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]| {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, bk) in b.iter().enumerate() {
                    out[i][j] += a[i][k] * bk[j];
                }
            }
        }
        out
    };
    mul(&mul(&rz, &ry), &rx)
}

fn seeded_pose(rng: &mut SplitMix64) -> Pose {
    let ax = rng.next_signed() * std::f64::consts::PI;
    let ay = rng.next_signed() * std::f64::consts::PI;
    let az = rng.next_signed() * std::f64::consts::PI;
    let t = [
        rng.next_signed() * 500.0,
        rng.next_signed() * 500.0,
        rng.next_signed() * 500.0,
    ];
    Pose::new(raw_rotation(ax, ay, az), t).expect("seeded rotations are proper")
}

#[test]
fn compose_matches_matrix_oracle() {
    let mut rng = SplitMix64::new(0xfeed);
    for _ in 0..200 {
        let a = seeded_pose(&mut rng);
        let b = seeded_pose(&mut rng);
        let c = compose(&a, &b).unwrap();
        let m = mat4_mul(&mat4_from_pose(&a), &mat4_from_pose(&b));
        for i in 0..3 {
            for j in 0..3 {
                assert!((c.rotation[i][j] - m[i][j]).abs() < 1e-12);
            }
            assert!((c.translation[i] - m[i][3]).abs() < 1e-12);
        }
    }
}

#[test]
fn solve_goal_matches_matrix_oracle_over_random_cases() {
    let mut rng = SplitMix64::new(0xbead);
    for _ in 0..100 {
        let t_oa = seeded_pose(&mut rng);
        let t_oc = seeded_pose(&mut rng);
        let wrist = PlanarOffset::new(rng.next_signed() * 80.0, rng.next_signed() * 80.0);
        let glove = PlanarOffset::new(0.0, rng.next_signed() * 80.0);

        let bd = solve_goal(&t_oa, &t_oc, &wrist, &glove).unwrap();

        let t_ab = mat4_mul(
            &mat4_from_pose(&t_oa),
            &mat4_translation_offset(0.0, wrist.dy_mm, wrist.dz_mm),
        );
        let t_cd = mat4_mul(
            &mat4_from_pose(&t_oc),
            &mat4_translation_offset(0.0, 0.0, glove.dz_mm),
        );
        for i in 0..3 {
            let expected = t_cd[i][3] - t_ab[i][3];
            assert!(
                (bd[i] - expected).abs() < 1e-9,
                "component {i}: {} vs {expected}",
                bd[i]
            );
        }
    }
}

#[test]
fn coincident_markers_give_exact_zero() {
    let mut rng = SplitMix64::new(7);
    let p = seeded_pose(&mut rng);
    let bd = solve_goal(&p, &p, &PlanarOffset::default(), &PlanarOffset::default()).unwrap();
    assert_eq!(bd, [0.0, 0.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_is_associative(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let a = seeded_pose(&mut rng);
        let b = seeded_pose(&mut rng);
        let c = seeded_pose(&mut rng);
        let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((left.rotation[i][j] - right.rotation[i][j]).abs() < 1e-9);
            }
            prop_assert!((left.translation[i] - right.translation[i]).abs() < 1e-9);
        }
    }

    /// Re-expressing both marker poses in a different camera frame rotates
    /// the goal vector by that frame change and nothing else.
    #[test]
    fn goal_vector_transforms_with_the_camera_frame(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let t_oa = seeded_pose(&mut rng);
        let t_oc = seeded_pose(&mut rng);
        let g = seeded_pose(&mut rng);
        let wrist = PlanarOffset::new(rng.next_signed() * 50.0, rng.next_signed() * 50.0);
        let glove = PlanarOffset::new(0.0, rng.next_signed() * 50.0);

        let bd = solve_goal(&t_oa, &t_oc, &wrist, &glove).unwrap();
        let bd_moved = solve_goal(
            &compose(&g, &t_oa).unwrap(),
            &compose(&g, &t_oc).unwrap(),
            &wrist,
            &glove,
        )
        .unwrap();
        let rotated = g.rotate(bd);
        for i in 0..3 {
            prop_assert!((bd_moved[i] - rotated[i]).abs() < 1e-9);
        }
    }

    /// Every event log with a terminal event maps to exactly one score.
    #[test]
    fn score_mapping_is_total_and_exclusive(
        settled in any::<bool>(),
        slipped in any::<bool>(),
        terminal in 0u8..3,
    ) {
        let mut events = Vec::new();
        if settled {
            events.push((1.0, TrialEvent::Settled));
        }
        if slipped {
            events.push((2.0, TrialEvent::Slip));
        }
        events.push((
            3.0,
            match terminal {
                0 => TrialEvent::ReleasedInBin,
                1 => TrialEvent::ObjectLost,
                _ => TrialEvent::Timeout,
            },
        ));
        let score = score_trial(&events).unwrap();
        let expected = match (terminal, settled, slipped) {
            (0, true, false) => 1.0,
            (0, true, true) => 0.5,
            _ => 0.0,
        };
        prop_assert_eq!(score.value, expected);
    }
}

#[test]
fn offset_pose_equals_matrix_route() {
    let mut rng = SplitMix64::new(0x0ff5);
    for _ in 0..50 {
        let base = seeded_pose(&mut rng);
        let offset = PlanarOffset::new(rng.next_signed() * 30.0, rng.next_signed() * 30.0);
        let p = offset_pose(&base, &offset).unwrap();
        let m = mat4_mul(
            &mat4_from_pose(&base),
            &mat4_translation_offset(0.0, offset.dy_mm, offset.dz_mm),
        );
        for i in 0..3 {
            assert!((p.translation[i] - m[i][3]).abs() < 1e-12);
        }
    }
}
