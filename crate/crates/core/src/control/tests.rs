use approx::assert_abs_diff_eq;
use nalgebra::{Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::geometry::{Pose, ShapeModel, Vec3};
use crate::sensing::{extract_tactile_feature, render_height_map, GelPad};

fn slab() -> ShapeModel {
    // Top face at z = 0.
    ShapeModel::cuboid(Vec3::new(0.5, 0.5, 0.5), Vec3::new(0.0, 0.0, -0.5)).unwrap()
}

/// Leader pressing straight down at `depth` below z = 0, tilted by `tilt` about `axis`
/// (an axis of the fingertip frame's y/z plane).
fn plane_leader(depth: f64, tilt: f64, axis_angle: f64) -> Pose {
    let down = UnitQuaternion::rotation_between(&Vec3::x(), &(-Vec3::z())).unwrap();
    let axis = Vector3::new(0.0, axis_angle.cos(), axis_angle.sin());
    let tilt = UnitQuaternion::from_scaled_axis(axis * tilt);
    Pose::from_parts(Translation3::new(0.0, 0.0, -depth), down * tilt)
}

fn centroid_error(gains: &ServoGains, hand: &HandState, shape: &ShapeModel, gel: &GelPad) -> Option<f64> {
    let f = extract_tactile_feature(&render_height_map(shape, &hand.leader_pose(), gel));
    gains.delta(&f).map(|d| d.xy().norm())
}

#[test]
fn zero_error_gives_zero_twist() {
    let gains = ServoGains::for_gel(&GelPad::default());
    let t = palm_twist(&Vector3::zeros(), None, &TactileJacobian::default(), &gains).unwrap();
    assert_eq!(t, Twist::default());
}

#[test]
fn area_error_moves_only_along_normal() {
    let gains = ServoGains::for_gel(&GelPad::default());
    let t = palm_twist(&Vector3::new(0.0, 0.0, 50.0), None, &TactileJacobian::default(), &gains).unwrap();
    assert_eq!((t.theta_y, t.theta_z), (0.0, 0.0));
    assert!(t.d_x > 0.0);
}

#[test]
fn pseudo_inverse_example() {
    let mut gains = ServoGains::for_gel(&GelPad::default());
    gains.kp = [1.0; 3];
    gains.kd = [0.0; 3];
    gains.max_rotation_step = 1.0;
    let jac = TactileJacobian {
        centroid_x_per_theta_z: 50.0,
        ..TactileJacobian::default()
    };
    let t = palm_twist(&Vector3::new(5.0, 0.0, 0.0), None, &jac, &gains).unwrap();
    assert_abs_diff_eq!(t.theta_z, 0.1, epsilon = 1e-15);
    assert_eq!((t.theta_y, t.d_x), (0.0, 0.0));
    assert_eq!(jac.pseudo_inverse() * jac.matrix(), nalgebra::Matrix3::identity());
}

#[test]
fn derivative_term_uses_previous_error() {
    let gains = ServoGains::for_gel(&GelPad::default());
    let jac = TactileJacobian::default();
    let d = Vector3::new(4.0, 0.0, 0.0);
    let a = palm_twist(&d, None, &jac, &gains).unwrap();
    let b = palm_twist(&d, Some(&Vector3::new(6.0, 0.0, 0.0)), &jac, &gains).unwrap();
    assert_abs_diff_eq!(a.theta_z, 0.5 * 4.0 / 200.0, epsilon = 1e-15);
    assert_abs_diff_eq!(b.theta_z, (0.5 * 4.0 - 0.1 * 2.0) / 200.0, epsilon = 1e-15);
}

#[test]
fn zero_jacobian_rejected() {
    let gains = ServoGains::for_gel(&GelPad::default());
    let jac = TactileJacobian {
        area_per_depth: 0.0,
        ..TactileJacobian::default()
    };
    let err = palm_twist(&Vector3::zeros(), None, &jac, &gains).unwrap_err();
    assert!(matches!(err, Error::InvalidConfiguration(_)));
}

#[test]
fn invalid_gains_rejected() {
    let gel = GelPad::default();
    let mut g = ServoGains::for_gel(&gel);
    g.validate(&gel).unwrap();
    g.reference[2] = 768.0;
    assert!(g.validate(&gel).is_err());
    let mut g = ServoGains::for_gel(&gel);
    g.kp[1] = -0.1;
    assert!(g.validate(&gel).is_err());
}

#[test]
fn tilted_plane_converges() {
    let gel = GelPad::default();
    let gains = ServoGains::for_gel(&gel);
    let jac = TactileJacobian::default();
    let shape = slab();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut tried = 0;
    while tried < 20 {
        let leader = plane_leader(
            rng.random_range(0.0003..0.0008),
            10f64.to_radians(),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let hand = HandState::from_leader(leader, HandTemplate::default());
        // Only starts with a sizeable centroid offset count.
        if centroid_error(&gains, &hand, &shape, &gel).is_none_or(|e0| e0 < 5.0) {
            continue;
        }
        tried += 1;
        let out = servo_regulate(&shape, &hand, &gains, &jac, &gel, 50).unwrap();
        let best = out
            .trace
            .iter()
            .filter_map(|s| s.delta.map(|d| d.xy().norm()))
            .chain(gains.delta(&out.feature).map(|d| d.xy().norm()))
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1.0, "best centroid error {best}");
    }
}

#[test]
fn plane_servo_contracts() {
    let gel = GelPad::default();
    let gains = ServoGains::for_gel(&gel);
    let shape = slab();
    let hand = HandState::from_leader(plane_leader(0.0005, 10f64.to_radians(), 0.3), HandTemplate::default());
    let out = servo_regulate(&shape, &hand, &gains, &TactileJacobian::default(), &gel, 50).unwrap();
    let errors: Vec<Option<f64>> = out.trace.iter().map(|s| s.delta.map(|d| d.xy().norm())).collect();
    for k in 0..errors.len().saturating_sub(10) {
        if let (Some(a), Some(b)) = (errors[k], errors[k + 10]) {
            if a > 1.0 {
                assert!(b < a, "no contraction at {k}: {a} -> {b}");
            }
        }
    }
}

/// Depth at which a sphere of radius `r` covers about `c` pixels above threshold.
fn regulated_sphere_depth(r: f64, c: f64, gel: &GelPad) -> f64 {
    let (px, py) = gel.pitch();
    let a2 = c * px * py / std::f64::consts::PI;
    crate::sensing::CONTACT_THRESHOLD + a2 / (2.0 * r)
}

#[test]
fn regulated_start_needs_no_iterations() {
    let gel = GelPad::default();
    let gains = ServoGains::for_gel(&gel);
    let r = 0.05;
    let sphere = ShapeModel::sphere(r, Vec3::zeros()).unwrap();
    let d = regulated_sphere_depth(r, gains.reference[2], &gel);
    let leader = plane_leader(d - r, 0.0, 0.0);
    let hand = HandState::from_leader(leader, HandTemplate::default());
    let out = servo_regulate(&sphere, &hand, &gains, &TactileJacobian::default(), &gel, 50).unwrap();
    assert!(out.converged);
    assert!(out.trace.is_empty());
    assert_eq!(out.hand, hand);
}

#[test]
fn sphere_servo_converges_from_offset() {
    let gel = GelPad::default();
    let gains = ServoGains::for_gel(&gel);
    let r = 0.05;
    let sphere = ShapeModel::sphere(r, Vec3::zeros()).unwrap();
    // Contact 3 mm off-center and pressed too deep.
    let leader = Pose::from_parts(
        Translation3::new(0.003, 0.0, r - 0.0006),
        UnitQuaternion::rotation_between(&Vec3::x(), &(-Vec3::z())).unwrap(),
    );
    let hand = HandState::from_leader(leader, HandTemplate::default());
    let out = servo_regulate(&sphere, &hand, &gains, &TactileJacobian::default(), &gel, 100).unwrap();
    assert!(out.converged, "trace len {}", out.trace.len());
    // Gel now faces the sphere center.
    let n = out.hand.leader_normal();
    let p = out.hand.leader_pose().translation.vector;
    assert!((n.into_inner() + p.normalize()).norm() < 0.05);
}

#[test]
fn retracted_leader_loses_contact() {
    let gel = GelPad::default();
    let gains = ServoGains::for_gel(&gel);
    let hand = HandState::from_leader(plane_leader(-0.005, 0.0, 0.0), HandTemplate::default());
    let err = servo_regulate(&slab(), &hand, &gains, &TactileJacobian::default(), &gel, 50).unwrap_err();
    assert!(matches!(err, Error::ContactLost { iterations: 5 }));
}

#[test]
fn followers_out_of_contact_untouched() {
    let gel = GelPad::default();
    let gains = ServoGains::for_gel(&gel);
    // Leader on a small sphere: followers 22 mm to the side hang in the air.
    let sphere = ShapeModel::sphere(0.01, Vec3::zeros()).unwrap();
    let hand = HandState::from_leader(plane_leader(0.0005 - 0.01, 0.0, 0.0), HandTemplate::default());
    let out = follower_adapt(&sphere, &hand, &gains, &TactileJacobian::default(), &gel).unwrap();
    assert_eq!(out, hand);
}

#[test]
fn follower_on_plane_corrects_toward_reference() {
    let gel = GelPad::default();
    let gains = ServoGains::for_gel(&gel);
    let shape = slab();
    let mut hand = HandState::from_leader(plane_leader(0.0002, 0.0, 0.0), HandTemplate::default());
    // Retract and tilt follower 0 so only a thin band of it touches.
    hand.followers[0].theta_z = 3f64.to_radians();
    hand.followers[0].d_x = -0.0004;
    let before = extract_tactile_feature(&render_height_map(&shape, &hand.follower_pose(0), &gel));
    assert!(before.contact_area > 0 && (before.contact_area as f64) < gains.reference[2]);
    let out = follower_adapt(&shape, &hand, &gains, &TactileJacobian::default(), &gel).unwrap();
    assert_eq!(out.palm, hand.palm);
    assert!(out.followers[0].d_x > hand.followers[0].d_x);
    // Contact sits at high columns, so the follower rotates back toward the plane.
    assert!(before.centroid.unwrap().0 > gel.center().0);
    assert!(out.followers[0].theta_z < hand.followers[0].theta_z);
}

#[test]
fn follower_adaptation_saturates() {
    let gel = GelPad::default();
    let gains = ServoGains::for_gel(&gel);
    let shape = slab();
    let t = HandTemplate::default();
    // Leader hovers above the plane; follower 0 reaches down to a thin contact band.
    let mut hand = HandState::from_leader(plane_leader(-0.0082, 0.0, 0.0), t);
    hand.followers[0].theta_z = 3f64.to_radians();
    hand.followers[0].d_x = t.adapt_translation - 1e-6;
    let f = extract_tactile_feature(&render_height_map(&shape, &hand.follower_pose(0), &gel));
    assert!(f.contact_area > 0 && (f.contact_area as f64) < gains.reference[2]);
    let out = follower_adapt(&shape, &hand, &gains, &TactileJacobian::default(), &gel).unwrap();
    assert_eq!(out.followers[0].d_x, t.adapt_translation);

    let mut h = HandState::from_leader(Pose::identity(), t);
    h.adapt_follower(
        1,
        &Adaptation {
            d_x: -1.0,
            theta_y: 5.0,
            theta_z: -5.0,
        },
    );
    assert_eq!(
        h.followers[1],
        Adaptation {
            d_x: -t.adapt_translation,
            theta_y: t.adapt_rotation,
            theta_z: -t.adapt_rotation
        }
    );
}

#[test]
fn contact_established_opposing_normal() {
    let r = 0.05;
    let sphere = ShapeModel::sphere(r, Vec3::zeros()).unwrap();
    let t = HandTemplate::default();
    let hand = establish_contact(&sphere, &Vec3::new(-r, 0.0, 0.0), &t).unwrap();
    assert!((hand.leader_normal().into_inner() - Vec3::x()).norm() < 1e-3);
    let m = render_height_map(&sphere, &hand.leader_pose(), &GelPad::default());
    assert!(m.max() >= 0.0004 && m.max() <= 0.0008, "max {}", m.max());
    assert_eq!(hand.followers, [Adaptation::default(); 2]);
    // Followers flank the leader along the frame z axis.
    let dz = hand.follower_pose(0).translation.vector - hand.leader_pose().translation.vector;
    assert_abs_diff_eq!(dz.norm(), t.follower_spacing, epsilon = 1e-12);
}

#[test]
fn distant_approach_fails() {
    let sphere = ShapeModel::sphere(0.05, Vec3::zeros()).unwrap();
    let err = establish_contact(&sphere, &Vec3::new(-0.15, 0.0, 0.0), &HandTemplate::default()).unwrap_err();
    assert!(matches!(err, Error::ApproachFailed { .. }));
}

#[test]
fn trace_csv_layout() {
    let steps = [ServoStep {
        iteration: 0,
        delta: Some(Vector3::new(1.0, -2.0, 3.0)),
        twist: Twist {
            theta_y: 0.01,
            theta_z: 0.0,
            d_x: 0.0001,
        },
    }];
    let csv = trace_csv(&steps);
    assert_eq!(csv.lines().next().unwrap(), "iteration,dx,dy,dc,theta_y,theta_z,d_x");
    assert_eq!(
        csv.lines().nth(1).unwrap(),
        "0,1.000000,-2.000000,3.0,0.01000000,0.00000000,0.00010000"
    );
}

proptest! {
    #[test]
    fn selection_is_exclusive_and_clamped(dx in -50.0..50.0f64, dy in -50.0..50.0f64, dc in -800.0..800.0f64) {
        let jac = TactileJacobian::default();
        let u = Vector3::new(dx, dy, dc);
        let rot = selected_twist(&u, &jac, 1, 0);
        let tra = selected_twist(&u, &jac, 0, 1);
        prop_assert_eq!(rot.z, 0.0);
        prop_assert_eq!((tra.x, tra.y), (0.0, 0.0));
        let gains = ServoGains::for_gel(&GelPad::default());
        let t = palm_twist(&u, None, &jac, &gains).unwrap();
        prop_assert!(t.theta_y.abs() <= gains.max_rotation_step);
        prop_assert!(t.theta_z.abs() <= gains.max_rotation_step);
        prop_assert!(t.d_x.abs() <= gains.max_translation_step);
    }
}
