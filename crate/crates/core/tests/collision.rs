mod support;

use nalgebra::Isometry3;
use planhub_core::collision::*;
use planhub_core::robot_model::DEFAULT_GROUP;
use planhub_core::scene::CollisionObject;
use planhub_core::{samples, JointState, Pose, Shape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn signs_agree_with_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut disagreements = Vec::new();
    let n = 300;
    for _ in 0..n {
        let (a, b) = (support::random_shape(&mut rng), support::random_shape(&mut rng));
        let (pa, pb) = (support::random_pose(&mut rng, 0.4), support::random_pose(&mut rng, 0.4));
        let d = shape_distance(&a, &pa, &b, &pb);
        let oracle = support::sampled_signed_distance(&a, &pa, &b, &pb);
        if (d < 0.0) != (oracle < 0.0) {
            disagreements.push((d, oracle, a, b));
        }
        if d > 1e-3 {
            // separated: the oracle computes the same distance
            assert!((d - oracle).abs() < 1e-4, "{a:?} {b:?}: {d} vs {oracle}");
        }
    }
    assert!(disagreements.iter().all(|(d, ..)| d.abs() < 1e-3), "{disagreements:?}");
    assert!(disagreements.len() <= 1);
}

#[test]
fn deep_capsule_cylinder_overlap_finishes() {
    // once sent EPA into runaway face growth
    let capsule = Shape::capsule(0.4575180593668367, 0.484974357998998);
    let pc = Pose::from_wxyz(
        [0.49859717147814564, -0.05061700227684618, 0.15127803711695176],
        [
            0.7706559624015282,
            0.16104649228811724,
            0.5501474754700695,
            0.2783723588479593,
        ],
    )
    .unwrap();
    let cylinder = Shape::cylinder(0.42083762554785087, 0.37158054873901203);
    let py = Pose::from_wxyz(
        [-0.04704290248375975, -0.08445282841559476, -0.0794968023105651],
        [
            0.4461737714833599,
            0.5837005769803887,
            -0.36293484299523493,
            0.5731499819533281,
        ],
    )
    .unwrap();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        tx.send((
            shape_distance(&capsule, &pc, &cylinder, &py),
            shape_distance(&cylinder, &py, &capsule, &pc),
        ))
        .unwrap()
    });
    let (ab, ba) = rx
        .recv_timeout(std::time::Duration::from_secs(5))
        .expect("distance query finishes");
    assert_eq!(ab, ba);
    assert!(ab < 0.0);
    assert!(support::sampled_signed_distance(&capsule, &pc, &cylinder, &py) < 0.0);
}

fn shape_strategy() -> impl Strategy<Value = Shape> {
    let dim = || 0.05f64..0.5;
    prop_oneof![
        (dim(), dim(), dim()).prop_map(|(x, y, z)| Shape::cuboid(x, y, z)),
        dim().prop_map(Shape::sphere),
        (dim(), dim()).prop_map(|(r, h)| Shape::cylinder(r, h)),
        (dim(), dim()).prop_map(|(r, h)| Shape::capsule(r, h)),
    ]
}

fn pose_strategy() -> impl Strategy<Value = Pose> {
    (
        proptest::array::uniform3(-0.5f64..0.5),
        proptest::array::uniform3(-2.0f64..2.0),
    )
        .prop_map(|(t, r)| Pose::from_xyz_rpy(t, r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn distance_is_symmetric(a in shape_strategy(), b in shape_strategy(), pa in pose_strategy(), pb in pose_strategy()) {
        let ab = shape_distance(&a, &pa, &b, &pb);
        let ba = shape_distance(&b, &pb, &a, &pa);
        prop_assert!((ab - ba).abs() < 1e-6, "{ab} vs {ba}");
    }

    #[test]
    fn distance_is_rigid_invariant(a in shape_strategy(), b in shape_strategy(), pa in pose_strategy(), pb in pose_strategy(), g in pose_strategy()) {
        let before = shape_distance(&a, &pa, &b, &pb);
        let after = shape_distance(&a, &g.compose(&pa), &b, &g.compose(&pb));
        prop_assert!((before - after).abs() < 1e-6, "{before} vs {after}");
    }

    #[test]
    fn separated_distance_is_a_witnessed_gap(a in shape_strategy(), b in shape_strategy(), pa in pose_strategy(), pb in pose_strategy()) {
        let d = shape_distance(&a, &pa, &b, &pb);
        // no point of either shape lies inside the other when separated
        if d > 1e-6 {
            prop_assert!(support::sampled_signed_distance(&a, &pa, &b, &pb) > 0.0);
        }
    }

    #[test]
    fn padding_only_adds_collisions(q in proptest::array::uniform2(-3.1f64..3.1), p1 in 0.0f64..0.2, extra in 0.0f64..0.2) {
        let model = samples::two_link_planar();
        let objects = ball_scene();
        let state = JointState::new(DEFAULT_GROUP, q.to_vec());
        let low = robot_in_collision(&model, &state, &objects, CollisionOptions { padding: p1, ..Default::default() }).unwrap();
        let high = robot_in_collision(&model, &state, &objects, CollisionOptions { padding: p1 + extra, ..Default::default() }).unwrap();
        prop_assert!(!low.in_collision || high.in_collision);
    }

    #[test]
    fn finer_segment_checks_are_stricter(a in proptest::array::uniform2(-3.0f64..3.0), b in proptest::array::uniform2(-3.0f64..3.0), step in 0.01f64..0.5, k in 1u32..4) {
        let model = samples::two_link_planar();
        let objects = ball_scene();
        let (a, b) = (JointState::new(DEFAULT_GROUP, a.to_vec()), JointState::new(DEFAULT_GROUP, b.to_vec()));
        let fine = segment_valid(&model, &a, &b, &objects, step / f64::from(1 << k)).unwrap();
        let coarse = segment_valid(&model, &a, &b, &objects, step).unwrap();
        prop_assert!(!fine || coarse);
    }
}

fn ball_scene() -> Vec<CollisionObject> {
    vec![
        CollisionObject::new("ball", Shape::sphere(0.3), Pose::from_translation(1.2, 0.6, 0.0)),
        CollisionObject::new(
            "post",
            Shape::cylinder(0.1, 0.5),
            Pose::from_translation(-0.9, -0.9, 0.0),
        ),
    ]
}

#[test]
fn robot_distance_matches_world_shapes() {
    // the report's clearance equals the distance between the placed link
    // shapes and the object, computed from link poses directly
    let model = samples::two_link_planar();
    let objects = ball_scene();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let q = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let state = JointState::new(DEFAULT_GROUP, q);
        let report = robot_in_collision(&model, &state, &objects, CollisionOptions::default()).unwrap();
        let poses = planhub_core::kinematics::all_link_poses(&model, &state).unwrap();
        let mut expected = f64::INFINITY;
        for (link, pose) in model.links().iter().zip(&poses) {
            for geom in &link.collision {
                let world: Isometry3<f64> = pose * geom.origin.to_isometry();
                for o in &objects {
                    let d =
                        support::sampled_signed_distance(&geom.shape, &Pose::from_isometry(&world), &o.shape, &o.pose);
                    expected = expected.min(d);
                }
            }
        }
        if expected > 1e-3 {
            assert!(
                (report.min_clearance - expected).abs() < 1e-4,
                "{} vs {expected}",
                report.min_clearance
            );
            assert!(!report.in_collision);
        } else if expected < -1e-3 {
            assert!(report.in_collision);
        }
    }
}

#[test]
fn touching_boxes_are_not_in_collision() {
    let a = Shape::cuboid(0.5, 0.5, 0.5);
    let d = shape_distance(&a, &Pose::identity(), &a, &Pose::from_translation(1.0 + 1e-9, 0.0, 0.0));
    assert!(d >= 0.0);
}
