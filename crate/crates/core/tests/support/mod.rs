//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use planhub_core::collision::{robot_in_collision, CollisionOptions};
use planhub_core::kinematics::tip_pose;
use planhub_core::scene::CollisionObject;
use planhub_core::space::JointSpace;
use planhub_core::{JointState, Pose, RobotModel, Shape};
use rand::Rng;

/// Central-difference Jacobian of the end-effector pose. Angular rows come
/// from the rotation vector of `R(q + h) R(q - h)^T`.
pub fn finite_difference_jacobian(model: &RobotModel, q: &JointState, h: f64) -> DMatrix<f64> {
    let n = q.positions.len();
    let mut jac = DMatrix::zeros(6, n);
    for j in 0..n {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus.positions[j] += h;
        minus.positions[j] -= h;
        let a = tip_pose(model, &plus).unwrap();
        let b = tip_pose(model, &minus).unwrap();
        let dp = (a.position - b.position) / (2.0 * h);
        let dr = (a.orientation * b.orientation.inverse()).scaled_axis() / (2.0 * h);
        for r in 0..3 {
            jac[(r, j)] = dp[r];
            jac[(r + 3, j)] = dr[r];
        }
    }
    jac
}

/// Tip pose by walking the group's joints from the root link: each joint
/// contributes `origin * motion(q)`. Assumes the group starts at the root.
pub fn tip_by_composition(model: &RobotModel, q: &JointState) -> Isometry3<f64> {
    use planhub_core::robot_model::JointKind;
    let group = model.group(&q.group).unwrap();
    let mut values = q.positions.iter();
    let mut t = Isometry3::identity();
    for joint in group.chain.iter().map(|&j| model.joint(j)) {
        let origin = joint.origin.to_isometry();
        let motion = match joint.kind {
            JointKind::Fixed => Isometry3::identity(),
            JointKind::Prismatic => Isometry3::from_parts(
                Translation3::from(joint.axis * *values.next().unwrap()),
                UnitQuaternion::identity(),
            ),
            JointKind::Revolute | JointKind::Continuous => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_scaled_axis(joint.axis * *values.next().unwrap()),
            ),
        };
        t = t * origin * motion;
    }
    t * group.tip_offset.to_isometry()
}

/// Signed distance from a point in the shape's local frame.
pub fn local_signed_distance(shape: &Shape, p: &Vector3<f64>) -> f64 {
    match *shape {
        Shape::Sphere { radius } => p.norm() - radius,
        Shape::Box { half_extents } => {
            let q = Vector3::new(
                p.x.abs() - half_extents[0],
                p.y.abs() - half_extents[1],
                p.z.abs() - half_extents[2],
            );
            q.map(|v| v.max(0.0)).norm() + q.max().min(0.0)
        }
        Shape::Capsule { radius, half_length } => {
            let z = p.z.clamp(-half_length, half_length);
            (p - Vector3::new(0.0, 0.0, z)).norm() - radius
        }
        Shape::Cylinder { radius, half_length } => {
            let dr = p.xy().norm() - radius;
            let dz = p.z.abs() - half_length;
            dr.max(dz).min(0.0) + (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt()
        }
    }
}

/// Nearest point of the (solid) shape, local frame.
pub fn local_project(shape: &Shape, p: &Vector3<f64>) -> Vector3<f64> {
    match *shape {
        Shape::Sphere { radius } => {
            if p.norm() <= radius {
                *p
            } else {
                p * (radius / p.norm())
            }
        }
        Shape::Box { half_extents } => Vector3::new(
            p.x.clamp(-half_extents[0], half_extents[0]),
            p.y.clamp(-half_extents[1], half_extents[1]),
            p.z.clamp(-half_extents[2], half_extents[2]),
        ),
        Shape::Capsule { radius, half_length } => {
            let axis = Vector3::new(0.0, 0.0, p.z.clamp(-half_length, half_length));
            let off = p - axis;
            if off.norm() <= radius {
                *p
            } else {
                axis + off * (radius / off.norm())
            }
        }
        Shape::Cylinder { radius, half_length } => {
            let mut xy = p.xy();
            if xy.norm() > radius {
                xy *= radius / xy.norm();
            }
            Vector3::new(xy.x, xy.y, p.z.clamp(-half_length, half_length))
        }
    }
}

fn local_half_box(shape: &Shape) -> Vector3<f64> {
    match *shape {
        Shape::Sphere { radius } => Vector3::repeat(radius),
        Shape::Box { half_extents } => Vector3::from(half_extents),
        Shape::Capsule { radius, half_length } => Vector3::new(radius, radius, half_length + radius),
        Shape::Cylinder { radius, half_length } => Vector3::new(radius, radius, half_length),
    }
}

/// Smallest signed distance to `b` attained by any point of `a`, found by
/// grid sampling of `a` refined around the best sample. Negative exactly
/// when some point of `a` lies inside `b`; for separated shapes it is their
/// distance. The objective is convex, so refinement cannot get trapped.
pub fn containment_depth(a: &Shape, pose_a: &Pose, b: &Shape, pose_b: &Pose) -> f64 {
    let ia = pose_a.to_isometry();
    let ib_inv = pose_b.to_isometry().inverse();
    let eval = |local_a: &Vector3<f64>| {
        let in_a = local_project(a, local_a);
        let world = ia * Point3::from(in_a);
        local_signed_distance(b, &(ib_inv * world).coords)
    };
    let mut half = local_half_box(a);
    let mut center = Vector3::zeros();
    let mut best = eval(&center);
    let grid = |center: Vector3<f64>, half: Vector3<f64>, n: i32, best: &mut f64| {
        let mut arg = center;
        for i in -n..=n {
            for j in -n..=n {
                for k in -n..=n {
                    let p = center
                        + Vector3::new(
                            half.x * i as f64 / n as f64,
                            half.y * j as f64 / n as f64,
                            half.z * k as f64 / n as f64,
                        );
                    let v = eval(&p);
                    if v < *best {
                        *best = v;
                        arg = local_project(a, &p);
                    }
                }
            }
        }
        arg
    };
    center = grid(center, half, 6, &mut best);
    for _ in 0..60 {
        half *= 0.6;
        center = grid(center, half, 2, &mut best);
    }
    best
}

/// Sign oracle for a shape pair: negative when they overlap.
pub fn sampled_signed_distance(a: &Shape, pose_a: &Pose, b: &Shape, pose_b: &Pose) -> f64 {
    containment_depth(a, pose_a, b, pose_b).min(containment_depth(b, pose_b, a, pose_a))
}

pub fn random_shape<R: Rng>(rng: &mut R) -> Shape {
    let kind = rng.random_range(0..4);
    let mut dim = || rng.random_range(0.05..0.5);
    match kind {
        0 => Shape::cuboid(dim(), dim(), dim()),
        1 => Shape::sphere(dim()),
        2 => Shape::cylinder(dim(), dim()),
        _ => Shape::capsule(dim(), dim()),
    }
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    let v = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n: f64 = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    UnitQuaternion::from_scaled_axis(v * rng.random_range(0.0..std::f64::consts::PI))
}

pub fn random_pose<R: Rng>(rng: &mut R, spread: f64) -> Pose {
    Pose::new(
        Vector3::new(
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
        ),
        random_rotation(rng),
    )
}

/// Fixed-increment sweep at `step` (max joint displacement per sample),
/// checking every sample with the exact collision report.
pub fn sweep_is_free(model: &RobotModel, objects: &[CollisionObject], path: &[JointState], step: f64) -> bool {
    let space = JointSpace::for_group(model, &path[0].group).unwrap();
    let free = |q: Vec<f64>| {
        space.within_limits(&q)
            && !robot_in_collision(
                model,
                &JointState::new(&path[0].group, q),
                objects,
                CollisionOptions::default(),
            )
            .unwrap()
            .in_collision
    };
    if !free(path[0].positions.clone()) {
        return false;
    }
    for w in path.windows(2) {
        let (a, b) = (&w[0].positions, &w[1].positions);
        let n = (space.max_joint_distance(a, b) / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            if !free(space.interpolate(a, b, i as f64 / n as f64)) {
                return false;
            }
        }
    }
    true
}

fn random_state<R: Rng>(rng: &mut R, n: usize) -> JointState {
    JointState::new("default", (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
}

fn random_object<R: Rng>(rng: &mut R) -> CollisionObject {
    let mut o = CollisionObject::new(
        format!("obj-{}", rng.random_range(0..1000)),
        random_shape(rng),
        random_pose(rng, 2.0),
    );
    o.revision = rng.random_range(0..100);
    o
}

fn random_trajectory<R: Rng>(rng: &mut R) -> planhub_core::planning::Trajectory {
    use planhub_core::planning::{Trajectory, TrajectoryPoint};
    let n = rng.random_range(1..4);
    let mut t = 0.0;
    let points = (0..rng.random_range(1..5))
        .map(|_| {
            t += rng.random_range(0.01..1.0);
            TrajectoryPoint {
                time_from_start: t,
                positions: random_state(rng, n).positions,
                velocities: random_state(rng, n).positions,
            }
        })
        .collect();
    Trajectory {
        group: "default".into(),
        continuous: if rng.random_bool(0.5) { vec![0] } else { vec![] },
        points,
    }
}

/// One random message of every type, with and without correlation ids.
pub fn random_messages<R: Rng>(rng: &mut R) -> Vec<planhub_core::protocol::Envelope> {
    use planhub_core::kinematics::IkParams;
    use planhub_core::planning::*;
    use planhub_core::protocol::*;
    use planhub_core::scene::{SceneDiff, SceneEdit, SceneOp, SceneSnapshot};

    let state = random_state(rng, 3);
    let goal = if rng.random_bool(0.5) {
        Goal::joint(random_state(rng, 3))
    } else {
        Goal::pose(random_pose(rng, 1.0))
    };
    let mut request = MotionPlanRequest::new(state.clone(), goal);
    request.seed = rng.random_bool(0.5).then(|| rng.random());
    request.max_planning_time = rng.random_range(0.1..10.0);
    let statuses = [
        PlanStatus::Success,
        PlanStatus::InvalidStartState,
        PlanStatus::InvalidGoalState,
        PlanStatus::GoalUnreachableIk,
        PlanStatus::TimedOut,
        PlanStatus::PlanningFailed,
    ];
    let response = MotionPlanResponse {
        status: statuses[rng.random_range(0..statuses.len())],
        path: Some(vec![random_state(rng, 3), random_state(rng, 3)]),
        trajectory: Some(random_trajectory(rng)),
        planning_time: rng.random(),
        waypoint_count: 2,
        message: rng.random_bool(0.5).then(|| "näive \"quoted\" ✓".to_string()),
    };
    let edit = match rng.random_range(0..4) {
        0 => SceneEdit::Add {
            object: random_object(rng),
        },
        1 => SceneEdit::SetPose {
            id: "x".into(),
            pose: random_pose(rng, 1.0),
        },
        2 => SceneEdit::Resize {
            id: "x".into(),
            shape: random_shape(rng),
        },
        _ => SceneEdit::Remove { id: "x".into() },
    };
    let diff = SceneDiff {
        from_version: 3,
        to_version: rng.random_range(4..100),
        ops: vec![
            SceneOp::Add {
                object: random_object(rng),
            },
            SceneOp::SetPose {
                id: "y".into(),
                pose: random_pose(rng, 1.0),
                revision: 7,
            },
            SceneOp::Remove { id: "z".into() },
        ],
        robot_state: rng.random_bool(0.5).then(|| state.clone()),
    };
    let exec_state = match rng.random_range(0..4) {
        0 => ExecutionState::Accepted,
        1 => ExecutionState::Executing { progress: rng.random() },
        2 => ExecutionState::Done,
        _ => ExecutionState::Aborted {
            reason: "stop requested".into(),
        },
    };
    let messages = vec![
        Message::Hello(Hello {
            client_name: format!("client-{}", rng.random::<u16>()),
            protocol_version: 1,
        }),
        Message::SnapshotRequest(Empty {}),
        Message::Snapshot(SceneSnapshot {
            version: rng.random_range(0..1000),
            objects: vec![random_object(rng), random_object(rng)],
            robot_state: Some(state.clone()),
        }),
        Message::SceneOp(edit),
        Message::SceneDiff(diff),
        Message::RobotState(random_state(rng, 6)),
        Message::PlannersRequest(Empty {}),
        Message::Planners(Planners {
            planner_ids: PLANNER_IDS.iter().map(|s| s.to_string()).collect(),
        }),
        Message::PlanRequest(request),
        Message::PlanResponse(PlanResponse {
            trajectory_id: rng.random_bool(0.5).then(|| rng.random_range(0..1 << 40)),
            response,
        }),
        Message::ExecuteRequest(ExecuteRequest {
            trajectory_id: Some(rng.random_range(0..1000)),
            trajectory: rng.random_bool(0.5).then(|| random_trajectory(rng)),
            playback_rate: rng.random_bool(0.5).then(|| rng.random_range(0.1..4.0)),
        }),
        Message::ExecuteStatus(ExecuteStatus {
            execution_id: rng.random_range(0..1000),
            state: exec_state,
        }),
        Message::ExecuteStop(Empty {}),
        Message::MirrorSet(MirrorSet { enabled: rng.random() }),
        Message::MirrorStatus(MirrorStatus { enabled: rng.random() }),
        Message::IkRequest(IkRequest {
            target: random_pose(rng, 1.0),
            seed: rng.random_bool(0.5).then(|| random_state(rng, 6)),
            params: rng.random_bool(0.5).then(|| IkParams {
                damping: rng.random_range(0.01..0.2),
                ..IkParams::default()
            }),
        }),
        Message::IkResponse(IkResponse {
            status: [IkStatus::Converged, IkStatus::NoConvergence, IkStatus::Unreachable][rng.random_range(0..3)],
            state: Some(random_state(rng, 6)),
            position_residual: rng.random(),
            orientation_residual: rng.random(),
        }),
        Message::error(ErrorCode::UnknownPlanner, Some(4), "no planner \"foo\""),
    ];
    messages
        .into_iter()
        .map(|m| {
            let e = Envelope::new(m);
            if rng.random_bool(0.5) {
                e.with_id(rng.random_range(0..1 << 50))
            } else {
                e
            }
        })
        .collect()
}
