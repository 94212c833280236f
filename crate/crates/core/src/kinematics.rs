//! Forward kinematics, geometric Jacobians and damped-least-squares IK.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Isometry3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pose::Pose;
use crate::robot_model::{Group, Joint, JointKind, ModelError, RobotModel};
use crate::state::JointState;

/// Motion of a single joint at position `value`, in the joint frame.
fn joint_motion(joint: &Joint, value: f64) -> Isometry3<f64> {
    match joint.kind {
        JointKind::Revolute | JointKind::Continuous => Isometry3::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_scaled_axis(joint.axis * value),
        ),
        JointKind::Prismatic => {
            Isometry3::from_parts(Translation3::from(joint.axis * value), UnitQuaternion::identity())
        }
        JointKind::Fixed => Isometry3::identity(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardKinematics {
    /// World pose of the end-effector point (tip link plus tip offset).
    pub tip: Pose,
    /// World pose of every link on the chain, base included.
    pub per_link: BTreeMap<String, Pose>,
    /// World pose of the group's base link.
    pub base: Pose,
}

/// Per-joint frames along a chain, shared by FK and the Jacobian.
struct ChainFrames {
    base: Isometry3<f64>,
    /// World frame of each actuated joint (after its origin, before motion).
    joint_frames: Vec<Isometry3<f64>>,
    links: Vec<(usize, Isometry3<f64>)>,
    tip: Isometry3<f64>,
}

/// World pose of `link` with every joint between it and the root at zero.
fn zero_config_pose(model: &RobotModel, link: usize) -> Isometry3<f64> {
    let mut iso = Isometry3::identity();
    let mut current = link;
    while let Some(j) = model.parent_joint_of(current) {
        let joint = model.joint(j);
        iso = joint.origin.to_isometry() * joint_motion(joint, 0.0) * iso;
        current = model.link_index(&joint.parent).expect("validated tree");
    }
    iso
}

fn chain_frames(model: &RobotModel, group: &Group, q: &[f64]) -> ChainFrames {
    let base_index = model.link_index(&group.base_link).expect("validated group");
    let base = zero_config_pose(model, base_index);
    let mut t = base;
    let mut joint_frames = Vec::with_capacity(group.dof());
    let mut links = vec![(base_index, base)];
    let mut values = q.iter();
    for &j in &group.chain {
        let joint = model.joint(j);
        let frame = t * joint.origin.to_isometry();
        let value = if joint.kind.is_actuated() {
            joint_frames.push(frame);
            *values.next().expect("dimension checked")
        } else {
            0.0
        };
        t = frame * joint_motion(joint, value);
        links.push((model.link_index(&joint.child).expect("validated tree"), t));
    }
    let tip = t * group.tip_offset.to_isometry();
    ChainFrames {
        base,
        joint_frames,
        links,
        tip,
    }
}

fn group_for<'m>(model: &'m RobotModel, q: &JointState) -> Result<&'m Group, ModelError> {
    let group = model.group(&q.group)?;
    model.check_dimension(group, q)?;
    Ok(group)
}

pub fn forward_kinematics(model: &RobotModel, q: &JointState) -> Result<ForwardKinematics, ModelError> {
    let group = group_for(model, q)?;
    let frames = chain_frames(model, group, &q.positions);
    Ok(ForwardKinematics {
        tip: Pose::from_isometry(&frames.tip),
        per_link: frames
            .links
            .iter()
            .map(|(l, iso)| (model.links()[*l].name.clone(), Pose::from_isometry(iso)))
            .collect(),
        base: Pose::from_isometry(&frames.base),
    })
}

/// End-effector pose only.
pub fn tip_pose(model: &RobotModel, q: &JointState) -> Result<Pose, ModelError> {
    let group = group_for(model, q)?;
    Ok(Pose::from_isometry(&chain_frames(model, group, &q.positions).tip))
}

/// World pose of every link in the model, indexed like `model.links()`.
/// Joints outside `q`'s group are held at zero.
pub fn all_link_poses(model: &RobotModel, q: &JointState) -> Result<Vec<Isometry3<f64>>, ModelError> {
    let group = group_for(model, q)?;
    Ok(link_poses_raw(model, group, &q.positions))
}

pub(crate) fn link_poses_raw(model: &RobotModel, group: &Group, q: &[f64]) -> Vec<Isometry3<f64>> {
    let mut values = vec![0.0; model.joints().len()];
    for (&j, &v) in group.actuated.iter().zip(q) {
        values[j] = v;
    }
    let mut poses = vec![Isometry3::identity(); model.links().len()];
    for &j in model.topo_joint_indices() {
        let joint = model.joint(j);
        let parent = model.link_index(&joint.parent).expect("validated tree");
        let child = model.link_index(&joint.child).expect("validated tree");
        poses[child] = poses[parent] * joint.origin.to_isometry() * joint_motion(joint, values[j]);
    }
    poses
}

/// Geometric Jacobian (6×n, linear rows first) of the end-effector point in
/// the world frame.
pub fn jacobian(model: &RobotModel, q: &JointState) -> Result<DMatrix<f64>, ModelError> {
    let group = group_for(model, q)?;
    let frames = chain_frames(model, group, &q.positions);
    Ok(jacobian_from_frames(model, group, &frames))
}

fn jacobian_from_frames(model: &RobotModel, group: &Group, frames: &ChainFrames) -> DMatrix<f64> {
    let p_tip = frames.tip.translation.vector;
    let mut jac = DMatrix::zeros(6, group.dof());
    for (col, (&j, frame)) in group.actuated.iter().zip(&frames.joint_frames).enumerate() {
        let joint = model.joint(j);
        let z = frame.rotation * joint.axis;
        let p = frame.translation.vector;
        let (lin, ang) = match joint.kind {
            JointKind::Prismatic => (z, Vector3::zeros()),
            _ => (z.cross(&(p_tip - p)), z),
        };
        jac.fixed_view_mut::<3, 1>(0, col).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, col).copy_from(&ang);
    }
    jac
}

/// Weighted task-space error below which the damping factor shrinks in
/// proportion to the error.
pub const DAMPING_FADE_ERROR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    pub max_iterations: usize,
    /// Meters.
    pub position_tolerance: f64,
    /// Radians.
    pub orientation_tolerance: f64,
    /// Damping factor far from the target; see [`DAMPING_FADE_ERROR`].
    pub damping: f64,
    pub step_scale: f64,
    /// Zero solves for position only.
    pub orientation_weight: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
            damping: 0.05,
            step_scale: 0.5,
            orientation_weight: 1.0,
        }
    }
}

impl IkParams {
    pub fn position_only() -> Self {
        Self {
            orientation_weight: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IkError> {
        let ok = self.max_iterations > 0
            && self.position_tolerance > 0.0
            && self.orientation_tolerance > 0.0
            && self.damping > 0.0
            && self.step_scale > 0.0
            && self.step_scale <= 1.0
            && self.orientation_weight >= 0.0
            && self.orientation_weight.is_finite();
        if ok {
            Ok(())
        } else {
            Err(IkError::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub state: JointState,
    pub iterations: usize,
    pub position_residual: f64,
    pub orientation_residual: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IkError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid IK parameters: {0}")]
    InvalidParams(String),
    #[error("target is {distance:.4} m from the chain root but the chain reaches at most {reach:.4} m")]
    UnreachableHint { distance: f64, reach: f64 },
    #[error("no convergence after {iterations} iterations (position residual {position_residual:.3e} m, orientation residual {orientation_residual:.3e} rad)")]
    NoConvergence {
        best: JointState,
        iterations: usize,
        position_residual: f64,
        orientation_residual: f64,
    },
}

/// Rotation vector of `target * current⁻¹`, taking the quaternion with a
/// nonnegative scalar part.
pub fn orientation_error(current: &UnitQuaternion<f64>, target: &UnitQuaternion<f64>) -> Vector3<f64> {
    let mut q = (target * current.inverse()).into_inner();
    if q.w < 0.0 {
        q = -q;
    }
    let v = q.vector();
    let s = v.norm();
    if s < 1e-15 {
        // small-angle limit of 2·atan2(s, w)/s
        return v * 2.0;
    }
    v * (2.0 * s.atan2(q.w) / s)
}

/// Upper bound on the distance the end-effector can be from the first
/// actuated joint, plus that joint's world position.
pub fn chain_reach(model: &RobotModel, group: &Group) -> (Vector3<f64>, f64) {
    let zero = vec![0.0; group.dof()];
    let frames = chain_frames(model, group, &zero);
    let Some(first) = group.chain.iter().position(|&j| model.joint(j).kind.is_actuated()) else {
        return (frames.tip.translation.vector, 0.0);
    };
    let anchor = frames.joint_frames[0].translation.vector;
    let mut reach = 0.0;
    for (i, &j) in group.chain.iter().enumerate().skip(first) {
        let joint = model.joint(j);
        if i > first {
            reach += joint.origin.position.norm();
        }
        if joint.kind == JointKind::Prismatic {
            let (lo, hi) = joint.bounds();
            reach += lo.abs().max(hi.abs());
        }
    }
    reach += group.tip_offset.position.norm();
    (anchor, reach)
}

fn residuals(tip: &Isometry3<f64>, target: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    (
        target.position - tip.translation.vector,
        orientation_error(&tip.rotation, &target.orientation),
    )
}

/// Damped least squares: `dq = Jᵀ (J Jᵀ + λ² I)⁻¹ e`, scaled by
/// `step_scale`, clamped into joint limits every iteration.
pub fn inverse_kinematics(
    model: &RobotModel,
    target: &Pose,
    seed: &JointState,
    params: &IkParams,
) -> Result<IkSolution, IkError> {
    params.validate()?;
    let group = group_for(model, seed)?;
    let weight = params.orientation_weight;
    let use_orientation = weight > 0.0;

    let (anchor, reach) = chain_reach(model, group);
    let distance = (target.position - anchor).norm();
    if distance > reach + params.position_tolerance {
        return Err(IkError::UnreachableHint { distance, reach });
    }

    let mut q = model.clamp_to_limits(seed)?;
    let mut best: Option<(f64, JointState, f64, f64)> = None;
    let rows = if use_orientation { 6 } else { 3 };
    let damping_sq = params.damping * params.damping;

    for iteration in 0..=params.max_iterations {
        let frames = chain_frames(model, group, &q.positions);
        let (ep, eo) = residuals(&frames.tip, target);
        let (pos_res, ori_res) = (ep.norm(), eo.norm());
        if pos_res <= params.position_tolerance && (!use_orientation || ori_res <= params.orientation_tolerance) {
            return Ok(IkSolution {
                state: q,
                iterations: iteration,
                position_residual: pos_res,
                orientation_residual: ori_res,
            });
        }
        let score = pos_res + weight * ori_res;
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, q.clone(), pos_res, ori_res));
        }
        if iteration == params.max_iterations {
            break;
        }

        let full = jacobian_from_frames(model, group, &frames);
        let mut jac = full.rows(0, rows).into_owned();
        let mut err = DVector::zeros(rows);
        err.fixed_rows_mut::<3>(0).copy_from(&ep);
        if use_orientation {
            jac.rows_mut(3, 3).scale_mut(weight);
            err.fixed_rows_mut::<3>(3).copy_from(&(eo * weight));
        }
        let damping_sq = damping_sq * (err.norm() / DAMPING_FADE_ERROR).min(1.0).powi(2);
        let solve = |jac: &DMatrix<f64>| {
            let jjt = jac * jac.transpose() + DMatrix::identity(rows, rows) * damping_sq;
            jjt.cholesky()
                .map(|chol| jac.transpose() * chol.solve(&err) * params.step_scale)
        };
        let Some(mut dq) = solve(&jac) else { break };
        // Joints resting on a limit and pushed further out cannot move; drop
        // them so the others absorb the error.
        let mut pinned = false;
        let mut wrapped: Vec<(usize, f64)> = Vec::new();
        for (col, (&j, (&v, &d))) in group.actuated.iter().zip(q.positions.iter().zip(dq.iter())).enumerate() {
            let joint = model.joint(j);
            if joint.kind == JointKind::Continuous {
                continue;
            }
            let (lo, hi) = joint.bounds();
            let full_turn = joint.kind == JointKind::Revolute && hi - lo >= TAU - 1e-12;
            if (v <= lo && d < 0.0) || (v >= hi && d > 0.0) {
                if full_turn {
                    // same link pose on the other side of the range
                    wrapped.push((col, if v <= lo { v + TAU } else { v - TAU }));
                } else {
                    jac.column_mut(col).fill(0.0);
                    pinned = true;
                }
            }
        }
        for &(col, v) in &wrapped {
            q.positions[col] = v;
        }
        wrapped.clear();
        if pinned {
            let Some(retry) = solve(&jac) else { break };
            dq = retry;
        }
        for (v, d) in q.positions.iter_mut().zip(dq.iter()) {
            *v += d;
        }
        q = model.clamp_to_limits(&q)?;
    }

    let (_, best, position_residual, orientation_residual) = best.expect("at least one iteration");
    Err(IkError::NoConvergence {
        best,
        iterations: params.max_iterations,
        position_residual,
        orientation_residual,
    })
}

/// Uniform sample inside the group's joint limits.
pub fn random_state<R: Rng + ?Sized>(model: &RobotModel, group: &str, rng: &mut R) -> Result<JointState, ModelError> {
    let g = model.group(group)?;
    let positions = g
        .actuated
        .iter()
        .map(|&j| {
            let (lo, hi) = model.joint(j).bounds();
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect();
    Ok(JointState::new(group, positions))
}

/// Runs IK from `seed`, then from up to `restarts` uniformly random seeds
/// while the solver fails to converge. Unreachable targets are not retried.
pub fn inverse_kinematics_with_restarts<R: Rng + ?Sized>(
    model: &RobotModel,
    target: &Pose,
    seed: &JointState,
    params: &IkParams,
    restarts: usize,
    rng: &mut R,
) -> Result<IkSolution, IkError> {
    let mut result = inverse_kinematics(model, target, seed, params);
    for _ in 0..restarts {
        let prev_score = match &result {
            Err(IkError::NoConvergence {
                position_residual,
                orientation_residual,
                ..
            }) => position_residual + params.orientation_weight * orientation_residual,
            _ => return result,
        };
        let retry_seed = random_state(model, &seed.group, rng)?;
        let retry = inverse_kinematics(model, target, &retry_seed, params);
        match &retry {
            Err(IkError::NoConvergence {
                position_residual,
                orientation_residual,
                ..
            }) if position_residual + params.orientation_weight * orientation_residual >= prev_score => {}
            _ => result = retry,
        }
    }
    result
}

/// Number of restarts used on the interactive end-effector drag path.
pub const DRAG_RESTARTS: usize = 3;
