//! Motion planning requests, the two sampling planners, path shortcutting
//! and time parameterization.

mod prm;
mod rrt;
mod shortcut;
mod trajectory;
mod validity;

use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use prm::{build_roadmap, prm, search_roadmap, PrmParams, Roadmap};
pub use rrt::{rrt_connect, RrtConnectParams};
pub use shortcut::{path_length, shortcut};
pub use trajectory::{
    time_parameterize, time_parameterize_space, trapezoid, TimeParamError, Trajectory, TrajectoryPoint,
    DEFAULT_MAX_ACCELERATION,
};
pub use validity::{SceneValidator, StateValidator, StopReason, StopSignal, EDGE_REFINEMENT};

use crate::collision::{CollisionChecker, CollisionOptions, DEFAULT_EDGE_STEP};
use crate::kinematics::{inverse_kinematics, random_state, IkError, IkParams};
use crate::pose::Pose;
use crate::robot_model::RobotModel;
use crate::scene::CollisionObject;
use crate::state::JointState;

pub const RRT_CONNECT: &str = "rrt_connect";
pub const PRM: &str = "prm";
pub const PLANNER_IDS: [&str; 2] = [RRT_CONNECT, PRM];

/// IK attempts used to turn a pose goal into a joint goal.
pub const POSE_GOAL_IK_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PlannerFailure {
    #[error("iteration budget exhausted")]
    IterationsExhausted,
    #[error("roadmap does not connect start and goal")]
    NoPath,
    #[error("time budget exhausted")]
    TimedOut,
    #[error("cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goal {
    Joint {
        state: JointState,
    },
    Pose {
        pose: Pose,
        #[serde(default = "default_position_tolerance")]
        position_tolerance: f64,
        #[serde(default = "default_orientation_tolerance")]
        orientation_tolerance: f64,
        /// Zero ignores orientation.
        #[serde(default = "default_orientation_weight")]
        orientation_weight: f64,
    },
}

impl Goal {
    pub fn joint(state: JointState) -> Self {
        Goal::Joint { state }
    }

    pub fn pose(pose: Pose) -> Self {
        Goal::Pose {
            pose,
            position_tolerance: default_position_tolerance(),
            orientation_tolerance: default_orientation_tolerance(),
            orientation_weight: default_orientation_weight(),
        }
    }
}

fn default_position_tolerance() -> f64 {
    IkParams::default().position_tolerance
}
fn default_orientation_tolerance() -> f64 {
    IkParams::default().orientation_tolerance
}
fn default_orientation_weight() -> f64 {
    IkParams::default().orientation_weight
}
fn default_group() -> String {
    crate::robot_model::DEFAULT_GROUP.to_string()
}
fn default_planner() -> String {
    RRT_CONNECT.to_string()
}
fn default_attempts() -> u32 {
    1
}
fn default_time() -> f64 {
    5.0
}
fn default_edge_step() -> f64 {
    DEFAULT_EDGE_STEP
}
fn default_shortcut() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPlanRequest {
    #[serde(default = "default_group")]
    pub group: String,
    pub start: JointState,
    pub goal: Goal,
    #[serde(default = "default_planner")]
    pub planner_id: String,
    #[serde(default = "default_attempts")]
    pub num_attempts: u32,
    /// Seconds, shared by all attempts.
    #[serde(default = "default_time")]
    pub max_planning_time: f64,
    #[serde(default = "default_edge_step")]
    pub edge_step: f64,
    #[serde(default = "default_shortcut")]
    pub shortcut_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MotionPlanRequest {
    pub fn new(start: JointState, goal: Goal) -> Self {
        Self {
            group: start.group.clone(),
            start,
            goal,
            planner_id: default_planner(),
            num_attempts: default_attempts(),
            max_planning_time: default_time(),
            edge_step: default_edge_step(),
            shortcut_iterations: default_shortcut(),
            seed: None,
        }
    }

    /// Checks the fields that do not depend on a model.
    pub fn validate(&self) -> Result<(), String> {
        if !PLANNER_IDS.contains(&self.planner_id.as_str()) {
            return Err(format!("unknown planner_id {:?}", self.planner_id));
        }
        if self.num_attempts == 0 {
            return Err("num_attempts must be at least 1".into());
        }
        if !(self.max_planning_time > 0.0 && self.max_planning_time.is_finite()) {
            return Err("max_planning_time must be positive".into());
        }
        if !(self.edge_step > 0.0 && self.edge_step.is_finite()) {
            return Err("edge_step must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanStatus {
    Success,
    InvalidStartState,
    InvalidGoalState,
    GoalUnreachableIk,
    TimedOut,
    PlanningFailed,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Success => "SUCCESS",
            PlanStatus::InvalidStartState => "INVALID_START_STATE",
            PlanStatus::InvalidGoalState => "INVALID_GOAL_STATE",
            PlanStatus::GoalUnreachableIk => "GOAL_UNREACHABLE_IK",
            PlanStatus::TimedOut => "TIMED_OUT",
            PlanStatus::PlanningFailed => "PLANNING_FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPlanResponse {
    pub status: PlanStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<JointState>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
    pub planning_time: f64,
    pub waypoint_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl MotionPlanResponse {
    fn failure(status: PlanStatus, started: Instant, message: impl Into<String>) -> Self {
        Self {
            status,
            path: None,
            trajectory: None,
            planning_time: started.elapsed().as_secs_f64(),
            waypoint_count: 0,
            message: Some(message.into()),
        }
    }
}

/// Plans with no external cancellation.
pub fn plan(model: &RobotModel, objects: &[CollisionObject], request: &MotionPlanRequest) -> MotionPlanResponse {
    plan_cancellable(model, objects, request, None)
}

/// Runs the full request: start check, goal resolution, up to
/// `num_attempts` planner runs within the shared time budget, then
/// shortcutting and timing. Setting `cancel` stops the planner at its next
/// iteration boundary and yields `PLANNING_FAILED`.
pub fn plan_cancellable(
    model: &RobotModel,
    objects: &[CollisionObject],
    request: &MotionPlanRequest,
    cancel: Option<Arc<AtomicBool>>,
) -> MotionPlanResponse {
    let started = Instant::now();
    let fail = |status, msg: String| MotionPlanResponse::failure(status, started, msg);
    if let Err(msg) = request.validate() {
        return fail(PlanStatus::PlanningFailed, msg);
    }
    let checker = match CollisionChecker::new(model, &request.group, objects, CollisionOptions::default()) {
        Ok(c) => c,
        Err(e) => return fail(PlanStatus::PlanningFailed, e.to_string()),
    };
    let validator = SceneValidator::new(checker, request.edge_step);
    let space = validator.space();
    let mut rng = ChaCha8Rng::seed_from_u64(request.seed.unwrap_or_else(rand::random));

    let start = &request.start;
    if start.group != request.group || start.positions.len() != space.dim() {
        return fail(
            PlanStatus::InvalidStartState,
            format!(
                "start must have {} positions for group {:?}",
                space.dim(),
                request.group
            ),
        );
    }
    if !space.within_limits(&start.positions) {
        return fail(PlanStatus::InvalidStartState, "start is outside joint limits".into());
    }
    if !validator.is_valid(&start.positions) {
        return fail(PlanStatus::InvalidStartState, "start is in collision".into());
    }

    let goal = match resolve_goal(model, &validator, request, &mut rng) {
        Ok(q) => q,
        Err(r) => return MotionPlanResponse::failure(r.0, started, r.1),
    };
    if !validator.is_valid(&goal) {
        return fail(
            PlanStatus::InvalidGoalState,
            "goal is outside joint limits or in collision".into(),
        );
    }

    let mut stop = StopSignal::never().with_deadline(started + Duration::from_secs_f64(request.max_planning_time));
    if let Some(flag) = cancel {
        stop = stop.with_cancel(flag);
    }
    let mut last_failure = PlannerFailure::IterationsExhausted;
    let mut raw = None;
    for _ in 0..request.num_attempts {
        let seed: u64 = rng.random();
        let result = match request.planner_id.as_str() {
            PRM => prm(
                &start.positions,
                &goal,
                &validator,
                &PrmParams {
                    seed,
                    ..PrmParams::default()
                },
                &stop,
            ),
            _ => rrt_connect(
                &start.positions,
                &goal,
                &validator,
                &RrtConnectParams {
                    seed,
                    ..RrtConnectParams::default()
                },
                &stop,
            ),
        };
        match result {
            Ok(path) => {
                raw = Some(path);
                break;
            }
            Err(e) => {
                last_failure = e;
                if matches!(e, PlannerFailure::TimedOut | PlannerFailure::Cancelled) {
                    break;
                }
            }
        }
    }
    let Some(raw) = raw else {
        let status = match last_failure {
            PlannerFailure::TimedOut => PlanStatus::TimedOut,
            _ => PlanStatus::PlanningFailed,
        };
        return fail(status, last_failure.to_string());
    };

    let path = shortcut(&raw, &validator, request.shortcut_iterations, rng.random());
    let trajectory = match time_parameterize_space(space, &path, DEFAULT_MAX_ACCELERATION) {
        Ok(t) => t,
        Err(e) => return fail(PlanStatus::PlanningFailed, e.to_string()),
    };
    MotionPlanResponse {
        status: PlanStatus::Success,
        waypoint_count: path.len(),
        path: Some(
            path.into_iter()
                .map(|q| JointState::new(request.group.clone(), q))
                .collect(),
        ),
        trajectory: Some(trajectory),
        planning_time: started.elapsed().as_secs_f64(),
        message: None,
    }
}

fn resolve_goal(
    model: &RobotModel,
    validator: &SceneValidator<'_>,
    request: &MotionPlanRequest,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, (PlanStatus, String)> {
    let space = validator.space();
    match &request.goal {
        Goal::Joint { state } => {
            if state.group != request.group || state.positions.len() != space.dim() {
                return Err((
                    PlanStatus::InvalidGoalState,
                    format!("goal must have {} positions for group {:?}", space.dim(), request.group),
                ));
            }
            Ok(state.positions.clone())
        }
        Goal::Pose {
            pose,
            position_tolerance,
            orientation_tolerance,
            orientation_weight,
        } => {
            let params = IkParams {
                position_tolerance: *position_tolerance,
                orientation_tolerance: *orientation_tolerance,
                orientation_weight: *orientation_weight,
                ..IkParams::default()
            };
            let mut first_solution = None;
            let mut last_error = String::from("no IK attempt made");
            for attempt in 0..POSE_GOAL_IK_ATTEMPTS {
                let seed = if attempt == 0 {
                    request.start.clone()
                } else {
                    random_state(model, &request.group, rng).map_err(|e| (PlanStatus::PlanningFailed, e.to_string()))?
                };
                match inverse_kinematics(model, pose, &seed, &params) {
                    Ok(sol) => {
                        if validator.is_valid(&sol.state.positions) {
                            return Ok(sol.state.positions);
                        }
                        first_solution.get_or_insert(sol.state.positions);
                    }
                    Err(e @ (IkError::UnreachableHint { .. } | IkError::InvalidParams(_))) => {
                        return Err((PlanStatus::GoalUnreachableIk, e.to_string()));
                    }
                    Err(e) => last_error = e.to_string(),
                }
            }
            first_solution.ok_or((PlanStatus::GoalUnreachableIk, last_error))
        }
    }
}

/// Independent check of a path: every state is within limits and collision
/// free, sampled at `step` along every edge.
pub fn path_valid(model: &RobotModel, objects: &[CollisionObject], path: &[JointState], step: f64) -> bool {
    let Some(first) = path.first() else {
        return false;
    };
    let Ok(checker) = CollisionChecker::new(model, &first.group, objects, CollisionOptions::default()) else {
        return false;
    };
    if path.len() == 1 {
        return checker.is_valid(&first.positions);
    }
    path.windows(2)
        .all(|w| checker.segment_valid(&w[0].positions, &w[1].positions, step))
}
