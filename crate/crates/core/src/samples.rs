//! Bundled robot descriptions and scenes used by tests, demos and the CLI.

use nalgebra::{UnitQuaternion, Vector3};

use crate::planning::MotionPlanRequest;
use crate::pose::Pose;
use crate::robot_model::{parse_urdf, RobotModel};
use crate::scene::SceneFile;
use crate::state::JointState;

pub const TWO_LINK_PLANAR_URDF: &str = include_str!("../assets/urdf/two_link_planar.urdf");
pub const THREE_LINK_PLANAR_URDF: &str = include_str!("../assets/urdf/three_link_planar.urdf");
pub const SIX_DOF_ARM_URDF: &str = include_str!("../assets/urdf/six_dof_arm.urdf");

pub const ALL_URDFS: [&str; 3] = [TWO_LINK_PLANAR_URDF, THREE_LINK_PLANAR_URDF, SIX_DOF_ARM_URDF];

/// Two-link arm with a wall of obstacles that blocks the direct sweep
/// between its start and goal configurations.
pub const CORRIDOR_SCENE: &str = include_str!("../assets/scenes/corridor.json");
/// Six-axis arm on a table with five objects.
pub const TABLE_SCENE: &str = include_str!("../assets/scenes/table.json");

pub fn two_link_planar() -> RobotModel {
    parse_urdf(TWO_LINK_PLANAR_URDF).expect("bundled URDF parses")
}

pub fn three_link_planar() -> RobotModel {
    parse_urdf(THREE_LINK_PLANAR_URDF).expect("bundled URDF parses")
}

pub fn six_dof_arm() -> RobotModel {
    parse_urdf(SIX_DOF_ARM_URDF).expect("bundled URDF parses")
}

pub fn all_models() -> Vec<RobotModel> {
    vec![two_link_planar(), three_link_planar(), six_dof_arm()]
}

/// Plan request crossing the corridor scene.
pub const CORRIDOR_REQUEST: &str = include_str!("../assets/requests/corridor.json");

pub fn corridor_scene() -> SceneFile {
    SceneFile::from_json(CORRIDOR_SCENE).expect("bundled scene parses")
}

pub fn corridor_request() -> MotionPlanRequest {
    serde_json::from_str(CORRIDOR_REQUEST).expect("bundled request parses")
}

pub fn table_scene() -> SceneFile {
    SceneFile::from_json(TABLE_SCENE).expect("bundled scene parses")
}

/// Collision-free configuration with the tool pointing down over the free
/// area of the table.
pub fn table_empty_spot() -> JointState {
    JointState::new("default", vec![-0.165, 0.345, 2.293, 0.504, 2.977, 0.0])
}

/// Tool pointing straight down at `(x, y, z)`.
pub fn tool_down_at(x: f64, y: f64, z: f64) -> Pose {
    Pose::new(
        Vector3::new(x, y, z),
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI),
    )
}
