//! Core of the interactive motion-planning server: robot models parsed from
//! URDF, kinematics, collision queries, the versioned planning scene with its
//! change journal, sampling-based planners, and the framed wire protocol.

pub mod collision;
pub mod kinematics;
pub mod planning;
pub mod pose;
pub mod protocol;
pub mod robot_model;
pub mod samples;
pub mod scene;
pub mod space;
pub mod state;

pub use collision::Shape;
pub use pose::Pose;
pub use robot_model::RobotModel;
pub use state::JointState;
