//! Shapes, signed distance between posed shapes, and robot-vs-world checks.

mod distance;
mod gjk;
mod robot;
mod shape;

pub use distance::{point_box_signed_distance, point_segment_distance, segment_segment_distance, shape_distance};
pub use robot::{
    robot_in_collision, segment_valid, CollisionChecker, CollisionOptions, CollisionReport, Contact, ContactPair,
    BROAD_PHASE_MARGIN, DEFAULT_EDGE_STEP,
};
pub use shape::{Aabb, InvalidShape, Shape};
