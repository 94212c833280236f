//! Signed distance between two posed shapes.
//!
//! Sphere/capsule pairs and sphere–box use closed forms; every other pair
//! goes through GJK on the shape cores, with EPA for the overlapping case.

use std::cmp::Ordering;

use nalgebra::Vector3;

use super::gjk::{epa, gjk, Core, GjkResult};
use super::Shape;
use crate::pose::Pose;

type V3 = Vector3<f64>;

/// Positive: separation distance. Negative: penetration depth.
pub fn shape_distance(a: &Shape, pose_a: &Pose, b: &Shape, pose_b: &Pose) -> f64 {
    // A fixed evaluation order makes the result exactly symmetric.
    if canonical_order(a, pose_a, b, pose_b) == Ordering::Greater {
        distance_ordered(b, pose_b, a, pose_a)
    } else {
        distance_ordered(a, pose_a, b, pose_b)
    }
}

fn kind_rank(s: &Shape) -> u8 {
    match s {
        Shape::Sphere { .. } => 0,
        Shape::Capsule { .. } => 1,
        Shape::Box { .. } => 2,
        Shape::Cylinder { .. } => 3,
    }
}

fn canonical_order(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> Ordering {
    let key = |s: &Shape, p: &Pose| {
        let mut k = s.dims();
        k.extend(p.position.iter());
        k.extend(p.wxyz());
        k
    };
    kind_rank(a).cmp(&kind_rank(b)).then_with(|| {
        key(a, pa)
            .iter()
            .zip(key(b, pb).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Core and margin of a posed shape.
pub(crate) fn core_of(shape: &Shape, pose: &Pose) -> (Core, f64) {
    match *shape {
        Shape::Sphere { radius } => (Core::Point(pose.position), radius),
        Shape::Capsule { radius, half_length } => {
            let axis = pose.orientation * V3::z() * half_length;
            (Core::Segment(pose.position - axis, pose.position + axis), radius)
        }
        Shape::Box { half_extents } => (
            Core::Box {
                pose: pose.to_isometry(),
                half: V3::from(half_extents),
            },
            0.0,
        ),
        Shape::Cylinder { radius, half_length } => (
            Core::Cylinder {
                pose: pose.to_isometry(),
                radius,
                half_length,
            },
            0.0,
        ),
    }
}

fn distance_ordered(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> f64 {
    let (core_a, ra) = core_of(a, pa);
    let (core_b, rb) = core_of(b, pb);
    match (core_a, core_b) {
        (Core::Point(p), Core::Point(q)) => (p - q).norm() - ra - rb,
        (Core::Point(p), Core::Segment(s0, s1)) | (Core::Segment(s0, s1), Core::Point(p)) => {
            point_segment_distance(&p, &s0, &s1) - ra - rb
        }
        (Core::Segment(p0, p1), Core::Segment(q0, q1)) => segment_segment_distance(&p0, &p1, &q0, &q1) - ra - rb,
        (Core::Point(p), Core::Box { .. }) => {
            let Shape::Box { half_extents } = *b else {
                unreachable!()
            };
            point_box_signed_distance(&p, pb, &V3::from(half_extents)) - ra
        }
        _ => match gjk(&core_a, &core_b) {
            GjkResult::Separated(d) => d - ra - rb,
            GjkResult::Intersecting(simplex) => -(epa(&core_a, &core_b, simplex) + ra + rb),
        },
    }
}

pub fn point_segment_distance(p: &V3, a: &V3, b: &V3) -> f64 {
    let ab = b - a;
    let denom = ab.norm_squared();
    let t = if denom > 0.0 {
        ((p - a).dot(&ab) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Closest distance between segments `p0p1` and `q0q1`.
pub fn segment_segment_distance(p0: &V3, p1: &V3, q0: &V3, q1: &V3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = 1e-300;
    let (s, t) = if a <= eps && e <= eps {
        (0.0, 0.0)
    } else if a <= eps {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > 1e-14 * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}

/// Signed distance from a point to a posed box (negative inside).
pub fn point_box_signed_distance(p: &V3, pose: &Pose, half: &V3) -> f64 {
    let local = pose.orientation.inverse_transform_vector(&(p - pose.position));
    let q = local.abs() - half;
    let outside = q.sup(&V3::zeros()).norm();
    let inside = q.max().min(0.0);
    outside + inside
}
