use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::pose::Pose;

/// A convex collision primitive. Cylinders and capsules are aligned with
/// their local z axis; `half_length` is half of the straight section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    Cylinder { radius: f64, half_length: f64 },
    Capsule { radius: f64, half_length: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid shape: {0}")]
pub struct InvalidShape(pub String);

impl Shape {
    pub fn cuboid(hx: f64, hy: f64, hz: f64) -> Self {
        Shape::Box {
            half_extents: [hx, hy, hz],
        }
    }

    pub fn sphere(radius: f64) -> Self {
        Shape::Sphere { radius }
    }

    pub fn cylinder(radius: f64, half_length: f64) -> Self {
        Shape::Cylinder { radius, half_length }
    }

    pub fn capsule(radius: f64, half_length: f64) -> Self {
        Shape::Capsule { radius, half_length }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Box { .. } => "box",
            Shape::Sphere { .. } => "sphere",
            Shape::Cylinder { .. } => "cylinder",
            Shape::Capsule { .. } => "capsule",
        }
    }

    /// Dimensions in a fixed order, used for validation and canonical ordering.
    pub fn dims(&self) -> Vec<f64> {
        match *self {
            Shape::Box { half_extents } => half_extents.to_vec(),
            Shape::Sphere { radius } => vec![radius],
            Shape::Cylinder { radius, half_length } | Shape::Capsule { radius, half_length } => {
                vec![radius, half_length]
            }
        }
    }

    pub fn validate(&self) -> Result<(), InvalidShape> {
        for d in self.dims() {
            if !(d.is_finite() && d > 0.0) {
                return Err(InvalidShape(format!(
                    "{} dimensions must be finite and strictly positive, got {:?}",
                    self.kind_name(),
                    self.dims()
                )));
            }
        }
        Ok(())
    }

    /// Radius of the smallest origin-centred sphere enclosing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Box { half_extents } => Vector3::from(half_extents).norm(),
            Shape::Sphere { radius } => radius,
            Shape::Cylinder { radius, half_length } => (radius * radius + half_length * half_length).sqrt(),
            Shape::Capsule { radius, half_length } => radius + half_length,
        }
    }

    /// World-frame axis-aligned bounds of the shape placed at `pose`.
    pub fn aabb(&self, pose: &Pose) -> Aabb {
        let rot = pose.orientation.to_rotation_matrix();
        let m = rot.matrix();
        let extent = match *self {
            Shape::Box { half_extents } => {
                let h = Vector3::from(half_extents);
                Vector3::from_fn(|i, _| (0..3).map(|j| m[(i, j)].abs() * h[j]).sum())
            }
            Shape::Sphere { radius } => Vector3::repeat(radius),
            Shape::Cylinder { radius, half_length } => {
                // axis column is the third one
                Vector3::from_fn(|i, _| {
                    let a = m[(i, 2)];
                    half_length * a.abs() + radius * (1.0 - a * a).max(0.0).sqrt()
                })
            }
            Shape::Capsule { radius, half_length } => Vector3::from_fn(|i, _| half_length * m[(i, 2)].abs() + radius),
        };
        Aabb {
            min: pose.position - extent,
            max: pose.position + extent,
        }
    }

    /// Volume in cubic meters.
    pub fn volume(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Shape::Box { half_extents } => 8.0 * half_extents.iter().product::<f64>(),
            Shape::Sphere { radius } => 4.0 / 3.0 * PI * radius.powi(3),
            Shape::Cylinder { radius, half_length } => PI * radius * radius * 2.0 * half_length,
            Shape::Capsule { radius, half_length } => {
                PI * radius * radius * 2.0 * half_length + 4.0 / 3.0 * PI * radius.powi(3)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb {
            min: self.min - Vector3::repeat(margin),
            max: self.max + Vector3::repeat(margin),
        }
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }
}
