//! Joint-space metric, interpolation and sampling for one group.
//!
//! Continuous joints are measured and interpolated along the shortest arc.

use rand::Rng;

use crate::pose::wrap_angle;
use crate::robot_model::{JointKind, ModelError, RobotModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSpec {
    pub continuous: bool,
    pub lower: f64,
    pub upper: f64,
    pub max_velocity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpace {
    group: String,
    joints: Vec<JointSpec>,
}

impl JointSpace {
    pub fn new(group: impl Into<String>, joints: Vec<JointSpec>) -> Self {
        Self {
            group: group.into(),
            joints,
        }
    }

    pub fn for_group(model: &RobotModel, group: &str) -> Result<Self, ModelError> {
        let g = model.group(group)?;
        let joints = g
            .actuated
            .iter()
            .map(|&j| {
                let joint = model.joint(j);
                let (lower, upper) = joint.bounds();
                JointSpec {
                    continuous: joint.kind == JointKind::Continuous,
                    lower,
                    upper,
                    max_velocity: joint.max_velocity(),
                }
            })
            .collect();
        Ok(Self::new(group, joints))
    }

    pub fn group(&self) -> &str {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    /// Per-joint displacement from `a` to `b`.
    pub fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.joints
            .iter()
            .zip(a.iter().zip(b))
            .map(|(spec, (x, y))| if spec.continuous { wrap_angle(y - x) } else { y - x })
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.difference(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Largest per-joint displacement between `a` and `b`.
    pub fn max_joint_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.difference(a, b).iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// State at fraction `t` of the way from `a` to `b`. `t == 1` returns
    /// `b` exactly.
    pub fn interpolate(&self, a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
        if t >= 1.0 {
            return b.to_vec();
        }
        if t <= 0.0 {
            return a.to_vec();
        }
        self.joints
            .iter()
            .zip(a.iter().zip(b))
            .map(|(spec, (&x, &y))| {
                if spec.continuous {
                    wrap_angle(x + t * wrap_angle(y - x))
                } else {
                    x + t * (y - x)
                }
            })
            .collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.joints.len()
            && self.joints.iter().zip(q).all(|(spec, &v)| {
                if spec.continuous {
                    v.is_finite()
                } else {
                    v >= spec.lower && v <= spec.upper
                }
            })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.joints
            .iter()
            .map(|spec| {
                if spec.upper > spec.lower {
                    rng.random_range(spec.lower..spec.upper)
                } else {
                    spec.lower
                }
            })
            .collect()
    }

    /// Moves from `from` toward `to` by at most `step` (joint-space metric).
    pub fn steer(&self, from: &[f64], to: &[f64], step: f64) -> Vec<f64> {
        let d = self.distance(from, to);
        if d <= step {
            to.to_vec()
        } else {
            self.interpolate(from, to, step / d)
        }
    }
}
