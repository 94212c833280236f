//! Rest-to-rest trapezoidal timing along piecewise-linear joint paths.
//!
//! Each path segment is traversed with a normalized profile `s(t)` from 0 to
//! 1, so all joints start and stop together. The slowest joint's velocity and
//! acceleration limits set the profile. Stored points sit at waypoints and at
//! the profile's phase changes; cubic Hermite interpolation between them
//! reproduces the profile exactly.

use serde::{Deserialize, Serialize};

use crate::pose::wrap_angle;
use crate::robot_model::{ModelError, RobotModel};
use crate::space::JointSpace;

/// Used for every joint, rad/s² (or m/s²).
pub const DEFAULT_MAX_ACCELERATION: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time_from_start: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub group: String,
    /// Joints whose positions wrap at ±π.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub continuous: Vec<usize>,
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimeParamError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("joint {0} has no velocity limit")]
    MissingVelocityLimit(usize),
    #[error("path is empty")]
    EmptyPath,
    #[error("waypoint {index} has {got} positions, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.time_from_start)
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.positions.len())
    }

    fn delta(&self, j: usize, a: f64, b: f64) -> f64 {
        if self.continuous.contains(&j) {
            wrap_angle(b - a)
        } else {
            b - a
        }
    }

    /// Positions and velocities at time `t`, clamped to `[0, duration]`.
    pub fn sample(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let pts = &self.points;
        let Some(last) = pts.last() else {
            return (Vec::new(), Vec::new());
        };
        if t >= last.time_from_start {
            return (last.positions.clone(), last.velocities.clone());
        }
        if t <= 0.0 {
            return (pts[0].positions.clone(), pts[0].velocities.clone());
        }
        let k = pts.partition_point(|p| p.time_from_start <= t) - 1;
        let (a, b) = (&pts[k], &pts[k + 1]);
        let h = b.time_from_start - a.time_from_start;
        let u = (t - a.time_from_start) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = -6.0 * u2 + 6.0 * u;
        let d11 = 3.0 * u2 - 2.0 * u;
        let mut pos = Vec::with_capacity(a.positions.len());
        let mut vel = Vec::with_capacity(a.positions.len());
        for j in 0..a.positions.len() {
            let dp = self.delta(j, a.positions[j], b.positions[j]);
            let (va, vb) = (a.velocities[j] * h, b.velocities[j] * h);
            let p = a.positions[j] + h10 * va + h01 * dp + h11 * vb;
            pos.push(if self.continuous.contains(&j) { wrap_angle(p) } else { p });
            vel.push((d10 * va + d01 * dp + d11 * vb) / h);
        }
        (pos, vel)
    }

    /// Indices of points where every velocity is zero.
    pub fn rest_points(&self) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.velocities.iter().all(|&v| v == 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Segment timing for normalized distance 1 with peak rate `sd` and
/// acceleration `sdd`: `(t_accel, t_cruise, peak_rate)`.
pub fn trapezoid(sd: f64, sdd: f64) -> (f64, f64, f64) {
    if sd * sd / sdd >= 1.0 {
        let t_acc = (1.0 / sdd).sqrt();
        (t_acc, 0.0, sdd * t_acc)
    } else {
        let t_acc = sd / sdd;
        let d_acc = 0.5 * sd * t_acc;
        (t_acc, (1.0 - 2.0 * d_acc) / sd, sd)
    }
}

pub fn time_parameterize_space(
    space: &JointSpace,
    path: &[Vec<f64>],
    max_acceleration: f64,
) -> Result<Trajectory, TimeParamError> {
    let first = path.first().ok_or(TimeParamError::EmptyPath)?;
    let n = space.dim();
    for (index, q) in path.iter().enumerate() {
        if q.len() != n {
            return Err(TimeParamError::DimensionMismatch {
                index,
                expected: n,
                got: q.len(),
            });
        }
    }
    let vmax: Vec<f64> = space
        .joints()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            s.max_velocity
                .filter(|v| *v > 0.0)
                .ok_or(TimeParamError::MissingVelocityLimit(j))
        })
        .collect::<Result<_, _>>()?;
    let continuous = space
        .joints()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.continuous)
        .map(|(j, _)| j)
        .collect();

    let zero = vec![0.0; n];
    let mut points = vec![TrajectoryPoint {
        time_from_start: 0.0,
        positions: first.clone(),
        velocities: zero.clone(),
    }];
    let mut t = 0.0;
    for w in path.windows(2) {
        let delta = space.difference(&w[0], &w[1]);
        let mut sd = f64::INFINITY;
        let mut sdd = f64::INFINITY;
        for (d, v) in delta.iter().zip(&vmax) {
            if *d != 0.0 {
                sd = sd.min(v / d.abs());
                sdd = sdd.min(max_acceleration / d.abs());
            }
        }
        if !sd.is_finite() {
            continue;
        }
        let (t_acc, t_cruise, peak) = trapezoid(sd, sdd);
        let vel: Vec<f64> = delta.iter().map(|d| d * peak).collect();
        let at = |s: f64| space.interpolate(&w[0], &w[1], s);
        let s_acc = 0.5 * peak * t_acc;
        points.push(TrajectoryPoint {
            time_from_start: t + t_acc,
            positions: at(s_acc),
            velocities: vel.clone(),
        });
        if t_cruise > 0.0 {
            points.push(TrajectoryPoint {
                time_from_start: t + t_acc + t_cruise,
                positions: at(1.0 - s_acc),
                velocities: vel,
            });
        }
        t += 2.0 * t_acc + t_cruise;
        points.push(TrajectoryPoint {
            time_from_start: t,
            positions: w[1].clone(),
            velocities: zero.clone(),
        });
    }
    Ok(Trajectory {
        group: space.group().to_string(),
        continuous,
        points,
    })
}

/// Times `path` for `group` using the model's velocity limits and
/// [`DEFAULT_MAX_ACCELERATION`].
pub fn time_parameterize(model: &RobotModel, group: &str, path: &[Vec<f64>]) -> Result<Trajectory, TimeParamError> {
    let space = JointSpace::for_group(model, group)?;
    time_parameterize_space(&space, path, DEFAULT_MAX_ACCELERATION)
}
