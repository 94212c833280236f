//! Kinematic tree of a robot: links with collision geometry, joints with
//! types and limits, and named joint chains ("groups").

mod mesh;
mod urdf;

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::collision::Shape;
use crate::pose::{wrap_angle, Pose};
use crate::state::JointState;

pub use urdf::{parse_urdf, parse_urdf_with, ParseOptions};

/// Name of the group synthesized when a description defines none.
pub const DEFAULT_GROUP: &str = "default";

const AXIS_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("kinematic tree violation: {0}")]
    KinematicLoop(String),
    #[error("joint '{0}' requires a <limit> with lower, upper and velocity")]
    MissingLimit(String),
    #[error("joint '{joint}' references undefined link '{link}'")]
    DanglingReference { joint: String, link: String },
    #[error("invalid joint '{joint}': {reason}")]
    InvalidJoint { joint: String, reason: String },
    #[error("invalid geometry on link '{link}': {reason}")]
    InvalidGeometry { link: String, reason: String },
    #[error("invalid group '{group}': {reason}")]
    InvalidGroup { group: String, reason: String },
    #[error("duplicate {kind} name '{name}'")]
    DuplicateName { kind: &'static str, name: String },
    #[error("unknown group '{0}'")]
    UnknownGroup(String),
    #[error("expected {expected} joint positions, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Continuous,
    Fixed,
}

impl JointKind {
    pub fn is_actuated(self) -> bool {
        self != JointKind::Fixed
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
            JointKind::Continuous => "continuous",
            JointKind::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    /// Absent for continuous joints.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub max_velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Unit axis in the joint frame.
    pub axis: Vector3<f64>,
    /// Fixed transform from the parent link frame to the joint frame.
    pub origin: Pose,
    /// `None` only for fixed joints.
    pub limits: Option<JointLimits>,
}

impl Joint {
    /// Position interval; continuous joints report `(-pi, pi]`.
    pub fn bounds(&self) -> (f64, f64) {
        match (self.kind, self.limits) {
            (JointKind::Continuous, _) => (-PI, PI),
            (
                _,
                Some(JointLimits {
                    lower: Some(lo),
                    upper: Some(hi),
                    ..
                }),
            ) => (lo, hi),
            _ => (0.0, 0.0),
        }
    }

    pub fn max_velocity(&self) -> Option<f64> {
        self.limits.map(|l| l.max_velocity)
    }

    pub fn clamp(&self, value: f64) -> f64 {
        match self.kind {
            JointKind::Continuous => wrap_angle(value),
            JointKind::Fixed => 0.0,
            _ => {
                let (lo, hi) = self.bounds();
                value.clamp(lo, hi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionGeometry {
    pub shape: Shape,
    /// Offset of the shape in the link frame.
    pub origin: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub name: String,
    pub collision: Vec<CollisionGeometry>,
}

/// Requested chain before it is resolved against the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub base_link: String,
    pub tip_link: String,
    /// End-effector point relative to the tip link frame.
    pub tip_offset: Pose,
}

/// A resolved chain from `base_link` to `tip_link`.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub base_link: String,
    pub tip_link: String,
    pub tip_offset: Pose,
    /// Every joint on the chain in base→tip order, fixed ones included.
    pub chain: Vec<usize>,
    /// Indices (into the model's joint list) of the actuated chain joints.
    pub actuated: Vec<usize>,
}

impl Group {
    pub fn dof(&self) -> usize {
        self.actuated.len()
    }
}

/// Non-fatal parse note, e.g. a mesh replaced by its bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub link: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    name: String,
    links: Vec<Link>,
    joints: Vec<Joint>,
    root_link: String,
    groups: Vec<Group>,
    warnings: Vec<ParseWarning>,
    link_index: HashMap<String, usize>,
    /// Parent joint of each link (by link index); `None` for the root.
    parent_joint: Vec<Option<usize>>,
    /// Joint indices in an order where every parent precedes its children.
    topo_joints: Vec<usize>,
}

impl RobotModel {
    /// Validates the tree and resolves groups. When `groups` is empty a
    /// [`DEFAULT_GROUP`] spanning root to the deepest leaf is synthesized.
    pub fn new(
        name: impl Into<String>,
        links: Vec<Link>,
        joints: Vec<Joint>,
        groups: Vec<GroupSpec>,
    ) -> Result<Self, ModelError> {
        let mut link_index = HashMap::new();
        for (i, link) in links.iter().enumerate() {
            if link_index.insert(link.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateName {
                    kind: "link",
                    name: link.name.clone(),
                });
            }
            for geom in &link.collision {
                geom.shape.validate().map_err(|e| ModelError::InvalidGeometry {
                    link: link.name.clone(),
                    reason: e.0,
                })?;
            }
        }
        let mut joint_names = HashMap::new();
        for (i, joint) in joints.iter().enumerate() {
            if joint_names.insert(joint.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateName {
                    kind: "joint",
                    name: joint.name.clone(),
                });
            }
            validate_joint(joint)?;
        }

        let mut parent_joint = vec![None; links.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, joint) in joints.iter().enumerate() {
            let parent = *link_index
                .get(&joint.parent)
                .ok_or_else(|| ModelError::DanglingReference {
                    joint: joint.name.clone(),
                    link: joint.parent.clone(),
                })?;
            let child = *link_index
                .get(&joint.child)
                .ok_or_else(|| ModelError::DanglingReference {
                    joint: joint.name.clone(),
                    link: joint.child.clone(),
                })?;
            if parent_joint[child].is_some() {
                return Err(ModelError::KinematicLoop(format!(
                    "link '{}' has more than one parent joint",
                    joint.child
                )));
            }
            parent_joint[child] = Some(ji);
            children[parent].push(ji);
        }

        let roots: Vec<usize> = (0..links.len()).filter(|&i| parent_joint[i].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => {
                return Err(ModelError::KinematicLoop(
                    "no root link: every link has a parent".into(),
                ))
            }
            _ => {
                let names: Vec<&str> = roots.iter().map(|&i| links[i].name.as_str()).collect();
                return Err(ModelError::KinematicLoop(format!(
                    "links are not connected into one tree; candidate roots: {}",
                    names.join(", ")
                )));
            }
        };

        // Breadth-first from the root; unreachable links sit on a cycle.
        let mut topo_joints = Vec::with_capacity(joints.len());
        let mut reached = vec![false; links.len()];
        reached[root] = true;
        let mut frontier = vec![root];
        while let Some(l) = frontier.pop() {
            for &ji in &children[l] {
                let c = link_index[&joints[ji].child];
                if reached[c] {
                    return Err(ModelError::KinematicLoop(format!(
                        "link '{}' reached twice",
                        links[c].name
                    )));
                }
                reached[c] = true;
                topo_joints.push(ji);
                frontier.push(c);
            }
        }
        if let Some(orphan) = reached.iter().position(|r| !r) {
            return Err(ModelError::KinematicLoop(format!(
                "link '{}' is part of a cycle",
                links[orphan].name
            )));
        }

        let mut model = RobotModel {
            name: name.into(),
            root_link: links[root].name.clone(),
            links,
            joints,
            groups: Vec::new(),
            warnings: Vec::new(),
            link_index,
            parent_joint,
            topo_joints,
        };

        let specs = if groups.is_empty() {
            vec![model.default_group_spec()]
        } else {
            groups
        };
        for spec in specs {
            model.add_group(spec)?;
        }
        Ok(model)
    }

    /// Adds (or replaces) a group.
    pub fn add_group(&mut self, spec: GroupSpec) -> Result<(), ModelError> {
        let group = self.resolve_group(spec)?;
        self.groups.retain(|g| g.name != group.name);
        self.groups.push(group);
        Ok(())
    }

    pub fn with_group(mut self, spec: GroupSpec) -> Result<Self, ModelError> {
        self.add_group(spec)?;
        Ok(self)
    }

    fn default_group_spec(&self) -> GroupSpec {
        // Deepest leaf; ties go to the earliest declared link.
        let mut best = (0usize, self.link_index[&self.root_link]);
        for (i, _) in self.links.iter().enumerate() {
            let depth = self.depth(i);
            if depth > best.0 {
                best = (depth, i);
            }
        }
        GroupSpec {
            name: DEFAULT_GROUP.to_string(),
            base_link: self.root_link.clone(),
            tip_link: self.links[best.1].name.clone(),
            tip_offset: Pose::identity(),
        }
    }

    fn depth(&self, mut link: usize) -> usize {
        let mut d = 0;
        while let Some(j) = self.parent_joint[link] {
            d += 1;
            link = self.link_index[&self.joints[j].parent];
        }
        d
    }

    fn resolve_group(&self, spec: GroupSpec) -> Result<Group, ModelError> {
        let invalid = |reason: String| ModelError::InvalidGroup {
            group: spec.name.clone(),
            reason,
        };
        let base = *self
            .link_index
            .get(&spec.base_link)
            .ok_or_else(|| invalid(format!("unknown base link '{}'", spec.base_link)))?;
        let mut link = *self
            .link_index
            .get(&spec.tip_link)
            .ok_or_else(|| invalid(format!("unknown tip link '{}'", spec.tip_link)))?;
        let mut chain = Vec::new();
        while link != base {
            let j = self.parent_joint[link].ok_or_else(|| {
                invalid(format!(
                    "'{}' is not an ancestor of '{}'",
                    spec.base_link, spec.tip_link
                ))
            })?;
            chain.push(j);
            link = self.link_index[&self.joints[j].parent];
        }
        chain.reverse();
        let actuated = chain
            .iter()
            .copied()
            .filter(|&j| self.joints[j].kind.is_actuated())
            .collect();
        Ok(Group {
            name: spec.name,
            base_link: spec.base_link,
            tip_link: spec.tip_link,
            tip_offset: spec.tip_offset,
            chain,
            actuated,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn root_link(&self) -> &str {
        &self.root_link
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn warnings(&self) -> &[ParseWarning] {
        &self.warnings
    }

    pub(crate) fn push_warning(&mut self, warning: ParseWarning) {
        self.warnings.push(warning);
    }

    pub fn group(&self, name: &str) -> Result<&Group, ModelError> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| ModelError::UnknownGroup(name.to_string()))
    }

    /// The first group, used when a caller does not name one.
    pub fn primary_group(&self) -> &Group {
        self.groups
            .iter()
            .find(|g| g.name == DEFAULT_GROUP)
            .unwrap_or(&self.groups[0])
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.link_index.get(name).copied()
    }

    pub fn joint(&self, index: usize) -> &Joint {
        &self.joints[index]
    }

    /// Parent joint of a link, by link index.
    pub fn parent_joint_of(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    /// Joints ordered so parents come before children.
    pub fn joints_topological(&self) -> impl Iterator<Item = &Joint> {
        self.topo_joints.iter().map(move |&j| &self.joints[j])
    }

    pub(crate) fn topo_joint_indices(&self) -> &[usize] {
        &self.topo_joints
    }

    /// Two links are adjacent when a single actuated joint separates them,
    /// treating links welded by fixed joints as one body.
    pub fn links_adjacent(&self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.body_of(a), self.body_of(b));
        if ra == rb {
            return true;
        }
        let parent_body =
            |body: usize| self.parent_joint[body].map(|j| self.body_of(self.link_index[&self.joints[j].parent]));
        parent_body(ra) == Some(rb) || parent_body(rb) == Some(ra)
    }

    /// The top-most link reachable from `link` through fixed joints only.
    fn body_of(&self, mut link: usize) -> usize {
        while let Some(j) = self.parent_joint[link] {
            if self.joints[j].kind != JointKind::Fixed {
                break;
            }
            link = self.link_index[&self.joints[j].parent];
        }
        link
    }

    /// Actuated joints of `group` in base→tip order.
    pub fn joint_chain(&self, group: &str) -> Result<Vec<&Joint>, ModelError> {
        let g = self.group(group)?;
        Ok(g.actuated.iter().map(|&j| &self.joints[j]).collect())
    }

    pub fn check_dimension(&self, group: &Group, q: &JointState) -> Result<(), ModelError> {
        if q.positions.len() != group.dof() {
            return Err(ModelError::DimensionMismatch {
                expected: group.dof(),
                actual: q.positions.len(),
            });
        }
        Ok(())
    }

    /// Clamps each coordinate into its joint interval; continuous joints are
    /// wrapped into `(-pi, pi]`.
    pub fn clamp_to_limits(&self, q: &JointState) -> Result<JointState, ModelError> {
        let group = self.group(&q.group)?;
        self.check_dimension(group, q)?;
        let positions = group
            .actuated
            .iter()
            .zip(&q.positions)
            .map(|(&j, &v)| self.joints[j].clamp(v))
            .collect();
        Ok(JointState::new(q.group.clone(), positions))
    }

    /// Whether every coordinate lies within its joint interval.
    pub fn within_limits(&self, q: &JointState) -> Result<bool, ModelError> {
        let group = self.group(&q.group)?;
        self.check_dimension(group, q)?;
        Ok(group.actuated.iter().zip(&q.positions).all(|(&j, &v)| {
            let joint = &self.joints[j];
            match joint.kind {
                JointKind::Continuous => v.is_finite(),
                _ => {
                    let (lo, hi) = joint.bounds();
                    v >= lo && v <= hi
                }
            }
        }))
    }

    /// A state with every actuated joint at zero (clamped into limits).
    pub fn zero_state(&self, group: &str) -> Result<JointState, ModelError> {
        let g = self.group(group)?;
        let positions = g.actuated.iter().map(|&j| self.joints[j].clamp(0.0)).collect();
        Ok(JointState::new(group, positions))
    }

    /// Serializes the kinematic tree (links, collision geometry, joints and
    /// groups) back to URDF.
    pub fn to_urdf(&self) -> String {
        urdf::write_urdf(self)
    }
}

fn validate_joint(joint: &Joint) -> Result<(), ModelError> {
    let invalid = |reason: String| ModelError::InvalidJoint {
        joint: joint.name.clone(),
        reason,
    };
    if joint.kind == JointKind::Fixed {
        return Ok(());
    }
    if (joint.axis.norm() - 1.0).abs() > AXIS_NORM_TOLERANCE {
        return Err(invalid(format!("axis {:?} is not unit length", joint.axis)));
    }
    let limits = joint
        .limits
        .ok_or_else(|| ModelError::MissingLimit(joint.name.clone()))?;
    if !(limits.max_velocity.is_finite() && limits.max_velocity > 0.0) {
        return Err(invalid(format!(
            "max velocity must be positive, got {}",
            limits.max_velocity
        )));
    }
    match (joint.kind, limits.lower, limits.upper) {
        (JointKind::Continuous, _, _) => Ok(()),
        (_, Some(lo), Some(hi)) if lo.is_finite() && hi.is_finite() => {
            if lo <= hi {
                Ok(())
            } else {
                Err(invalid(format!("lower limit {lo} exceeds upper limit {hi}")))
            }
        }
        (_, Some(_), Some(_)) => Err(invalid("non-finite limits".into())),
        _ => Err(ModelError::MissingLimit(joint.name.clone())),
    }
}
