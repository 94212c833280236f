use serde::{Deserialize, Serialize};

/// Positions of a group's actuated joints, in chain order. Radians for
/// revolute and continuous joints, meters for prismatic ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub group: String,
    pub positions: Vec<f64>,
}

impl JointState {
    pub fn new(group: impl Into<String>, positions: Vec<f64>) -> Self {
        Self {
            group: group.into(),
            positions,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}
