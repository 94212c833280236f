//! Versioned planning scene with a change journal.
//!
//! Every mutation bumps the version by one and appends to a bounded journal.
//! `journal_since` folds the journal tail into a minimal per-object diff that
//! replicas apply to catch up.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::collision::{InvalidShape, Shape};
use crate::pose::Pose;
use crate::robot_model::{ModelError, RobotModel};
use crate::state::JointState;

pub const DEFAULT_JOURNAL_CAPACITY: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionObject {
    pub id: String,
    pub shape: Shape,
    pub pose: Pose,
    /// Scene version at which this object last changed.
    #[serde(default)]
    pub revision: u64,
}

impl CollisionObject {
    pub fn new(id: impl Into<String>, shape: Shape, pose: Pose) -> Self {
        Self {
            id: id.into(),
            shape,
            pose,
            revision: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("object id {0:?} already exists")]
    DuplicateId(String),
    #[error("no object with id {0:?}")]
    UnknownId(String),
    #[error("object id must be nonempty")]
    EmptyId,
    #[error(transparent)]
    InvalidShape(#[from] InvalidShape),
    #[error("version {requested} is no longer in the journal (oldest servable is {oldest})")]
    VersionEvicted { requested: u64, oldest: u64 },
    #[error("version {requested} is ahead of the scene (at {current})")]
    FutureVersion { requested: u64, current: u64 },
    #[error("diff starts at version {got} but replica is at {expected}")]
    VersionGap { expected: u64, got: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("scene file: {0}")]
    File(String),
}

/// One operation in a diff. Applying ops in order moves a replica forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SceneOp {
    Add { object: CollisionObject },
    SetPose { id: String, pose: Pose, revision: u64 },
    Remove { id: String },
}

impl SceneOp {
    pub fn id(&self) -> &str {
        match self {
            SceneOp::Add { object } => &object.id,
            SceneOp::SetPose { id, .. } | SceneOp::Remove { id } => id,
        }
    }
}

/// A client-proposed mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum SceneEdit {
    Add { object: CollisionObject },
    SetPose { id: String, pose: Pose },
    Resize { id: String, shape: Shape },
    Remove { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDiff {
    pub from_version: u64,
    pub to_version: u64,
    pub ops: Vec<SceneOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot_state: Option<JointState>,
}

impl SceneDiff {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty() && self.robot_state.is_none()
    }

    /// Distinct object ids referenced by the ops.
    pub fn touched_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.ops.iter().map(SceneOp::id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub version: u64,
    /// Sorted by id.
    pub objects: Vec<CollisionObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot_state: Option<JointState>,
}

#[derive(Debug, Clone, PartialEq)]
enum Entry {
    Op(SceneOp),
    RobotState,
}

#[derive(Debug, Clone)]
struct JournalEntry {
    version: u64,
    entry: Entry,
}

/// Result of `set_robot_state`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RobotStateUpdate {
    pub version: u64,
    /// The input was outside the joint limits and has been clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct PlanningScene {
    objects: BTreeMap<String, CollisionObject>,
    robot_state: Option<JointState>,
    version: u64,
    journal: VecDeque<JournalEntry>,
    capacity: usize,
    /// Highest version any of whose entries has been dropped from the journal.
    evicted_through: u64,
}

impl Default for PlanningScene {
    fn default() -> Self {
        Self::new()
    }
}

impl PlanningScene {
    pub fn new() -> Self {
        Self::with_journal_capacity(DEFAULT_JOURNAL_CAPACITY)
    }

    pub fn with_journal_capacity(capacity: usize) -> Self {
        Self {
            objects: BTreeMap::new(),
            robot_state: None,
            version: 0,
            journal: VecDeque::new(),
            capacity: capacity.max(2),
            evicted_through: 0,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn robot_state(&self) -> Option<&JointState> {
        self.robot_state.as_ref()
    }

    pub fn objects(&self) -> impl Iterator<Item = &CollisionObject> {
        self.objects.values()
    }

    pub fn object(&self, id: &str) -> Option<&CollisionObject> {
        self.objects.get(id)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Oldest version `journal_since` can still serve.
    pub fn oldest_servable(&self) -> u64 {
        self.evicted_through
    }

    fn record(&mut self, entry: Entry) {
        if self.journal.len() == self.capacity {
            if let Some(old) = self.journal.pop_front() {
                self.evicted_through = self.evicted_through.max(old.version);
            }
        }
        self.journal.push_back(JournalEntry {
            version: self.version,
            entry,
        });
    }

    pub fn add_object(&mut self, mut object: CollisionObject) -> Result<u64, SceneError> {
        if object.id.is_empty() {
            return Err(SceneError::EmptyId);
        }
        object.shape.validate()?;
        if self.objects.contains_key(&object.id) {
            return Err(SceneError::DuplicateId(object.id));
        }
        self.version += 1;
        object.revision = self.version;
        self.record(Entry::Op(SceneOp::Add { object: object.clone() }));
        self.objects.insert(object.id.clone(), object);
        Ok(self.version)
    }

    pub fn set_pose(&mut self, id: &str, pose: Pose) -> Result<u64, SceneError> {
        let version = self.version + 1;
        let obj = self
            .objects
            .get_mut(id)
            .ok_or_else(|| SceneError::UnknownId(id.to_string()))?;
        obj.pose = pose;
        obj.revision = version;
        self.version = version;
        self.record(Entry::Op(SceneOp::SetPose {
            id: id.to_string(),
            pose,
            revision: version,
        }));
        Ok(version)
    }

    /// Replaces the shape, journaled as a removal followed by an add.
    pub fn resize_object(&mut self, id: &str, shape: Shape) -> Result<u64, SceneError> {
        shape.validate()?;
        let mut obj = self
            .objects
            .remove(id)
            .ok_or_else(|| SceneError::UnknownId(id.to_string()))?;
        self.version += 1;
        obj.shape = shape;
        obj.revision = self.version;
        self.record(Entry::Op(SceneOp::Remove { id: id.to_string() }));
        self.record(Entry::Op(SceneOp::Add { object: obj.clone() }));
        self.objects.insert(id.to_string(), obj);
        Ok(self.version)
    }

    pub fn remove_object(&mut self, id: &str) -> Result<u64, SceneError> {
        if self.objects.remove(id).is_none() {
            return Err(SceneError::UnknownId(id.to_string()));
        }
        self.version += 1;
        self.record(Entry::Op(SceneOp::Remove { id: id.to_string() }));
        Ok(self.version)
    }

    pub fn apply_edit(&mut self, edit: &SceneEdit) -> Result<u64, SceneError> {
        match edit {
            SceneEdit::Add { object } => self.add_object(object.clone()),
            SceneEdit::SetPose { id, pose } => self.set_pose(id, *pose),
            SceneEdit::Resize { id, shape } => self.resize_object(id, *shape),
            SceneEdit::Remove { id } => self.remove_object(id),
        }
    }

    /// Stores `q` after clamping it into the model's limits.
    pub fn set_robot_state(&mut self, model: &RobotModel, q: &JointState) -> Result<RobotStateUpdate, SceneError> {
        let clamped = model.clamp_to_limits(q)?;
        let was_clamped = !model.within_limits(q)?;
        Ok(RobotStateUpdate {
            version: self.replace_robot_state(clamped),
            clamped: was_clamped,
        })
    }

    /// Stores `q` without validation.
    pub fn replace_robot_state(&mut self, q: JointState) -> u64 {
        self.version += 1;
        self.robot_state = Some(q);
        self.record(Entry::RobotState);
        self.version
    }

    pub fn snapshot(&self) -> SceneSnapshot {
        SceneSnapshot {
            version: self.version,
            objects: self.objects.values().cloned().collect(),
            robot_state: self.robot_state.clone(),
        }
    }

    /// Net change from version `v` to now, at most one op per object except
    /// `[Remove, Add]` when the object was removed and recreated in between.
    pub fn journal_since(&self, v: u64) -> Result<SceneDiff, SceneError> {
        if v > self.version {
            return Err(SceneError::FutureVersion {
                requested: v,
                current: self.version,
            });
        }
        if v < self.evicted_through {
            return Err(SceneError::VersionEvicted {
                requested: v,
                oldest: self.evicted_through,
            });
        }
        struct Touch {
            existed_before: bool,
            removed: bool,
        }
        let mut touched: BTreeMap<&str, Touch> = BTreeMap::new();
        let mut robot_changed = false;
        let start = self.journal.partition_point(|e| e.version <= v);
        for e in self.journal.range(start..) {
            match &e.entry {
                Entry::RobotState => robot_changed = true,
                Entry::Op(op) => {
                    let t = touched.entry(op.id()).or_insert_with(|| Touch {
                        existed_before: !matches!(op, SceneOp::Add { .. }),
                        removed: false,
                    });
                    if matches!(op, SceneOp::Remove { .. }) {
                        t.removed = true;
                    }
                }
            }
        }
        let mut ops = Vec::new();
        for (id, t) in touched {
            match (t.existed_before, self.objects.get(id)) {
                (false, None) => {}
                (false, Some(obj)) => ops.push(SceneOp::Add { object: obj.clone() }),
                (true, None) => ops.push(SceneOp::Remove { id: id.to_string() }),
                (true, Some(obj)) if t.removed => {
                    ops.push(SceneOp::Remove { id: id.to_string() });
                    ops.push(SceneOp::Add { object: obj.clone() });
                }
                (true, Some(obj)) => ops.push(SceneOp::SetPose {
                    id: id.to_string(),
                    pose: obj.pose,
                    revision: obj.revision,
                }),
            }
        }
        Ok(SceneDiff {
            from_version: v,
            to_version: self.version,
            ops,
            robot_state: if robot_changed { self.robot_state.clone() } else { None },
        })
    }

    /// Uncoalesced journal ops after version `v`, oldest first.
    pub fn raw_journal_since(&self, v: u64) -> Vec<SceneOp> {
        let start = self.journal.partition_point(|e| e.version <= v);
        self.journal
            .range(start..)
            .filter_map(|e| match &e.entry {
                Entry::Op(op) => Some(op.clone()),
                Entry::RobotState => None,
            })
            .collect()
    }

    /// Builds a scene from a scene file; each object counts as one mutation.
    pub fn from_file(file: &SceneFile) -> Result<Self, SceneError> {
        let mut scene = Self::new();
        for o in &file.objects {
            scene.add_object(CollisionObject::new(o.id.clone(), o.shape, o.pose))?;
        }
        if let Some(q) = &file.robot_state {
            scene.replace_robot_state(q.clone());
        }
        Ok(scene)
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            objects: self
                .objects
                .values()
                .map(|o| SceneFileObject {
                    id: o.id.clone(),
                    shape: o.shape,
                    pose: o.pose,
                })
                .collect(),
            robot_state: self.robot_state.clone(),
        }
    }
}

/// Client-side copy of a scene kept current from snapshots and diffs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneReplica {
    version: u64,
    objects: BTreeMap<String, CollisionObject>,
    robot_state: Option<JointState>,
}

impl SceneReplica {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_snapshot(snapshot: &SceneSnapshot) -> Self {
        let mut r = Self::new();
        r.apply_snapshot(snapshot);
        r
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn robot_state(&self) -> Option<&JointState> {
        self.robot_state.as_ref()
    }

    pub fn object(&self, id: &str) -> Option<&CollisionObject> {
        self.objects.get(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = &CollisionObject> {
        self.objects.values()
    }

    pub fn apply_snapshot(&mut self, snapshot: &SceneSnapshot) {
        self.version = snapshot.version;
        self.objects = snapshot.objects.iter().map(|o| (o.id.clone(), o.clone())).collect();
        self.robot_state = snapshot.robot_state.clone();
    }

    /// Applies a diff that starts exactly at this replica's version. On error
    /// the replica is left unchanged.
    pub fn apply_diff(&mut self, diff: &SceneDiff) -> Result<(), SceneError> {
        if diff.from_version != self.version {
            return Err(SceneError::VersionGap {
                expected: self.version,
                got: diff.from_version,
            });
        }
        let mut objects = self.objects.clone();
        for op in &diff.ops {
            match op {
                SceneOp::Add { object } => {
                    if objects.contains_key(&object.id) {
                        return Err(SceneError::DuplicateId(object.id.clone()));
                    }
                    objects.insert(object.id.clone(), object.clone());
                }
                SceneOp::SetPose { id, pose, revision } => {
                    let obj = objects.get_mut(id).ok_or_else(|| SceneError::UnknownId(id.clone()))?;
                    obj.pose = *pose;
                    obj.revision = *revision;
                }
                SceneOp::Remove { id } => {
                    objects.remove(id).ok_or_else(|| SceneError::UnknownId(id.clone()))?;
                }
            }
        }
        self.objects = objects;
        if let Some(q) = &diff.robot_state {
            self.robot_state = Some(q.clone());
        }
        self.version = diff.to_version;
        Ok(())
    }

    pub fn snapshot(&self) -> SceneSnapshot {
        SceneSnapshot {
            version: self.version,
            objects: self.objects.values().cloned().collect(),
            robot_state: self.robot_state.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFileObject {
    pub id: String,
    pub shape: Shape,
    pub pose: Pose,
}

/// On-disk scene document. Carries no version.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(default)]
    pub objects: Vec<SceneFileObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot_state: Option<JointState>,
}

/// A problem found by [`SceneFile::violations`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub object: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.object, self.message)
    }
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::File(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene file serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::File(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            let name = if o.id.is_empty() {
                format!("objects[{i}]")
            } else {
                o.id.clone()
            };
            if o.id.is_empty() {
                out.push(Violation {
                    object: name.clone(),
                    message: "empty id".into(),
                });
            } else if !seen.insert(o.id.as_str()) {
                out.push(Violation {
                    object: name.clone(),
                    message: "duplicate id".into(),
                });
            }
            if let Err(e) = o.shape.validate() {
                out.push(Violation {
                    object: name,
                    message: e.0,
                });
            }
        }
        out
    }
}
