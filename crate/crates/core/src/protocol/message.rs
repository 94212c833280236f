use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::kinematics::IkParams;
use crate::planning::{MotionPlanRequest, MotionPlanResponse, Trajectory};
use crate::pose::Pose;
use crate::scene::{SceneDiff, SceneEdit, SceneSnapshot};
use crate::state::JointState;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub client_name: String,
    pub protocol_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planners {
    pub planner_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResponse {
    /// Handle for `execute_request`; present when a trajectory was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_id: Option<u64>,
    #[serde(flatten)]
    pub response: MotionPlanResponse,
}

/// Either a trajectory id from an earlier `plan_response` or an inline
/// trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecuteRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub playback_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecutionState {
    Accepted,
    Executing { progress: f64 },
    Done,
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecuteStatus {
    pub execution_id: u64,
    #[serde(flatten)]
    pub state: ExecutionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSet {
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorStatus {
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkRequest {
    /// Target for the group's tip link, in the model root frame.
    pub target: Pose,
    /// Defaults to the scene's robot state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<JointState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<IkParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IkStatus {
    Converged,
    NoConvergence,
    /// Target lies beyond the chain's reach; nothing was attempted.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkResponse {
    pub status: IkStatus,
    /// The solution, or the best state found when not converged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<JointState>,
    pub position_residual: f64,
    pub orientation_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// First message was not a hello.
    HelloRequired,
    UnsupportedVersion,
    UnknownType,
    InvalidBody,
    MalformedJson,
    FrameTooLong,
    /// Scene edit rejected: duplicate or unknown id, bad shape.
    SceneRejected,
    InvalidRobotState,
    UnknownPlanner,
    InvalidRequest,
    UnknownTrajectory,
    Busy,
    /// Robot state input ignored while mirroring.
    MirrorActive,
    NotExecuting,
    Overloaded,
    ShuttingDown,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Id of the request that caused the error, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub code: ErrorCode,
    pub human_text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Empty {}

/// Every message body, keyed by its wire `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum Message {
    Hello(Hello),
    SnapshotRequest(Empty),
    Snapshot(SceneSnapshot),
    SceneOp(SceneEdit),
    SceneDiff(SceneDiff),
    RobotState(JointState),
    PlannersRequest(Empty),
    Planners(Planners),
    PlanRequest(MotionPlanRequest),
    PlanResponse(PlanResponse),
    ExecuteRequest(ExecuteRequest),
    ExecuteStatus(ExecuteStatus),
    ExecuteStop(Empty),
    MirrorSet(MirrorSet),
    MirrorStatus(MirrorStatus),
    IkRequest(IkRequest),
    IkResponse(IkResponse),
    Error(ErrorBody),
}

pub const MESSAGE_TYPES: [&str; 18] = [
    "hello",
    "snapshot_request",
    "snapshot",
    "scene_op",
    "scene_diff",
    "robot_state",
    "planners_request",
    "planners",
    "plan_request",
    "plan_response",
    "execute_request",
    "execute_status",
    "execute_stop",
    "mirror_set",
    "mirror_status",
    "ik_request",
    "ik_response",
    "error",
];

impl Message {
    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello(_) => "hello",
            Message::SnapshotRequest(_) => "snapshot_request",
            Message::Snapshot(_) => "snapshot",
            Message::SceneOp(_) => "scene_op",
            Message::SceneDiff(_) => "scene_diff",
            Message::RobotState(_) => "robot_state",
            Message::PlannersRequest(_) => "planners_request",
            Message::Planners(_) => "planners",
            Message::PlanRequest(_) => "plan_request",
            Message::PlanResponse(_) => "plan_response",
            Message::ExecuteRequest(_) => "execute_request",
            Message::ExecuteStatus(_) => "execute_status",
            Message::ExecuteStop(_) => "execute_stop",
            Message::MirrorSet(_) => "mirror_set",
            Message::MirrorStatus(_) => "mirror_status",
            Message::IkRequest(_) => "ik_request",
            Message::IkResponse(_) => "ik_response",
            Message::Error(_) => "error",
        }
    }

    pub fn error(code: ErrorCode, id: Option<u64>, human_text: impl Into<String>) -> Self {
        Message::Error(ErrorBody {
            id,
            code,
            human_text: human_text.into(),
        })
    }
}

/// A message plus its optional correlation id.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub id: Option<u64>,
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("frame of {len} bytes exceeds the {max} byte limit")]
    FrameTooLong { len: usize, max: usize },
    #[error("malformed message: {0}")]
    MalformedJson(String),
    #[error("unknown message type {type_name:?}")]
    UnknownType { type_name: String, id: Option<u64> },
    #[error("invalid {type_name} body: {reason}")]
    InvalidBody {
        type_name: String,
        id: Option<u64>,
        reason: String,
    },
}

impl DecodeError {
    /// Whether the connection must be closed.
    pub fn is_fatal(&self) -> bool {
        matches!(self, DecodeError::FrameTooLong { .. } | DecodeError::MalformedJson(_))
    }

    /// Correlation id of the offending message, when it could be read.
    pub fn id(&self) -> Option<u64> {
        match self {
            DecodeError::UnknownType { id, .. } | DecodeError::InvalidBody { id, .. } => *id,
            _ => None,
        }
    }

    pub fn code(&self) -> ErrorCode {
        match self {
            DecodeError::FrameTooLong { .. } => ErrorCode::FrameTooLong,
            DecodeError::MalformedJson(_) => ErrorCode::MalformedJson,
            DecodeError::UnknownType { .. } => ErrorCode::UnknownType,
            DecodeError::InvalidBody { .. } => ErrorCode::InvalidBody,
        }
    }

    pub fn to_message(&self) -> Message {
        Message::error(self.code(), self.id(), self.to_string())
    }
}

impl Envelope {
    pub fn new(message: Message) -> Self {
        Self { id: None, message }
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = Some(id);
        self
    }

    /// Reply carrying the same correlation id as `self`.
    pub fn reply(&self, message: Message) -> Envelope {
        Envelope { id: self.id, message }
    }

    /// Serializes as `{"type", "id"?, "body"}` in that order.
    pub fn to_json(&self) -> String {
        let tagged = serde_json::to_value(&self.message).expect("messages serialize");
        let Value::Object(mut tagged) = tagged else {
            unreachable!("adjacently tagged enums serialize as objects")
        };
        let mut out = Map::new();
        out.insert("type".into(), tagged.remove("type").expect("type tag"));
        if let Some(id) = self.id {
            out.insert("id".into(), id.into());
        }
        out.insert(
            "body".into(),
            tagged.remove("body").unwrap_or_else(|| Value::Object(Map::new())),
        );
        serde_json::to_string(&Value::Object(out)).expect("values serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DecodeError> {
        decode_message(text.as_bytes())
    }
}

/// Parses one payload. Classifies failures by how much of the envelope
/// could be read.
pub fn decode_message(payload: &[u8]) -> Result<Envelope, DecodeError> {
    let value: Value = serde_json::from_slice(payload).map_err(|e| DecodeError::MalformedJson(e.to_string()))?;
    let Value::Object(mut object) = value else {
        return Err(DecodeError::MalformedJson("message is not a JSON object".into()));
    };
    let type_name = match object.remove("type") {
        Some(Value::String(s)) => s,
        _ => return Err(DecodeError::MalformedJson("missing string field \"type\"".into())),
    };
    let id = match object.remove("id") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| DecodeError::MalformedJson("\"id\" is not an unsigned integer".into()))?,
        ),
    };
    if !MESSAGE_TYPES.contains(&type_name.as_str()) {
        return Err(DecodeError::UnknownType { type_name, id });
    }
    let body = object.remove("body").unwrap_or_else(|| Value::Object(Map::new()));
    let mut tagged = Map::new();
    tagged.insert("type".into(), Value::String(type_name.clone()));
    tagged.insert("body".into(), body);
    let message = serde_json::from_value(Value::Object(tagged)).map_err(|e| DecodeError::InvalidBody {
        type_name,
        id,
        reason: e.to_string(),
    })?;
    Ok(Envelope { id, message })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_names_match_serde_tags() {
        let samples = [
            Message::SnapshotRequest(Empty {}),
            Message::PlannersRequest(Empty {}),
            Message::ExecuteStop(Empty {}),
            Message::MirrorSet(MirrorSet { enabled: true }),
        ];
        for m in samples {
            let v = serde_json::to_value(&m).unwrap();
            assert_eq!(v["type"], m.type_name());
            assert!(MESSAGE_TYPES.contains(&m.type_name()));
        }
    }

    #[test]
    fn empty_body_round_trips() {
        let e = Envelope::new(Message::PlannersRequest(Empty {})).with_id(9);
        let text = e.to_json();
        assert_eq!(text, r#"{"type":"planners_request","id":9,"body":{}}"#);
        assert_eq!(Envelope::from_json(&text).unwrap(), e);
        let missing = Envelope::from_json(r#"{"type":"planners_request","id":9}"#).unwrap();
        assert_eq!(missing, e);
    }

    #[test]
    fn bad_body_keeps_the_id() {
        let err = Envelope::from_json(r#"{"type":"mirror_set","id":5,"body":{"enabled":"yes"}}"#).unwrap_err();
        assert!(matches!(err, DecodeError::InvalidBody { id: Some(5), .. }));
        assert!(!err.is_fatal());
        assert_eq!(err.code(), ErrorCode::InvalidBody);
    }

    #[test]
    fn envelope_shape_errors_are_fatal() {
        for text in [
            "[1,2]",
            r#"{"body":{}}"#,
            r#"{"type":7}"#,
            r#"{"type":"hello","id":-1}"#,
        ] {
            let err = Envelope::from_json(text).unwrap_err();
            assert!(err.is_fatal(), "{text}");
        }
    }

    #[test]
    fn execute_status_is_flat() {
        let m = Message::ExecuteStatus(ExecuteStatus {
            execution_id: 2,
            state: ExecutionState::Executing { progress: 0.25 },
        });
        let text = Envelope::new(m).to_json();
        assert_eq!(
            text,
            r#"{"type":"execute_status","body":{"execution_id":2,"status":"executing","progress":0.25}}"#
        );
    }
}
