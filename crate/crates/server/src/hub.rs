use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use planhub_core::kinematics::{inverse_kinematics_with_restarts, IkError, IkParams, DRAG_RESTARTS};
use planhub_core::planning::{MotionPlanRequest, MotionPlanResponse, PlanStatus, Trajectory, PLANNER_IDS};
use planhub_core::protocol::{
    DecodeError, Empty, Envelope, ErrorCode, ExecuteRequest, ExecuteStatus, ExecutionState, Hello, IkRequest,
    IkResponse, IkStatus, Message, MirrorSet, MirrorStatus, PlanResponse, Planners, PROTOCOL_VERSION,
};
use planhub_core::scene::{PlanningScene, SceneEdit, SceneError};
use planhub_core::{JointState, RobotModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio::sync::{mpsc, oneshot, Semaphore};
use tokio::task::JoinHandle;

use crate::config::{PlannerFn, ServerConfig};
use crate::executor::{replay_mirror, ExecutionFeedback, ExecutorAdapter};

pub(crate) type SessionId = u64;

/// Trajectories kept for `execute_request` by id.
const STORED_TRAJECTORIES: usize = 64;
const WRITER_DRAIN_TIMEOUT: Duration = Duration::from_secs(2);

/// Outbound side of one connection, handed to the hub by a transport.
pub(crate) struct SessionSink {
    pub queue: mpsc::Sender<Envelope>,
    /// Final message sent ahead of anything still queued, then the
    /// connection closes.
    pub kill: oneshot::Sender<Envelope>,
    /// Resolves when the writer has finished.
    pub finished: oneshot::Receiver<()>,
}

pub(crate) enum HubEvent {
    Connected {
        session: SessionId,
        transport: &'static str,
        sink: SessionSink,
    },
    Received {
        session: SessionId,
        envelope: Envelope,
    },
    Undecodable {
        session: SessionId,
        error: DecodeError,
    },
    Disconnected {
        session: SessionId,
    },
    PlanDone {
        session: SessionId,
        request_id: Option<u64>,
        plan_seq: u64,
        response: MotionPlanResponse,
    },
    Reply {
        session: SessionId,
        envelope: Envelope,
    },
    ExecutionState {
        execution_id: u64,
        state: JointState,
        progress: f64,
    },
    ExecutionDone {
        execution_id: u64,
    },
    MirrorState(JointState),
    Shutdown {
        done: oneshot::Sender<()>,
    },
}

struct Session {
    transport: &'static str,
    queue: mpsc::Sender<Envelope>,
    kill: Option<oneshot::Sender<Envelope>>,
    finished: Option<oneshot::Receiver<()>>,
    client_name: Option<String>,
    subscribed: bool,
    last_acked_version: u64,
    inflight_plan: Option<(u64, Arc<AtomicBool>)>,
}

struct Execution {
    id: u64,
    session: SessionId,
    request_id: Option<u64>,
    task: JoinHandle<()>,
}

pub(crate) struct Hub {
    model: Arc<RobotModel>,
    scene: PlanningScene,
    sessions: BTreeMap<SessionId, Session>,
    events: mpsc::Sender<HubEvent>,
    planner: PlannerFn,
    planning_slots: Arc<Semaphore>,
    executor: Arc<dyn ExecutorAdapter>,
    execution: Option<Execution>,
    next_execution_id: u64,
    trajectories: HashMap<u64, Trajectory>,
    trajectory_order: VecDeque<u64>,
    next_trajectory_id: u64,
    next_plan_seq: u64,
    mirror_enabled: bool,
    mirror_source: Option<Arc<Trajectory>>,
    mirror_task: Option<JoinHandle<()>>,
    rng: ChaCha8Rng,
}

impl Hub {
    pub fn new(config: &ServerConfig, events: mpsc::Sender<HubEvent>) -> Self {
        Self {
            model: config.model.clone(),
            scene: config.scene.clone(),
            sessions: BTreeMap::new(),
            events,
            planner: config.planner.clone(),
            planning_slots: Arc::new(Semaphore::new(config.planning_workers.max(1))),
            executor: config.executor.clone(),
            execution: None,
            next_execution_id: 1,
            trajectories: HashMap::new(),
            trajectory_order: VecDeque::new(),
            next_trajectory_id: 1,
            next_plan_seq: 1,
            mirror_enabled: false,
            mirror_source: config.mirror_source.clone(),
            mirror_task: None,
            rng: match config.seed {
                Some(seed) => ChaCha8Rng::seed_from_u64(seed),
                None => ChaCha8Rng::from_os_rng(),
            },
        }
    }

    pub async fn run(mut self, mut inbox: mpsc::Receiver<HubEvent>) {
        while let Some(event) = inbox.recv().await {
            if let HubEvent::Shutdown { done } = event {
                self.shutdown().await;
                let _ = done.send(());
                return;
            }
            self.handle(event);
        }
    }

    fn handle(&mut self, event: HubEvent) {
        match event {
            HubEvent::Connected {
                session,
                transport,
                sink,
            } => {
                tracing::debug!(session, transport, "connected");
                self.sessions.insert(
                    session,
                    Session {
                        transport,
                        queue: sink.queue,
                        kill: Some(sink.kill),
                        finished: Some(sink.finished),
                        client_name: None,
                        subscribed: false,
                        last_acked_version: 0,
                        inflight_plan: None,
                    },
                );
            }
            HubEvent::Received { session, envelope } => self.on_message(session, envelope),
            HubEvent::Undecodable { session, error } => {
                tracing::warn!(session, %error, "undecodable message");
                if error.is_fatal() {
                    self.close(session, error.to_message());
                } else {
                    let id = error.id();
                    self.send(
                        session,
                        Envelope {
                            id,
                            message: error.to_message(),
                        },
                    );
                }
            }
            HubEvent::Disconnected { session } => self.remove(session),
            HubEvent::PlanDone {
                session,
                request_id,
                plan_seq,
                response,
            } => self.on_plan_done(session, request_id, plan_seq, response),
            HubEvent::Reply { session, envelope } => self.send(session, envelope),
            HubEvent::ExecutionState {
                execution_id,
                state,
                progress,
            } => {
                let Some(exec) = self.execution.as_ref().filter(|e| e.id == execution_id) else {
                    return;
                };
                let (owner, request_id) = (exec.session, exec.request_id);
                self.scene.replace_robot_state(state.clone());
                self.broadcast_robot_state(&state, None);
                self.send(
                    owner,
                    Envelope {
                        id: request_id,
                        message: Message::ExecuteStatus(ExecuteStatus {
                            execution_id,
                            state: ExecutionState::Executing { progress },
                        }),
                    },
                );
            }
            HubEvent::ExecutionDone { execution_id } => {
                if self.execution.as_ref().is_some_and(|e| e.id == execution_id) {
                    let exec = self.execution.take().expect("checked");
                    self.send(
                        exec.session,
                        Envelope {
                            id: exec.request_id,
                            message: Message::ExecuteStatus(ExecuteStatus {
                                execution_id,
                                state: ExecutionState::Done,
                            }),
                        },
                    );
                }
            }
            HubEvent::MirrorState(state) => {
                if self.mirror_enabled {
                    self.scene.replace_robot_state(state.clone());
                    self.broadcast_robot_state(&state, None);
                }
            }
            HubEvent::Shutdown { .. } => unreachable!("handled in run"),
        }
    }

    fn on_message(&mut self, sid: SessionId, envelope: Envelope) {
        let Some(session) = self.sessions.get_mut(&sid) else {
            return;
        };
        let id = envelope.id;
        if session.client_name.is_none() {
            match envelope.message {
                Message::Hello(Hello {
                    client_name,
                    protocol_version,
                }) => {
                    if protocol_version != PROTOCOL_VERSION {
                        let text = format!(
                            "protocol version {protocol_version} is not supported; this server speaks {PROTOCOL_VERSION}"
                        );
                        self.close(sid, Message::error(ErrorCode::UnsupportedVersion, id, text));
                    } else {
                        tracing::info!(session = sid, transport = session.transport, client = %client_name, "hello");
                        session.client_name = Some(client_name);
                    }
                }
                other => {
                    let text = format!("expected hello, got {}", other.type_name());
                    self.reply_error(sid, id, ErrorCode::HelloRequired, text);
                }
            }
            return;
        }

        match envelope.message {
            Message::Hello(_) => self.reply_error(sid, id, ErrorCode::InvalidRequest, "duplicate hello"),
            Message::SnapshotRequest(Empty {}) => {
                let version = self.scene.version();
                let session = self.sessions.get_mut(&sid).expect("present");
                session.subscribed = true;
                session.last_acked_version = version;
                let snapshot = self.scene.snapshot();
                self.send(
                    sid,
                    Envelope {
                        id,
                        message: Message::Snapshot(snapshot),
                    },
                );
            }
            Message::SceneOp(edit) => self.on_scene_op(sid, id, edit),
            Message::RobotState(q) => self.on_robot_state(sid, id, q),
            Message::PlannersRequest(Empty {}) => {
                let planner_ids = PLANNER_IDS.iter().map(|s| s.to_string()).collect();
                self.send(
                    sid,
                    Envelope {
                        id,
                        message: Message::Planners(Planners { planner_ids }),
                    },
                );
            }
            Message::PlanRequest(request) => self.on_plan_request(sid, id, request),
            Message::ExecuteRequest(request) => self.on_execute(sid, id, request),
            Message::ExecuteStop(Empty {}) => self.on_stop(sid, id),
            Message::MirrorSet(MirrorSet { enabled }) => self.on_mirror_set(sid, id, enabled),
            Message::IkRequest(request) => self.on_ik(sid, id, request),
            other @ (Message::Snapshot(_)
            | Message::SceneDiff(_)
            | Message::Planners(_)
            | Message::PlanResponse(_)
            | Message::ExecuteStatus(_)
            | Message::MirrorStatus(_)
            | Message::IkResponse(_)
            | Message::Error(_)) => {
                let text = format!("{} is sent by the server only", other.type_name());
                self.reply_error(sid, id, ErrorCode::InvalidRequest, text);
            }
        }
    }

    fn on_scene_op(&mut self, sid: SessionId, id: Option<u64>, edit: SceneEdit) {
        match self.scene.apply_edit(&edit) {
            Ok(_) => {
                if let Some(s) = self.sessions.get_mut(&sid) {
                    s.subscribed = true;
                }
                self.publish_diffs(Some((sid, id)));
            }
            Err(e) => self.reply_error(sid, id, ErrorCode::SceneRejected, e.to_string()),
        }
    }

    /// Sends every subscriber the coalesced change since its last ack. The
    /// originating session's copy carries the request id.
    fn publish_diffs(&mut self, origin: Option<(SessionId, Option<u64>)>) {
        let version = self.scene.version();
        let targets: Vec<SessionId> = self
            .sessions
            .iter()
            .filter(|(_, s)| s.subscribed)
            .map(|(id, _)| *id)
            .collect();
        for sid in targets {
            let Some(session) = self.sessions.get_mut(&sid) else {
                continue;
            };
            let from = session.last_acked_version;
            session.last_acked_version = version;
            let id = origin.filter(|(o, _)| *o == sid).and_then(|(_, id)| id);
            let message = match self.scene.journal_since(from) {
                Ok(diff) => {
                    if diff.is_empty() && id.is_none() {
                        continue;
                    }
                    Message::SceneDiff(diff)
                }
                Err(SceneError::VersionEvicted { .. }) => Message::Snapshot(self.scene.snapshot()),
                Err(e) => {
                    tracing::error!(session = sid, %e, "cannot build diff");
                    Message::Snapshot(self.scene.snapshot())
                }
            };
            self.send(sid, Envelope { id, message });
        }
    }

    fn on_robot_state(&mut self, sid: SessionId, id: Option<u64>, q: JointState) {
        if self.mirror_enabled {
            let text = "robot state is mirrored from the physical robot; input ignored";
            return self.reply_error(sid, id, ErrorCode::MirrorActive, text);
        }
        if self.execution.is_some() {
            return self.reply_error(sid, id, ErrorCode::Busy, "robot is executing a trajectory");
        }
        match self.scene.set_robot_state(&self.model, &q) {
            Ok(update) => {
                let applied = self.scene.robot_state().cloned().expect("just set");
                self.broadcast_robot_state(&applied, Some(sid));
                if update.clamped {
                    self.send(
                        sid,
                        Envelope {
                            id,
                            message: Message::RobotState(applied),
                        },
                    );
                }
            }
            Err(e) => self.reply_error(sid, id, ErrorCode::InvalidRobotState, e.to_string()),
        }
    }

    fn broadcast_robot_state(&mut self, q: &JointState, except: Option<SessionId>) {
        let targets: Vec<SessionId> = self
            .sessions
            .iter()
            .filter(|(id, s)| s.subscribed && Some(**id) != except)
            .map(|(id, _)| *id)
            .collect();
        for sid in targets {
            self.send(sid, Envelope::new(Message::RobotState(q.clone())));
        }
    }

    fn on_plan_request(&mut self, sid: SessionId, id: Option<u64>, mut request: MotionPlanRequest) {
        if !PLANNER_IDS.contains(&request.planner_id.as_str()) {
            let text = format!(
                "unknown planner {:?}; available: {}",
                request.planner_id,
                PLANNER_IDS.join(", ")
            );
            return self.reply_error(sid, id, ErrorCode::UnknownPlanner, text);
        }
        if let Err(e) = request.validate() {
            return self.reply_error(sid, id, ErrorCode::InvalidRequest, e);
        }
        if request.seed.is_none() {
            request.seed = Some(self.rng.random());
        }
        let cancel = Arc::new(AtomicBool::new(false));
        let plan_seq = self.next_plan_seq;
        self.next_plan_seq += 1;
        if let Some(session) = self.sessions.get_mut(&sid) {
            if let Some((_, previous)) = session.inflight_plan.replace((plan_seq, cancel.clone())) {
                previous.store(true, Ordering::Relaxed);
            }
        }
        let objects: Vec<_> = self.scene.objects().cloned().collect();
        let model = self.model.clone();
        let planner = self.planner.clone();
        let slots = self.planning_slots.clone();
        let events = self.events.clone();
        tokio::spawn(async move {
            let Ok(_permit) = slots.acquire_owned().await else {
                return;
            };
            let started = std::time::Instant::now();
            let worker = tokio::task::spawn_blocking(move || planner(&model, &objects, &request, cancel));
            let response = worker.await.unwrap_or_else(|e| {
                tracing::error!(%e, "planning worker failed");
                MotionPlanResponse {
                    status: PlanStatus::PlanningFailed,
                    path: None,
                    trajectory: None,
                    planning_time: started.elapsed().as_secs_f64(),
                    waypoint_count: 0,
                    message: Some(format!("planner crashed: {}", panic_text(e))),
                }
            });
            let _ = events
                .send(HubEvent::PlanDone {
                    session: sid,
                    request_id: id,
                    plan_seq,
                    response,
                })
                .await;
        });
    }

    fn on_plan_done(&mut self, sid: SessionId, id: Option<u64>, plan_seq: u64, response: MotionPlanResponse) {
        let Some(session) = self.sessions.get_mut(&sid) else {
            return;
        };
        if session.inflight_plan.as_ref().is_some_and(|(seq, _)| *seq == plan_seq) {
            session.inflight_plan = None;
        }
        let trajectory_id = response.trajectory.clone().map(|t| self.store_trajectory(t));
        self.send(
            sid,
            Envelope {
                id,
                message: Message::PlanResponse(PlanResponse {
                    trajectory_id,
                    response,
                }),
            },
        );
    }

    fn store_trajectory(&mut self, trajectory: Trajectory) -> u64 {
        let id = self.next_trajectory_id;
        self.next_trajectory_id += 1;
        self.trajectories.insert(id, trajectory);
        self.trajectory_order.push_back(id);
        while self.trajectory_order.len() > STORED_TRAJECTORIES {
            let old = self.trajectory_order.pop_front().expect("nonempty");
            self.trajectories.remove(&old);
        }
        id
    }

    fn on_execute(&mut self, sid: SessionId, id: Option<u64>, request: ExecuteRequest) {
        if self.execution.is_some() {
            return self.reply_error(sid, id, ErrorCode::Busy, "another trajectory is executing");
        }
        if self.mirror_enabled {
            return self.reply_error(sid, id, ErrorCode::MirrorActive, "disable mirroring before executing");
        }
        let trajectory = match (request.trajectory, request.trajectory_id) {
            (Some(t), _) => t,
            (None, Some(tid)) => match self.trajectories.get(&tid) {
                Some(t) => t.clone(),
                None => {
                    let text = format!("no stored trajectory with id {tid}");
                    return self.reply_error(sid, id, ErrorCode::UnknownTrajectory, text);
                }
            },
            (None, None) => {
                return self.reply_error(sid, id, ErrorCode::InvalidRequest, "need trajectory_id or trajectory")
            }
        };
        let rate = request.playback_rate.unwrap_or(1.0);
        if !(rate.is_finite() && rate > 0.0) {
            return self.reply_error(sid, id, ErrorCode::InvalidRequest, "playback_rate must be positive");
        }
        if let Err(text) = self.check_trajectory(&trajectory) {
            return self.reply_error(sid, id, ErrorCode::InvalidRequest, text);
        }
        let execution_id = self.next_execution_id;
        self.next_execution_id += 1;
        let feedback = ExecutionFeedback::new(execution_id, trajectory.group.clone(), self.events.clone());
        self.send(
            sid,
            Envelope {
                id,
                message: Message::ExecuteStatus(ExecuteStatus {
                    execution_id,
                    state: ExecutionState::Accepted,
                }),
            },
        );
        let task = self.executor.execute(trajectory, rate, feedback);
        self.execution = Some(Execution {
            id: execution_id,
            session: sid,
            request_id: id,
            task,
        });
    }

    fn check_trajectory(&self, trajectory: &Trajectory) -> Result<(), String> {
        let group = self.model.group(&trajectory.group).map_err(|e| e.to_string())?;
        if trajectory.points.is_empty() {
            return Err("trajectory has no points".into());
        }
        if trajectory
            .points
            .iter()
            .any(|p| p.positions.len() != group.dof() || p.velocities.len() != group.dof())
        {
            return Err(format!("trajectory points must have {} joint values", group.dof()));
        }
        if trajectory
            .points
            .windows(2)
            .any(|w| w[1].time_from_start.partial_cmp(&w[0].time_from_start) != Some(std::cmp::Ordering::Greater))
        {
            return Err("trajectory times must increase".into());
        }
        Ok(())
    }

    fn abort_execution(&mut self, reason: &str) -> Option<Execution> {
        let exec = self.execution.take()?;
        exec.task.abort();
        self.send(
            exec.session,
            Envelope {
                id: exec.request_id,
                message: Message::ExecuteStatus(ExecuteStatus {
                    execution_id: exec.id,
                    state: ExecutionState::Aborted { reason: reason.into() },
                }),
            },
        );
        Some(exec)
    }

    fn on_stop(&mut self, sid: SessionId, id: Option<u64>) {
        match self.abort_execution("stop requested") {
            Some(exec) => {
                if id.is_some() {
                    self.send(
                        sid,
                        Envelope {
                            id,
                            message: Message::ExecuteStatus(ExecuteStatus {
                                execution_id: exec.id,
                                state: ExecutionState::Aborted {
                                    reason: "stop requested".into(),
                                },
                            }),
                        },
                    );
                }
            }
            None => self.reply_error(sid, id, ErrorCode::NotExecuting, "nothing is executing"),
        }
    }

    fn on_mirror_set(&mut self, sid: SessionId, id: Option<u64>, enabled: bool) {
        if enabled {
            self.abort_execution("mirroring enabled");
        }
        if let Some(task) = self.mirror_task.take() {
            task.abort();
        }
        self.mirror_enabled = enabled;
        if enabled {
            if let Some(source) = &self.mirror_source {
                self.mirror_task = Some(replay_mirror(source.clone(), self.events.clone()));
            }
        }
        tracing::info!(enabled, "mirror mode");
        self.send(
            sid,
            Envelope {
                id,
                message: Message::MirrorStatus(MirrorStatus { enabled }),
            },
        );
    }

    fn on_ik(&mut self, sid: SessionId, id: Option<u64>, request: IkRequest) {
        let seed = match request.seed.or_else(|| self.scene.robot_state().cloned()) {
            Some(q) => q,
            None => {
                let group = self.model.primary_group().name.clone();
                self.model.zero_state(&group).expect("primary group exists")
            }
        };
        let params = request.params.unwrap_or_default();
        let rng_seed: u64 = self.rng.random();
        let model = self.model.clone();
        let events = self.events.clone();
        tokio::spawn(async move {
            let worker = tokio::task::spawn_blocking(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                ik_response(&model, &request.target, &seed, &params, &mut rng)
            });
            let message = match worker.await {
                Ok(Ok(response)) => Message::IkResponse(response),
                Ok(Err(text)) => Message::error(ErrorCode::InvalidRequest, id, text),
                Err(e) => Message::error(ErrorCode::Internal, id, panic_text(e)),
            };
            let _ = events
                .send(HubEvent::Reply {
                    session: sid,
                    envelope: Envelope { id, message },
                })
                .await;
        });
    }

    fn reply_error(&mut self, sid: SessionId, id: Option<u64>, code: ErrorCode, text: impl Into<String>) {
        let text = text.into();
        tracing::debug!(session = sid, ?code, %text, "error reply");
        self.send(
            sid,
            Envelope {
                id,
                message: Message::error(code, id, text),
            },
        );
    }

    /// Queues a message. A full queue drops the session.
    fn send(&mut self, sid: SessionId, envelope: Envelope) {
        let Some(session) = self.sessions.get_mut(&sid) else {
            return;
        };
        match session.queue.try_send(envelope) {
            Ok(()) => {}
            Err(mpsc::error::TrySendError::Full(_)) => {
                tracing::warn!(session = sid, "outbound queue full; dropping session");
                let text = "outbound queue overflowed; client is not reading";
                self.kill(sid, Message::error(ErrorCode::Overloaded, None, text));
            }
            Err(mpsc::error::TrySendError::Closed(_)) => self.remove(sid),
        }
    }

    /// Sends `last` after anything already queued, then closes.
    fn close(&mut self, sid: SessionId, last: Message) {
        let Some(session) = self.sessions.get_mut(&sid) else {
            return;
        };
        match session.queue.try_send(Envelope::new(last)) {
            Ok(()) => self.remove(sid),
            Err(e) => {
                let last = e.into_inner();
                self.kill(sid, last.message);
            }
        }
    }

    /// Sends `last` immediately, discarding the queue, then closes.
    fn kill(&mut self, sid: SessionId, last: Message) {
        if let Some(mut session) = self.sessions.remove(&sid) {
            if let Some(kill) = session.kill.take() {
                let _ = kill.send(Envelope::new(last));
            }
            self.forget(sid, session);
        }
    }

    fn remove(&mut self, sid: SessionId) {
        if let Some(session) = self.sessions.remove(&sid) {
            self.forget(sid, session);
        }
    }

    fn forget(&mut self, sid: SessionId, session: Session) {
        tracing::debug!(session = sid, client = ?session.client_name, "session closed");
        if let Some((_, cancel)) = &session.inflight_plan {
            cancel.store(true, Ordering::Relaxed);
        }
        if self.execution.as_ref().is_some_and(|e| e.session == sid) {
            if let Some(exec) = self.execution.take() {
                exec.task.abort();
            }
        }
    }

    async fn shutdown(&mut self) {
        if let Some(exec) = self.execution.take() {
            exec.task.abort();
        }
        if let Some(task) = self.mirror_task.take() {
            task.abort();
        }
        let ids: Vec<SessionId> = self.sessions.keys().copied().collect();
        let mut finished = Vec::new();
        for sid in ids {
            if let Some(session) = self.sessions.get_mut(&sid) {
                finished.extend(session.finished.take());
            }
            self.close(
                sid,
                Message::error(ErrorCode::ShuttingDown, None, "server is shutting down"),
            );
        }
        let _ = tokio::time::timeout(WRITER_DRAIN_TIMEOUT, async {
            for f in finished {
                let _ = f.await;
            }
        })
        .await;
    }
}

fn ik_response<R: Rng>(
    model: &RobotModel,
    target: &planhub_core::Pose,
    seed: &JointState,
    params: &IkParams,
    rng: &mut R,
) -> Result<IkResponse, String> {
    match inverse_kinematics_with_restarts(model, target, seed, params, DRAG_RESTARTS, rng) {
        Ok(sol) => Ok(IkResponse {
            status: IkStatus::Converged,
            state: Some(sol.state),
            position_residual: sol.position_residual,
            orientation_residual: sol.orientation_residual,
        }),
        Err(IkError::NoConvergence {
            best,
            position_residual,
            orientation_residual,
            ..
        }) => Ok(IkResponse {
            status: IkStatus::NoConvergence,
            state: Some(best),
            position_residual,
            orientation_residual,
        }),
        Err(IkError::UnreachableHint { distance, reach }) => Ok(IkResponse {
            status: IkStatus::Unreachable,
            state: None,
            position_residual: distance - reach,
            orientation_residual: 0.0,
        }),
        Err(e) => Err(e.to_string()),
    }
}

fn panic_text(e: tokio::task::JoinError) -> String {
    match e.try_into_panic() {
        Ok(payload) => payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into()),
        Err(e) => e.to_string(),
    }
}
