mod support;

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use planhub_core::kinematics::{tip_pose, IkParams};
use planhub_core::planning::Trajectory;
use planhub_core::protocol::{
    Client, Empty, Envelope, ErrorCode, ExecuteRequest, ExecutionState, IkRequest, IkStatus, Message, MirrorSet,
    MirrorStatus,
};
use planhub_core::samples::two_link_planar;
use planhub_core::{JointState, Pose};
use planhub_server::{ExecutionFeedback, ExecutorAdapter, ServerConfig};
use tokio::task::JoinHandle;

use support::*;

fn config() -> ServerConfig {
    ServerConfig::loopback(two_link_planar())
}

fn execute(trajectory: Trajectory, rate: Option<f64>) -> Message {
    Message::ExecuteRequest(ExecuteRequest {
        trajectory_id: None,
        trajectory: Some(trajectory),
        playback_rate: rate,
    })
}

fn status(e: &Envelope) -> Option<&ExecutionState> {
    match &e.message {
        Message::ExecuteStatus(s) => Some(&s.state),
        _ => None,
    }
}

fn robot_states(seen: &[Envelope]) -> Vec<Vec<f64>> {
    seen.iter()
        .filter_map(|e| match &e.message {
            Message::RobotState(q) => Some(q.positions.clone()),
            _ => None,
        })
        .collect()
}

fn wait_done(client: &mut Client, id: Option<u64>) -> Envelope {
    client
        .recv_matching(Duration::from_secs(10), |e| {
            e.id == id && matches!(status(e), Some(ExecutionState::Done | ExecutionState::Aborted { .. }))
        })
        .unwrap()
}

#[test]
fn two_second_trajectory_finishes_on_time_and_hits_every_knot() {
    let server = TestServer::start(config());
    let mut owner = server.client("owner");
    let mut observer = server.subscriber("observer");
    let trajectory = straight_trajectory([0.0, 0.0], [1.0, -0.5], 2.0);

    let accepted = owner.request(execute(trajectory.clone(), None), WAIT).unwrap();
    let t0 = Instant::now();
    assert_eq!(status(&accepted), Some(&ExecutionState::Accepted));
    let done = wait_done(&mut owner, accepted.id);
    let elapsed = t0.elapsed().as_secs_f64();
    assert_eq!(status(&done), Some(&ExecutionState::Done));
    assert!((elapsed - 2.0).abs() <= 0.1, "done after {elapsed:.3} s");

    let progress: Vec<f64> = owner
        .drain(Duration::ZERO)
        .unwrap()
        .iter()
        .filter_map(|e| match status(e) {
            Some(ExecutionState::Executing { progress }) => Some(*progress),
            _ => None,
        })
        .collect();
    assert!(
        progress.len() >= 90,
        "about 50 updates per second, got {}",
        progress.len()
    );
    assert!(progress.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(progress.last().copied(), Some(1.0));

    let states = robot_states(&observer.drain(QUIET).unwrap());
    let mut cursor = 0;
    for knot in &trajectory.points {
        let hit = states[cursor..]
            .iter()
            .position(|q| q.iter().zip(&knot.positions).all(|(a, b)| (a - b).abs() <= 1e-9))
            .unwrap_or_else(|| panic!("knot at t={} never published", knot.time_from_start));
        cursor += hit + 1;
    }
    let Message::Snapshot(s) = observer
        .request(Message::SnapshotRequest(Empty {}), WAIT)
        .unwrap()
        .message
    else {
        panic!("expected snapshot");
    };
    assert_eq!(s.robot_state.unwrap().positions, vec![1.0, -0.5]);
}

#[test]
fn playback_rate_scales_wall_time() {
    let server = TestServer::start(config());
    let mut owner = server.client("owner");
    let accepted = owner
        .request(
            execute(straight_trajectory([0.0, 0.0], [0.5, 0.5], 2.0), Some(2.0)),
            WAIT,
        )
        .unwrap();
    let t0 = Instant::now();
    wait_done(&mut owner, accepted.id);
    let elapsed = t0.elapsed().as_secs_f64();
    assert!((elapsed - 1.0).abs() <= 0.1, "done after {elapsed:.3} s");
}

#[test]
fn executing_rejects_concurrent_executions_and_drags() {
    let server = TestServer::start(config());
    let mut owner = server.client("owner");
    let mut other = server.client("other");
    let accepted = owner
        .request(execute(straight_trajectory([0.0, 0.0], [0.5, 0.5], 1.0), None), WAIT)
        .unwrap();
    let busy = other
        .request(execute(straight_trajectory([0.0, 0.0], [0.1, 0.1], 1.0), None), WAIT)
        .unwrap();
    assert_eq!(error_code(&busy), Some(ErrorCode::Busy));
    let drag = other
        .request(Message::RobotState(JointState::new("default", vec![0.2, 0.2])), WAIT)
        .unwrap();
    assert_eq!(error_code(&drag), Some(ErrorCode::Busy));
    assert_eq!(status(&wait_done(&mut owner, accepted.id)), Some(&ExecutionState::Done));
    let again = other
        .request(execute(straight_trajectory([0.5, 0.5], [0.4, 0.4], 0.2), None), WAIT)
        .unwrap();
    assert_eq!(status(&again), Some(&ExecutionState::Accepted));
}

#[test]
fn stop_aborts_the_running_execution() {
    let server = TestServer::start(config());
    let mut owner = server.client("owner");
    let mut stopper = server.client("stopper");
    let accepted = owner
        .request(execute(straight_trajectory([0.0, 0.0], [1.0, 1.0], 5.0), None), WAIT)
        .unwrap();
    std::thread::sleep(Duration::from_millis(200));
    let reply = stopper.request(Message::ExecuteStop(Empty {}), WAIT).unwrap();
    assert!(matches!(status(&reply), Some(ExecutionState::Aborted { .. })));
    let end = wait_done(&mut owner, accepted.id);
    assert!(matches!(status(&end), Some(ExecutionState::Aborted { reason }) if reason == "stop requested"));
    let reply = stopper.request(Message::ExecuteStop(Empty {}), WAIT).unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::NotExecuting));
}

#[test]
fn malformed_trajectories_are_refused() {
    let server = TestServer::start(config());
    let mut owner = server.client("owner");
    let mut empty = straight_trajectory([0.0, 0.0], [1.0, 1.0], 1.0);
    empty.points.clear();
    let mut wide = straight_trajectory([0.0, 0.0], [1.0, 1.0], 1.0);
    wide.points[1].positions.push(0.0);
    let mut backwards = straight_trajectory([0.0, 0.0], [1.0, 1.0], 1.0);
    backwards.points[2].time_from_start = 0.1;
    for t in [empty, wide, backwards] {
        let reply = owner.request(execute(t, None), WAIT).unwrap();
        assert_eq!(error_code(&reply), Some(ErrorCode::InvalidRequest), "{reply:?}");
    }
    let reply = owner
        .request(
            execute(straight_trajectory([0.0, 0.0], [1.0, 1.0], 1.0), Some(0.0)),
            WAIT,
        )
        .unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::InvalidRequest));
}

#[test]
fn disconnecting_owner_aborts_execution() {
    let server = TestServer::start(config());
    let mut owner = server.client("owner");
    let mut other = server.client("other");
    owner
        .request(execute(straight_trajectory([0.0, 0.0], [1.0, 1.0], 5.0), None), WAIT)
        .unwrap();
    owner.shutdown().unwrap();
    drop(owner);
    std::thread::sleep(Duration::from_millis(200));
    let reply = other
        .request(execute(straight_trajectory([0.0, 0.0], [0.1, 0.1], 0.1), None), WAIT)
        .unwrap();
    assert_eq!(status(&reply), Some(&ExecutionState::Accepted));
}

struct RecordingExecutor {
    calls: Arc<Mutex<Vec<(usize, f64)>>>,
}

impl ExecutorAdapter for RecordingExecutor {
    fn execute(&self, trajectory: Trajectory, playback_rate: f64, feedback: ExecutionFeedback) -> JoinHandle<()> {
        self.calls
            .lock()
            .unwrap()
            .push((trajectory.points.len(), playback_rate));
        tokio::spawn(async move {
            let last = trajectory.points.last().unwrap().positions.clone();
            feedback.state(last, 1.0).await;
            feedback.done().await;
        })
    }
}

#[test]
fn executor_adapter_can_be_replaced() {
    let calls = Arc::new(Mutex::new(Vec::new()));
    let mut config = config();
    config.executor = Arc::new(RecordingExecutor { calls: calls.clone() });
    let server = TestServer::start(config);
    let mut owner = server.client("owner");
    let accepted = owner
        .request(
            execute(straight_trajectory([0.0, 0.0], [1.0, 1.0], 60.0), Some(0.5)),
            WAIT,
        )
        .unwrap();
    assert_eq!(status(&wait_done(&mut owner, accepted.id)), Some(&ExecutionState::Done));
    assert_eq!(*calls.lock().unwrap(), vec![(3, 0.5)]);
}

#[test]
fn mirror_replays_the_recording_and_blocks_drags() {
    let recording = straight_trajectory([0.0, 0.0], [0.6, -0.3], 0.3);
    let mut config = config();
    config.mirror_source = Some(Arc::new(recording.clone()));
    let server = TestServer::start(config);
    let mut operator = server.subscriber("operator");
    let mut observer = server.subscriber("observer");

    let ack = operator
        .request(Message::MirrorSet(MirrorSet { enabled: true }), WAIT)
        .unwrap();
    assert_eq!(ack.message, Message::MirrorStatus(MirrorStatus { enabled: true }));
    std::thread::sleep(Duration::from_millis(500));
    let states = robot_states(&observer.drain(QUIET).unwrap());
    let expected: Vec<Vec<f64>> = recording.points.iter().map(|p| p.positions.clone()).collect();
    assert_eq!(states, expected);

    let drag = operator
        .request(Message::RobotState(JointState::new("default", vec![1.0, 1.0])), WAIT)
        .unwrap();
    assert_eq!(error_code(&drag), Some(ErrorCode::MirrorActive));
    let exec = operator
        .request(execute(straight_trajectory([0.0, 0.0], [0.1, 0.1], 0.1), None), WAIT)
        .unwrap();
    assert_eq!(error_code(&exec), Some(ErrorCode::MirrorActive));
    let Message::Snapshot(s) = operator
        .request(Message::SnapshotRequest(Empty {}), WAIT)
        .unwrap()
        .message
    else {
        panic!("expected snapshot");
    };
    assert_eq!(s.robot_state.unwrap().positions, vec![0.6, -0.3]);

    let ack = operator
        .request(Message::MirrorSet(MirrorSet { enabled: false }), WAIT)
        .unwrap();
    assert_eq!(ack.message, Message::MirrorStatus(MirrorStatus { enabled: false }));
    operator
        .send(Message::RobotState(JointState::new("default", vec![1.0, 1.0])))
        .unwrap();
    let seen = observer
        .recv_matching(WAIT, |e| matches!(e.message, Message::RobotState(_)))
        .unwrap();
    assert_eq!(
        seen.message,
        Message::RobotState(JointState::new("default", vec![1.0, 1.0]))
    );
}

#[test]
fn ik_request_resolves_reachable_targets() {
    let model = two_link_planar();
    let server = TestServer::start(config());
    let mut client = server.client("ik");
    let params = IkParams::default();
    for q in [[0.4, 0.8], [-1.2, 1.5], [2.0, -0.7]] {
        let target = tip_pose(&model, &JointState::new("default", q.to_vec())).unwrap();
        let reply = client
            .request(
                Message::IkRequest(IkRequest {
                    target,
                    seed: None,
                    params: None,
                }),
                WAIT,
            )
            .unwrap();
        let Message::IkResponse(r) = reply.message else {
            panic!("expected ik_response, got {reply:?}");
        };
        assert_eq!(r.status, IkStatus::Converged);
        let reached = tip_pose(&model, &r.state.unwrap()).unwrap();
        assert!((reached.position - target.position).norm() <= params.position_tolerance);
        assert!(reached.orientation.angle_to(&target.orientation) <= params.orientation_tolerance);
    }

    let reply = client
        .request(
            Message::IkRequest(IkRequest {
                target: Pose::from_translation(5.0, 0.0, 0.0),
                seed: None,
                params: None,
            }),
            WAIT,
        )
        .unwrap();
    let Message::IkResponse(r) = reply.message else {
        panic!("expected ik_response");
    };
    assert_eq!(r.status, IkStatus::Unreachable);
    assert!((r.position_residual - 3.0).abs() < 1e-9, "{}", r.position_residual);
    assert!(r.state.is_none());
}

#[test]
fn ik_request_with_a_bad_seed_is_an_error() {
    let server = TestServer::start(config());
    let mut client = server.client("ik");
    let reply = client
        .request(
            Message::IkRequest(IkRequest {
                target: Pose::from_translation(1.0, 1.0, 0.0),
                seed: Some(JointState::new("default", vec![0.0; 5])),
                params: None,
            }),
            WAIT,
        )
        .unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::InvalidRequest));
}
