mod support;

use std::io::Read;
use std::sync::atomic::Ordering;
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use planhub_core::planning::{Goal, MotionPlanRequest, MotionPlanResponse, PlanStatus};
use planhub_core::protocol::{Client, ClientError, Empty, ErrorCode, Message, PlanResponse};
use planhub_core::samples::two_link_planar;
use planhub_core::scene::{CollisionObject, SceneEdit, SceneOp, SceneReplica};
use planhub_core::{JointState, Pose, Shape};
use planhub_server::ServerConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::*;

fn config() -> ServerConfig {
    ServerConfig::loopback(two_link_planar())
}

fn add_box(id: &str, x: f64) -> Message {
    Message::SceneOp(SceneEdit::Add {
        object: CollisionObject::new(id, Shape::cuboid(0.1, 0.1, 0.1), Pose::from_translation(x, 1.5, 0.0)),
    })
}

fn plan_request(planner: &str) -> Message {
    let mut request = MotionPlanRequest::new(
        JointState::new("default", vec![0.0, 0.0]),
        Goal::joint(JointState::new("default", vec![1.0, 0.5])),
    );
    request.planner_id = planner.into();
    request.seed = Some(7);
    Message::PlanRequest(request)
}

#[test]
fn add_reaches_other_client_as_one_add() {
    let server = TestServer::start(config());
    let mut a = server.subscriber("a");
    let mut b = server.subscriber("b");
    let reply = a.request(add_box("b1", 1.5), WAIT).unwrap();
    assert!(matches!(reply.message, Message::SceneDiff(_)), "{reply:?}");

    let diff = b.recv(WAIT).unwrap();
    let Message::SceneDiff(diff) = diff.message else {
        panic!("expected scene_diff, got {diff:?}");
    };
    assert_eq!(diff.ops.len(), 1);
    assert!(matches!(&diff.ops[0], SceneOp::Add { object } if object.id == "b1"));
    assert_eq!(diff.to_version, diff.from_version + 1);
}

#[test]
fn unsubscribed_clients_get_no_diffs() {
    let server = TestServer::start(config());
    let mut a = server.subscriber("a");
    let mut quiet = server.client("quiet");
    a.request(add_box("b1", 1.5), WAIT).unwrap();
    assert!(quiet.drain(QUIET).unwrap().is_empty());
}

#[test]
fn rejected_edit_gets_scene_rejected() {
    let server = TestServer::start(config());
    let mut a = server.subscriber("a");
    a.request(add_box("b1", 1.5), WAIT).unwrap();
    let reply = a.request(add_box("b1", 1.0), WAIT).unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::SceneRejected));
    let reply = a
        .request(Message::SceneOp(SceneEdit::Remove { id: "nope".into() }), WAIT)
        .unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::SceneRejected));
}

#[test]
fn resize_arrives_as_remove_then_add() {
    let server = TestServer::start(config());
    let mut a = server.subscriber("a");
    let mut b = server.subscriber("b");
    a.request(add_box("b1", 1.5), WAIT).unwrap();
    b.recv(WAIT).unwrap();
    let shape = Shape::sphere(0.3);
    a.request(Message::SceneOp(SceneEdit::Resize { id: "b1".into(), shape }), WAIT)
        .unwrap();
    let Message::SceneDiff(diff) = b.recv(WAIT).unwrap().message else {
        panic!("expected scene_diff");
    };
    assert!(
        matches!(&diff.ops[..], [SceneOp::Remove { id }, SceneOp::Add { object }] if id == "b1" && object.shape == shape)
    );
}

#[test]
fn unknown_planner_errors_and_session_stays_open() {
    let server = TestServer::start(config());
    let mut a = server.client("a");
    let reply = a.request(plan_request("chomp"), WAIT).unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::UnknownPlanner));
    let reply = a.request(Message::PlannersRequest(Empty {}), WAIT).unwrap();
    let Message::Planners(p) = reply.message else {
        panic!("expected planners");
    };
    assert_eq!(p.planner_ids, vec!["rrt_connect", "prm"]);
}

#[test]
fn invalid_plan_request_fields_are_rejected() {
    let server = TestServer::start(config());
    let mut a = server.client("a");
    let Message::PlanRequest(mut request) = plan_request("rrt_connect") else {
        unreachable!()
    };
    request.num_attempts = 0;
    let reply = a.request(Message::PlanRequest(request), WAIT).unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::InvalidRequest));
}

#[test]
fn plan_then_execute_by_trajectory_id() {
    let server = TestServer::start(config());
    let mut a = server.client("a");
    for planner in ["rrt_connect", "prm"] {
        let reply = a.request(plan_request(planner), Duration::from_secs(10)).unwrap();
        let Message::PlanResponse(PlanResponse {
            trajectory_id,
            response,
        }) = reply.message
        else {
            panic!("expected plan_response, got {reply:?}");
        };
        assert_eq!(
            response.status,
            PlanStatus::Success,
            "{planner}: {:?}",
            response.message
        );
        assert!(response.waypoint_count >= 2);
        let tid = trajectory_id.expect("successful plans carry a trajectory id");
        let reply = a
            .request(
                Message::ExecuteRequest(planhub_core::protocol::ExecuteRequest {
                    trajectory_id: Some(tid),
                    trajectory: None,
                    playback_rate: Some(20.0),
                }),
                WAIT,
            )
            .unwrap();
        let id = reply.id;
        assert!(
            matches!(reply.message, Message::ExecuteStatus(ref s) if s.state == planhub_core::protocol::ExecutionState::Accepted)
        );
        let done = a
            .recv_matching(Duration::from_secs(10), |e| {
                e.id == id
                    && matches!(&e.message, Message::ExecuteStatus(s) if s.state == planhub_core::protocol::ExecutionState::Done)
            })
            .unwrap();
        assert_eq!(done.id, id);
        a.drain(QUIET).unwrap();
    }
}

#[test]
fn unknown_trajectory_id_is_reported() {
    let server = TestServer::start(config());
    let mut a = server.client("a");
    let reply = a
        .request(
            Message::ExecuteRequest(planhub_core::protocol::ExecuteRequest {
                trajectory_id: Some(999),
                trajectory: None,
                playback_rate: None,
            }),
            WAIT,
        )
        .unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::UnknownTrajectory));
}

#[test]
fn messages_before_hello_are_refused() {
    let server = TestServer::start(config());
    let mut stream = server.raw();
    write_raw(&mut stream, br#"{"type":"planners_request","id":4}"#);
    let mut client = RawReader::new(stream);
    let reply = client.next();
    assert_eq!(error_code(&reply), Some(ErrorCode::HelloRequired));
    assert_eq!(reply.id, Some(4));
    write_raw(
        &mut client.stream,
        br#"{"type":"hello","body":{"client_name":"late","protocol_version":1}}"#,
    );
    write_raw(&mut client.stream, br#"{"type":"planners_request","id":5}"#);
    let reply = client.next();
    assert!(matches!(reply.message, Message::Planners(_)));
}

#[test]
fn wrong_protocol_version_closes() {
    let server = TestServer::start(config());
    let mut client = Client::connect_with_version(server.tcp, "old", 2).unwrap();
    let seen = read_until_closed(&mut client);
    assert_eq!(seen.len(), 1, "{seen:?}");
    assert_eq!(error_code(&seen[0]), Some(ErrorCode::UnsupportedVersion));
}

#[test]
fn malformed_json_closes_session() {
    let server = TestServer::start(config());
    let mut a = server.client("a");
    let mut stream = server.raw();
    write_raw(&mut stream, b"{not json");
    let mut raw = RawReader::new(stream);
    assert_eq!(error_code(&raw.next()), Some(ErrorCode::MalformedJson));
    assert!(raw.closed());
    // Other sessions are unaffected.
    a.request(Message::PlannersRequest(Empty {}), WAIT).unwrap();
}

#[test]
fn oversize_length_prefix_closes_session() {
    let server = TestServer::start(config());
    let mut stream = server.raw();
    use std::io::Write;
    stream.write_all(&u32::MAX.to_be_bytes()).unwrap();
    let mut raw = RawReader::new(stream);
    assert_eq!(error_code(&raw.next()), Some(ErrorCode::FrameTooLong));
    assert!(raw.closed());
}

#[test]
fn unknown_type_and_bad_body_keep_session_open() {
    let server = TestServer::start(config());
    let mut stream = server.raw();
    write_raw(
        &mut stream,
        br#"{"type":"hello","body":{"client_name":"x","protocol_version":1}}"#,
    );
    write_raw(&mut stream, br#"{"type":"teleport","id":8,"body":{}}"#);
    write_raw(&mut stream, br#"{"type":"mirror_set","id":9,"body":{"enabled":"yes"}}"#);
    write_raw(&mut stream, br#"{"type":"planners_request","id":10}"#);
    let mut raw = RawReader::new(stream);
    let first = raw.next();
    assert_eq!((error_code(&first), first.id), (Some(ErrorCode::UnknownType), Some(8)));
    let second = raw.next();
    assert_eq!(
        (error_code(&second), second.id),
        (Some(ErrorCode::InvalidBody), Some(9))
    );
    assert!(matches!(raw.next().message, Message::Planners(_)));
}

#[test]
fn server_only_messages_are_refused() {
    let server = TestServer::start(config());
    let mut a = server.client("a");
    let reply = a
        .request(
            Message::MirrorStatus(planhub_core::protocol::MirrorStatus { enabled: true }),
            WAIT,
        )
        .unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::InvalidRequest));
}

#[test]
fn robot_state_is_rebroadcast_and_clamps_echo() {
    let server = TestServer::start(config());
    let mut a = server.subscriber("a");
    let mut b = server.subscriber("b");
    a.send(Message::RobotState(JointState::new("default", vec![0.3, -0.2])))
        .unwrap();
    let seen = b.recv(WAIT).unwrap();
    assert_eq!(
        seen.message,
        Message::RobotState(JointState::new("default", vec![0.3, -0.2]))
    );
    assert!(a.drain(QUIET).unwrap().is_empty(), "unclamped states are not echoed");

    a.send(Message::RobotState(JointState::new("default", vec![5.0, 0.0])))
        .unwrap();
    let echo = a.recv(WAIT).unwrap();
    let Message::RobotState(q) = echo.message else {
        panic!("expected the clamped state back");
    };
    assert_eq!(q.positions, vec![std::f64::consts::PI, 0.0]);

    let reply = a
        .request(Message::RobotState(JointState::new("default", vec![0.0])), WAIT)
        .unwrap();
    assert_eq!(error_code(&reply), Some(ErrorCode::InvalidRobotState));
}

#[test]
fn rapid_robot_states_end_in_the_final_state() {
    let server = TestServer::start(config());
    let mut a = server.subscriber("a");
    let mut b = server.subscriber("b");
    for k in 0..200 {
        let x = k as f64 / 200.0;
        a.send(Message::RobotState(JointState::new("default", vec![x, -x])))
            .unwrap();
    }
    let seen: Vec<f64> = b
        .drain(QUIET)
        .unwrap()
        .into_iter()
        .filter_map(|e| match e.message {
            Message::RobotState(q) => Some(q.positions[0]),
            _ => None,
        })
        .collect();
    assert!(seen.windows(2).all(|w| w[0] < w[1]), "states arrive in order");
    assert_eq!(seen.last().copied(), Some(199.0 / 200.0));
}

#[test]
fn interleaved_edits_converge() {
    let server = TestServer::start(config());
    let mut clients = [server.subscriber("a"), server.subscriber("b")];
    let mut replicas = [SceneReplica::new(), SceneReplica::new()];
    for (client, replica) in clients.iter_mut().zip(&mut replicas) {
        let Message::Snapshot(s) = client
            .request(Message::SnapshotRequest(Empty {}), WAIT)
            .unwrap()
            .message
        else {
            panic!("expected snapshot");
        };
        replica.apply_snapshot(&s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let who = rng.random_range(0..2);
        let id = format!("o{}", rng.random_range(0..6));
        let edit = match rng.random_range(0..4) {
            0 => SceneEdit::Add {
                object: CollisionObject::new(id, Shape::sphere(0.1), Pose::from_translation(rng.random(), 1.5, 0.0)),
            },
            1 => SceneEdit::SetPose {
                id,
                pose: Pose::from_translation(rng.random(), 1.5, rng.random()),
            },
            2 => SceneEdit::Resize {
                id,
                shape: Shape::cuboid(rng.random_range(0.05..0.2), 0.1, 0.1),
            },
            _ => SceneEdit::Remove { id },
        };
        clients[who].send(Message::SceneOp(edit)).unwrap();
    }
    let mut observer = server.client("observer");
    std::thread::sleep(QUIET);
    let Message::Snapshot(truth) = observer
        .request(Message::SnapshotRequest(Empty {}), WAIT)
        .unwrap()
        .message
    else {
        panic!("expected snapshot");
    };
    for (client, replica) in clients.iter_mut().zip(&mut replicas) {
        for e in client.drain(QUIET).unwrap() {
            match e.message {
                Message::SceneDiff(d) => replica.apply_diff(&d).unwrap(),
                Message::Snapshot(s) => replica.apply_snapshot(&s),
                Message::Error(err) => assert_eq!(err.code, ErrorCode::SceneRejected),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(replica.snapshot().objects, truth.objects);
        assert_eq!(replica.version(), truth.version);
    }
}

#[test]
fn planning_does_not_block_scene_edits() {
    let (seen_tx, seen_rx) = mpsc::channel();
    let (release_tx, release_rx) = mpsc::channel::<()>();
    let release_rx = std::sync::Mutex::new(release_rx);
    let mut config = config();
    config.planner = Arc::new(move |_model, objects, _req, _cancel| {
        seen_tx.send(objects.len()).unwrap();
        release_rx.lock().unwrap().recv_timeout(WAIT).unwrap();
        MotionPlanResponse {
            status: PlanStatus::PlanningFailed,
            path: None,
            trajectory: None,
            planning_time: 0.0,
            waypoint_count: 0,
            message: Some("test planner".into()),
        }
    });
    let server = TestServer::start(config);
    let mut a = server.subscriber("a");
    let plan_id = a.send_request(plan_request("rrt_connect")).unwrap();
    assert_eq!(seen_rx.recv_timeout(WAIT).unwrap(), 0);

    let started = Instant::now();
    let reply = a.request(add_box("b1", 1.5), WAIT).unwrap();
    assert!(matches!(reply.message, Message::SceneDiff(_)));
    assert!(started.elapsed() < Duration::from_millis(500));

    release_tx.send(()).unwrap();
    let reply = a.recv_matching(WAIT, |e| e.id == Some(plan_id)).unwrap();
    assert!(matches!(reply.message, Message::PlanResponse(_)));
}

#[test]
fn rerequest_cancels_the_previous_plan() {
    let mut config = config();
    config.planner = Arc::new(|_model, _objects, _req, cancel| {
        let started = Instant::now();
        while !cancel.load(Ordering::Relaxed) && started.elapsed() < Duration::from_millis(300) {
            std::thread::sleep(Duration::from_millis(2));
        }
        MotionPlanResponse {
            status: PlanStatus::PlanningFailed,
            path: None,
            trajectory: None,
            planning_time: started.elapsed().as_secs_f64(),
            waypoint_count: 0,
            message: Some(
                if cancel.load(Ordering::Relaxed) {
                    "cancelled"
                } else {
                    "finished"
                }
                .into(),
            ),
        }
    });
    config.planning_workers = 2;
    let server = TestServer::start(config);
    let mut a = server.client("a");
    let first = a.send_request(plan_request("rrt_connect")).unwrap();
    std::thread::sleep(Duration::from_millis(50));
    let second = a.send_request(plan_request("rrt_connect")).unwrap();
    let sent = Instant::now();
    let reply = a.recv_matching(WAIT, |e| e.id == Some(first)).unwrap();
    assert!(sent.elapsed() < Duration::from_millis(100), "{:?}", sent.elapsed());
    let Message::PlanResponse(r) = reply.message else {
        panic!()
    };
    assert_eq!(r.response.message.as_deref(), Some("cancelled"));
    let reply = a.recv_matching(WAIT, |e| e.id == Some(second)).unwrap();
    let Message::PlanResponse(r) = reply.message else {
        panic!()
    };
    assert_eq!(r.response.message.as_deref(), Some("finished"));
}

#[test]
fn planner_crash_reports_planning_failed() {
    let mut config = config();
    config.planner = Arc::new(|_, _, _, _| panic!("solver exploded"));
    let server = TestServer::start(config);
    let mut a = server.client("a");
    let reply = a.request(plan_request("prm"), WAIT).unwrap();
    let Message::PlanResponse(r) = reply.message else {
        panic!("expected plan_response, got {reply:?}");
    };
    assert_eq!(r.response.status, PlanStatus::PlanningFailed);
    assert!(r.response.message.unwrap().contains("solver exploded"));
    a.request(Message::PlannersRequest(Empty {}), WAIT).unwrap();
}

#[test]
fn overflowing_outbound_queue_drops_the_session() {
    let mut config = config();
    config.outbound_queue = 8;
    let server = TestServer::start(config);
    let mut stalled = server.subscriber("stalled");
    let mut writer = server.client("writer");

    // Each diff carries a 100 kB id, so a few hundred of them exceed what
    // the socket buffers can hold for a client that never reads.
    let big = CollisionObject::new(
        "x".repeat(100_000),
        Shape::sphere(0.1),
        Pose::from_translation(1.5, 1.5, 0.0),
    );
    for _ in 0..200 {
        writer
            .request(Message::SceneOp(SceneEdit::Add { object: big.clone() }), WAIT)
            .unwrap();
        writer
            .request(Message::SceneOp(SceneEdit::Remove { id: big.id.clone() }), WAIT)
            .unwrap();
    }
    let seen = read_until_closed(&mut stalled);
    let codes: Vec<_> = seen.iter().filter_map(error_code).collect();
    assert!(codes.iter().all(|&c| c == ErrorCode::Overloaded), "{codes:?}");
    assert!(seen.len() < 400, "the stalled session was cut off early");
    writer.request(Message::PlannersRequest(Empty {}), WAIT).unwrap();
}

#[test]
fn shutdown_sends_error_frames() {
    let server = TestServer::start(config());
    let addr = server.tcp;
    let mut a = server.subscriber("a");
    let mut b = server.client("b");
    server.shutdown();
    for client in [&mut a, &mut b] {
        let seen = read_until_closed(client);
        assert_eq!(
            seen.iter().filter_map(error_code).collect::<Vec<_>>(),
            vec![ErrorCode::ShuttingDown]
        );
    }
    assert!(matches!(Client::connect(addr, "late"), Err(ClientError::Io(_))));
}

struct RawReader {
    stream: std::net::TcpStream,
    decoder: planhub_core::protocol::FrameDecoder,
}

impl RawReader {
    fn new(stream: std::net::TcpStream) -> Self {
        Self {
            stream,
            decoder: planhub_core::protocol::FrameDecoder::new(),
        }
    }

    fn next(&mut self) -> planhub_core::protocol::Envelope {
        let mut buf = [0u8; 4096];
        loop {
            if let Some(m) = self.decoder.next_message() {
                return m.unwrap();
            }
            let n = self.stream.read(&mut buf).unwrap();
            assert!(n > 0, "connection closed early");
            self.decoder.push(&buf[..n]);
        }
    }

    fn closed(&mut self) -> bool {
        let mut buf = [0u8; 16];
        matches!(self.stream.read(&mut buf), Ok(0) | Err(_))
    }
}

#[test]
fn server_seed_makes_unseeded_plans_repeat() {
    let run = || {
        let mut config = config();
        config.seed = Some(9);
        let server = TestServer::start(config);
        let mut a = server.client("a");
        let Message::PlanRequest(mut request) = plan_request("rrt_connect") else {
            unreachable!()
        };
        request.seed = None;
        let reply = a
            .request(Message::PlanRequest(request), Duration::from_secs(10))
            .unwrap();
        let Message::PlanResponse(r) = reply.message else {
            panic!("expected plan_response");
        };
        assert_eq!(r.response.status, PlanStatus::Success);
        r.response.trajectory.unwrap()
    };
    assert_eq!(run(), run());
}
