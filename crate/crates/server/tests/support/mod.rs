#![allow(dead_code)]

use std::io::Write;
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use planhub_core::planning::{Trajectory, TrajectoryPoint};
use planhub_core::protocol::{Client, ClientError, Envelope, ErrorCode, Message};
use planhub_server::{start, ServerConfig, ServerHandle};

pub const WAIT: Duration = Duration::from_secs(5);
pub const QUIET: Duration = Duration::from_millis(300);

/// A server on its own runtime, driven from blocking test code.
pub struct TestServer {
    pub rt: tokio::runtime::Runtime,
    handle: Option<ServerHandle>,
    pub tcp: SocketAddr,
    pub ws: SocketAddr,
}

impl TestServer {
    pub fn start(config: ServerConfig) -> Self {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let handle = rt.block_on(start(config)).unwrap();
        let (tcp, ws) = (handle.tcp_addr(), handle.ws_addr());
        Self {
            rt,
            handle: Some(handle),
            tcp,
            ws,
        }
    }

    /// Connects and waits until the hello has been processed.
    pub fn client(&self, name: &str) -> Client {
        let mut client = Client::connect(self.tcp, name).unwrap();
        let reply = client
            .request(Message::PlannersRequest(Default::default()), WAIT)
            .unwrap();
        assert!(matches!(reply.message, Message::Planners(_)), "{reply:?}");
        client
    }

    /// Connects and requests a snapshot so scene diffs flow.
    pub fn subscriber(&self, name: &str) -> Client {
        let mut client = self.client(name);
        let reply = client
            .request(Message::SnapshotRequest(Default::default()), WAIT)
            .unwrap();
        assert!(matches!(reply.message, Message::Snapshot(_)), "{reply:?}");
        client
    }

    pub fn raw(&self) -> TcpStream {
        let stream = TcpStream::connect(self.tcp).unwrap();
        stream.set_read_timeout(Some(WAIT)).unwrap();
        stream
    }

    pub fn shutdown(mut self) {
        if let Some(handle) = self.handle.take() {
            self.rt.block_on(handle.shutdown());
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(handle) = self.handle.take() {
            self.rt.block_on(handle.shutdown());
        }
    }
}

pub fn write_raw(stream: &mut TcpStream, payload: &[u8]) {
    stream.write_all(&(payload.len() as u32).to_be_bytes()).unwrap();
    stream.write_all(payload).unwrap();
}

pub fn error_code(envelope: &Envelope) -> Option<ErrorCode> {
    match &envelope.message {
        Message::Error(body) => Some(body.code),
        _ => None,
    }
}

/// Reads until the server closes the connection; returns what arrived.
pub fn read_until_closed(client: &mut Client) -> Vec<Envelope> {
    let mut seen = Vec::new();
    loop {
        match client.recv(WAIT) {
            Ok(e) => seen.push(e),
            Err(ClientError::Closed) | Err(ClientError::Io(_)) => return seen,
            Err(e) => panic!("expected the server to close the connection, got {e}"),
        }
    }
}

/// Two-joint trajectory resting at each end, `duration` seconds long.
pub fn straight_trajectory(from: [f64; 2], to: [f64; 2], duration: f64) -> Trajectory {
    let mid = [(from[0] + to[0]) / 2.0, (from[1] + to[1]) / 2.0];
    let v = [(to[0] - from[0]) / duration, (to[1] - from[1]) / duration];
    Trajectory {
        group: "default".into(),
        continuous: Vec::new(),
        points: vec![
            TrajectoryPoint {
                time_from_start: 0.0,
                positions: from.to_vec(),
                velocities: vec![0.0, 0.0],
            },
            TrajectoryPoint {
                time_from_start: duration / 2.0,
                positions: mid.to_vec(),
                velocities: vec![1.5 * v[0], 1.5 * v[1]],
            },
            TrajectoryPoint {
                time_from_start: duration,
                positions: to.to_vec(),
                velocities: vec![0.0, 0.0],
            },
        ],
    }
}
