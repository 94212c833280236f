use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use planhub_core::planning::{plan_cancellable, MotionPlanRequest, MotionPlanResponse, Trajectory};
use planhub_core::scene::{CollisionObject, PlanningScene, SceneFile};
use planhub_core::RobotModel;

use crate::executor::{ExecutorAdapter, MockExecutor};

pub const DEFAULT_TCP_PORT: u16 = 7462;
pub const DEFAULT_WS_PORT: u16 = 7463;
pub const DEFAULT_PLANNING_WORKERS: usize = 2;
pub const DEFAULT_OUTBOUND_QUEUE: usize = 1000;

/// Computes one plan. Runs on a blocking worker thread; the flag is raised
/// when the result is no longer wanted.
pub type PlannerFn = Arc<
    dyn Fn(&RobotModel, &[CollisionObject], &MotionPlanRequest, Arc<AtomicBool>) -> MotionPlanResponse + Send + Sync,
>;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

#[derive(Clone)]
pub struct ServerConfig {
    pub model: Arc<RobotModel>,
    pub scene: PlanningScene,
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    /// Served over HTTP next to the WebSocket endpoint.
    pub static_dir: Option<PathBuf>,
    /// Seeds every plan and IK request that does not carry its own seed.
    pub seed: Option<u64>,
    pub planning_workers: usize,
    pub outbound_queue: usize,
    /// Recorded joint motion replayed while mirroring is enabled.
    pub mirror_source: Option<Arc<Trajectory>>,
    pub executor: Arc<dyn ExecutorAdapter>,
    pub planner: PlannerFn,
}

impl ServerConfig {
    /// Defaults: all interfaces on the standard ports, an empty scene with
    /// the robot at its zero configuration.
    pub fn new(model: RobotModel) -> Self {
        let mut scene = PlanningScene::new();
        let group = model.primary_group().name.clone();
        scene.replace_robot_state(model.zero_state(&group).expect("primary group exists"));
        Self {
            model: Arc::new(model),
            scene,
            tcp_addr: SocketAddr::from((Ipv4Addr::UNSPECIFIED, DEFAULT_TCP_PORT)),
            ws_addr: SocketAddr::from((Ipv4Addr::UNSPECIFIED, DEFAULT_WS_PORT)),
            static_dir: None,
            seed: None,
            planning_workers: DEFAULT_PLANNING_WORKERS,
            outbound_queue: DEFAULT_OUTBOUND_QUEUE,
            mirror_source: None,
            executor: Arc::new(MockExecutor::default()),
            planner: Arc::new(|model, objects, req, cancel| plan_cancellable(model, objects, req, Some(cancel))),
        }
    }

    /// Both listeners on ephemeral loopback ports.
    pub fn loopback(model: RobotModel) -> Self {
        Self {
            tcp_addr: SocketAddr::from((Ipv4Addr::LOCALHOST, 0)),
            ws_addr: SocketAddr::from((Ipv4Addr::LOCALHOST, 0)),
            ..Self::new(model)
        }
    }

    /// Replaces the scene with the contents of a scene file. A missing robot
    /// state keeps the current one.
    pub fn with_scene_file(mut self, file: &SceneFile) -> Result<Self, ServerError> {
        let violations = file.violations();
        if let Some(v) = violations.first() {
            return Err(ServerError::Config(format!(
                "scene object {:?}: {}",
                v.object, v.message
            )));
        }
        let current = self.scene.robot_state().cloned();
        let mut scene = PlanningScene::from_file(file).map_err(|e| ServerError::Config(e.to_string()))?;
        match &file.robot_state {
            Some(q) => {
                let group = self
                    .model
                    .group(&q.group)
                    .map_err(|e| ServerError::Config(e.to_string()))?;
                self.model
                    .check_dimension(group, q)
                    .map_err(|e| ServerError::Config(e.to_string()))?;
            }
            None => {
                if let Some(q) = current {
                    scene.replace_robot_state(q);
                }
            }
        }
        self.scene = scene;
        Ok(self)
    }
}
