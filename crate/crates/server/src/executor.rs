use std::sync::Arc;
use std::time::Duration;

use planhub_core::planning::Trajectory;
use planhub_core::JointState;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::{sleep_until, Instant};

use crate::hub::HubEvent;

/// Robot state publication rate during execution.
pub const EXECUTOR_RATE_HZ: f64 = 50.0;

/// Channel back to the server for one execution.
#[derive(Debug, Clone)]
pub struct ExecutionFeedback {
    execution_id: u64,
    group: String,
    tx: mpsc::Sender<HubEvent>,
}

impl ExecutionFeedback {
    pub(crate) fn new(execution_id: u64, group: String, tx: mpsc::Sender<HubEvent>) -> Self {
        Self {
            execution_id,
            group,
            tx,
        }
    }

    /// Reports the robot's current joint positions. Returns false once the
    /// server has gone away.
    pub async fn state(&self, positions: Vec<f64>, progress: f64) -> bool {
        self.tx
            .send(HubEvent::ExecutionState {
                execution_id: self.execution_id,
                state: JointState::new(self.group.clone(), positions),
                progress,
            })
            .await
            .is_ok()
    }

    pub async fn done(self) {
        let _ = self
            .tx
            .send(HubEvent::ExecutionDone {
                execution_id: self.execution_id,
            })
            .await;
    }
}

/// Drives a robot along a trajectory. The returned task is aborted when the
/// execution is stopped.
pub trait ExecutorAdapter: Send + Sync {
    fn execute(&self, trajectory: Trajectory, playback_rate: f64, feedback: ExecutionFeedback) -> JoinHandle<()>;
}

/// Replays trajectories in real time without hardware.
#[derive(Debug, Clone)]
pub struct MockExecutor {
    pub rate_hz: f64,
}

impl Default for MockExecutor {
    fn default() -> Self {
        Self {
            rate_hz: EXECUTOR_RATE_HZ,
        }
    }
}

impl ExecutorAdapter for MockExecutor {
    fn execute(&self, trajectory: Trajectory, playback_rate: f64, feedback: ExecutionFeedback) -> JoinHandle<()> {
        let period = 1.0 / self.rate_hz;
        tokio::spawn(async move {
            let duration = trajectory.duration();
            let start = Instant::now();
            for t in sample_times(&trajectory, period) {
                sleep_until(start + Duration::from_secs_f64(t / playback_rate)).await;
                let (positions, _) = trajectory.sample(t);
                let progress = if duration > 0.0 { t / duration } else { 1.0 };
                if !feedback.state(positions, progress).await {
                    return;
                }
            }
            feedback.done().await;
        })
    }
}

/// Trajectory times to publish: a regular grid at `period` merged with every
/// knot time, so each stored point is published exactly.
fn sample_times(trajectory: &Trajectory, period: f64) -> Vec<f64> {
    let duration = trajectory.duration();
    let ticks = (duration / period).floor() as usize;
    let mut times: Vec<f64> = (0..=ticks).map(|k| k as f64 * period).collect();
    times.extend(trajectory.points.iter().map(|p| p.time_from_start.clamp(0.0, duration)));
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Publishes every recorded point at its recorded time, once.
pub(crate) fn replay_mirror(source: Arc<Trajectory>, tx: mpsc::Sender<HubEvent>) -> JoinHandle<()> {
    tokio::spawn(async move {
        let start = Instant::now();
        for point in &source.points {
            sleep_until(start + Duration::from_secs_f64(point.time_from_start.max(0.0))).await;
            let state = JointState::new(source.group.clone(), point.positions.clone());
            if tx.send(HubEvent::MirrorState(state)).await.is_err() {
                return;
            }
        }
    })
}
