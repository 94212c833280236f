use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use crate::collision::CollisionChecker;
use crate::space::JointSpace;

/// Ratio between the requested edge step and the finest bisection spacing.
pub const EDGE_REFINEMENT: f64 = 8.0;

/// State and edge validity oracle used by the planners.
pub trait StateValidator: Sync {
    fn space(&self) -> &JointSpace;

    fn is_valid(&self, q: &[f64]) -> bool;

    /// Both endpoints and every intermediate state at the validator's
    /// resolution are valid.
    fn edge_valid(&self, a: &[f64], b: &[f64]) -> bool;
}

/// Validity against a robot and a set of scene objects.
///
/// Edges are certified collision-free along their whole length (see
/// [`CollisionChecker::edge_certified`]), bisecting no finer than
/// `edge_step / EDGE_REFINEMENT`. Any discrete sweep of an accepted edge
/// therefore finds no collision, whatever its resolution.
#[derive(Debug, Clone)]
pub struct SceneValidator<'m> {
    checker: CollisionChecker<'m>,
    edge_step: f64,
}

impl<'m> SceneValidator<'m> {
    pub fn new(checker: CollisionChecker<'m>, edge_step: f64) -> Self {
        Self { checker, edge_step }
    }

    pub fn checker(&self) -> &CollisionChecker<'m> {
        &self.checker
    }

    pub fn edge_step(&self) -> f64 {
        self.edge_step
    }
}

impl StateValidator for SceneValidator<'_> {
    fn space(&self) -> &JointSpace {
        self.checker.space()
    }

    fn is_valid(&self, q: &[f64]) -> bool {
        self.checker.is_valid(q)
    }

    fn edge_valid(&self, a: &[f64], b: &[f64]) -> bool {
        self.checker.edge_certified(a, b, self.edge_step / EDGE_REFINEMENT)
    }
}

/// Why a planner gave up early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Deadline,
    Cancelled,
}

/// Deadline plus an optional external cancel flag, polled by planners at
/// iteration boundaries.
#[derive(Debug, Clone, Default)]
pub struct StopSignal {
    deadline: Option<Instant>,
    cancel: Option<Arc<AtomicBool>>,
}

impl StopSignal {
    pub fn never() -> Self {
        Self::default()
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    pub fn check(&self) -> Option<StopReason> {
        if self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Some(StopReason::Cancelled);
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Some(StopReason::Deadline);
        }
        None
    }
}
