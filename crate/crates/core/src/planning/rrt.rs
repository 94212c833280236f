//! Bidirectional RRT with extend/connect alternation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::validity::{StateValidator, StopReason, StopSignal};
use super::PlannerFailure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtConnectParams {
    /// Maximum extension length in the joint-space metric, radians.
    pub step: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RrtConnectParams {
    fn default() -> Self {
        Self {
            step: 0.3,
            max_iterations: 5000,
            seed: 0,
        }
    }
}

struct Tree {
    nodes: Vec<Vec<f64>>,
    parents: Vec<Option<usize>>,
}

impl Tree {
    fn new(root: &[f64]) -> Self {
        Self {
            nodes: vec![root.to_vec()],
            parents: vec![None],
        }
    }

    fn nearest(&self, validator: &dyn StateValidator, q: &[f64]) -> usize {
        let space = validator.space();
        let mut best = (f64::INFINITY, 0);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = space.distance(n, q);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn push(&mut self, q: Vec<f64>, parent: usize) -> usize {
        self.nodes.push(q);
        self.parents.push(Some(parent));
        self.nodes.len() - 1
    }

    /// Nodes from the root down to `i`.
    fn branch(&self, mut i: usize) -> Vec<Vec<f64>> {
        let mut out = vec![self.nodes[i].clone()];
        while let Some(p) = self.parents[i] {
            out.push(self.nodes[p].clone());
            i = p;
        }
        out.reverse();
        out
    }
}

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

fn extend(tree: &mut Tree, validator: &dyn StateValidator, q: &[f64], step: f64) -> Extend {
    let near = tree.nearest(validator, q);
    let q_new = validator.space().steer(&tree.nodes[near], q, step);
    if !validator.edge_valid(&tree.nodes[near], &q_new) {
        return Extend::Trapped;
    }
    let reached = q_new.as_slice() == q;
    let i = tree.push(q_new, near);
    if reached {
        Extend::Reached(i)
    } else {
        Extend::Advanced(i)
    }
}

fn connect(tree: &mut Tree, validator: &dyn StateValidator, q: &[f64], step: f64) -> Extend {
    loop {
        match extend(tree, validator, q, step) {
            Extend::Advanced(_) => continue,
            other => return other,
        }
    }
}

/// Path from `start` to `goal` whose consecutive pairs all pass
/// `validator.edge_valid`. Both endpoints must already be valid.
pub fn rrt_connect(
    start: &[f64],
    goal: &[f64],
    validator: &dyn StateValidator,
    params: &RrtConnectParams,
    stop: &StopSignal,
) -> Result<Vec<Vec<f64>>, PlannerFailure> {
    if start == goal {
        return Ok(vec![start.to_vec()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut a = Tree::new(start);
    let mut b = Tree::new(goal);
    // true while `a` is rooted at the start
    let mut a_is_start = true;
    for _ in 0..params.max_iterations {
        if let Some(reason) = stop.check() {
            return Err(reason.into());
        }
        let q_rand = validator.space().sample(&mut rng);
        if let Extend::Advanced(i) | Extend::Reached(i) = extend(&mut a, validator, &q_rand, params.step) {
            let target = a.nodes[i].clone();
            if let Extend::Reached(j) = connect(&mut b, validator, &target, params.step) {
                let (start_tree, si, goal_tree, gi) = if a_is_start { (&a, i, &b, j) } else { (&b, j, &a, i) };
                let mut path = start_tree.branch(si);
                let mut tail = goal_tree.branch(gi);
                tail.reverse();
                // both branches end at the shared junction state
                path.extend(tail.into_iter().skip(1));
                return Ok(path);
            }
        }
        std::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    Err(PlannerFailure::IterationsExhausted)
}

impl From<StopReason> for PlannerFailure {
    fn from(r: StopReason) -> Self {
        match r {
            StopReason::Deadline => PlannerFailure::TimedOut,
            StopReason::Cancelled => PlannerFailure::Cancelled,
        }
    }
}
