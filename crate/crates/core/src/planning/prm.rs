//! k-nearest probabilistic roadmap.

use std::collections::HashMap;

use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::validity::{StateValidator, StopSignal};
use super::PlannerFailure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrmParams {
    /// Valid samples added besides start and goal.
    pub num_samples: usize,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for PrmParams {
    fn default() -> Self {
        Self {
            num_samples: 500,
            k_neighbors: 10,
            seed: 0,
        }
    }
}

/// Vertices and validated edges. Vertex 0 is the start and vertex 1 the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct Roadmap {
    pub vertices: Vec<Vec<f64>>,
    /// `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
}

/// Builds the roadmap. Sampling gives up after `20 * num_samples` draws.
pub fn build_roadmap(
    start: &[f64],
    goal: &[f64],
    validator: &dyn StateValidator,
    params: &PrmParams,
    stop: &StopSignal,
) -> Result<Roadmap, PlannerFailure> {
    let space = validator.space();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut vertices = vec![start.to_vec(), goal.to_vec()];
    let mut draws = 0;
    while vertices.len() < params.num_samples + 2 && draws < 20 * params.num_samples {
        draws += 1;
        if draws % 64 == 0 {
            if let Some(r) = stop.check() {
                return Err(r.into());
            }
        }
        let q = space.sample(&mut rng);
        if validator.is_valid(&q) {
            vertices.push(q);
        }
    }

    let mut tried: HashMap<(usize, usize), bool> = HashMap::new();
    let mut edges = Vec::new();
    let mut by_distance: Vec<(f64, usize)> = Vec::with_capacity(vertices.len());
    for i in 0..vertices.len() {
        if let Some(r) = stop.check() {
            return Err(r.into());
        }
        by_distance.clear();
        by_distance.extend(
            vertices
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, v)| (space.distance(&vertices[i], v), j)),
        );
        let k = params.k_neighbors.min(by_distance.len());
        if k == 0 {
            continue;
        }
        by_distance.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        by_distance[..k].sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &by_distance[..k] {
            let key = (i.min(j), i.max(j));
            if tried.contains_key(&key) {
                continue;
            }
            let ok = validator.edge_valid(&vertices[key.0], &vertices[key.1]);
            tried.insert(key, ok);
            if ok {
                edges.push(key);
            }
        }
    }
    edges.sort_unstable();
    Ok(Roadmap { vertices, edges })
}

/// Shortest roadmap path from vertex 0 to vertex 1.
pub fn search_roadmap(roadmap: &Roadmap, validator: &dyn StateValidator) -> Option<Vec<Vec<f64>>> {
    let space = validator.space();
    let mut graph: UnGraph<(), f64> = UnGraph::with_capacity(roadmap.vertices.len(), roadmap.edges.len());
    for _ in &roadmap.vertices {
        graph.add_node(());
    }
    for &(i, j) in &roadmap.edges {
        let w = space.distance(&roadmap.vertices[i], &roadmap.vertices[j]);
        graph.add_edge(NodeIndex::new(i), NodeIndex::new(j), w);
    }
    let goal = NodeIndex::new(1);
    let (_, nodes) = astar(&graph, NodeIndex::new(0), |n| n == goal, |e| *e.weight(), |_| 0.0)?;
    Some(nodes.into_iter().map(|n| roadmap.vertices[n.index()].clone()).collect())
}

pub fn prm(
    start: &[f64],
    goal: &[f64],
    validator: &dyn StateValidator,
    params: &PrmParams,
    stop: &StopSignal,
) -> Result<Vec<Vec<f64>>, PlannerFailure> {
    if start == goal {
        return Ok(vec![start.to_vec()]);
    }
    if validator.edge_valid(start, goal) {
        return Ok(vec![start.to_vec(), goal.to_vec()]);
    }
    let roadmap = build_roadmap(start, goal, validator, params, stop)?;
    search_roadmap(&roadmap, validator).ok_or(PlannerFailure::NoPath)
}
