use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::validity::StateValidator;
use crate::space::JointSpace;

pub fn path_length(space: &JointSpace, path: &[Vec<f64>]) -> f64 {
    path.windows(2).map(|w| space.distance(&w[0], &w[1])).sum()
}

/// Random shortcutting. Each iteration picks two points on the path and
/// splices in the direct segment between them when every new edge is valid
/// and the path gets shorter (or loses waypoints without getting longer).
/// Endpoints are never moved.
pub fn shortcut(path: &[Vec<f64>], validator: &dyn StateValidator, iterations: usize, seed: u64) -> Vec<Vec<f64>> {
    let space = validator.space();
    let mut current = path.to_vec();
    if current.len() < 3 {
        return current;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut length = path_length(space, &current);
    for _ in 0..iterations {
        let segments = current.len() - 1;
        if segments < 2 {
            break;
        }
        let candidate = if rng.random_bool(0.5) {
            // vertex shortcut
            let i = rng.random_range(0..segments - 1);
            let j = rng.random_range(i + 2..=segments);
            if !validator.edge_valid(&current[i], &current[j]) {
                continue;
            }
            let mut c = current[..=i].to_vec();
            c.extend_from_slice(&current[j..]);
            c
        } else {
            // points inside two different segments
            let sa = rng.random_range(0..segments);
            let sb = rng.random_range(0..segments);
            if sa == sb {
                continue;
            }
            let (sa, sb) = (sa.min(sb), sa.max(sb));
            let pa = space.interpolate(&current[sa], &current[sa + 1], rng.random::<f64>());
            let pb = space.interpolate(&current[sb], &current[sb + 1], rng.random::<f64>());
            if !validator.edge_valid(&current[sa], &pa)
                || !validator.edge_valid(&pa, &pb)
                || !validator.edge_valid(&pb, &current[sb + 1])
            {
                continue;
            }
            let mut c = current[..=sa].to_vec();
            c.push(pa);
            c.push(pb);
            c.extend_from_slice(&current[sb + 1..]);
            c.dedup();
            c
        };
        let new_length = path_length(space, &candidate);
        if new_length < length || (new_length <= length && candidate.len() < current.len()) {
            current = candidate;
            length = new_length;
        }
    }
    current
}
