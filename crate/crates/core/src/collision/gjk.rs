//! GJK distance and EPA penetration depth between convex support-mapped
//! cores.
//!
//! Round shapes are split into a core plus a margin: a sphere is a point with
//! margin r, a capsule a segment with margin r. Boxes and cylinders have no
//! margin. Distances computed here are between cores only.

use nalgebra::{Isometry3, Vector3};

type V3 = Vector3<f64>;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Core {
    Point(V3),
    Segment(V3, V3),
    Box {
        pose: Isometry3<f64>,
        half: V3,
    },
    Cylinder {
        pose: Isometry3<f64>,
        radius: f64,
        half_length: f64,
    },
}

impl Core {
    pub fn support(&self, d: &V3) -> V3 {
        match self {
            Core::Point(p) => *p,
            Core::Segment(a, b) => {
                if d.dot(&(b - a)) > 0.0 {
                    *b
                } else {
                    *a
                }
            }
            Core::Box { pose, half } => {
                let l = pose.rotation.inverse_transform_vector(d);
                let s = V3::new(half.x.copysign(l.x), half.y.copysign(l.y), half.z.copysign(l.z));
                (pose * nalgebra::Point3::from(s)).coords
            }
            Core::Cylinder {
                pose,
                radius,
                half_length,
            } => {
                let l = pose.rotation.inverse_transform_vector(d);
                let r = (l.x * l.x + l.y * l.y).sqrt();
                let (sx, sy) = if r > 1e-300 {
                    (radius * l.x / r, radius * l.y / r)
                } else {
                    (0.0, 0.0)
                };
                let s = V3::new(sx, sy, half_length.copysign(l.z));
                (pose * nalgebra::Point3::from(s)).coords
            }
        }
    }

    pub fn center(&self) -> V3 {
        match self {
            Core::Point(p) => *p,
            Core::Segment(a, b) => (a + b) / 2.0,
            Core::Box { pose, .. } | Core::Cylinder { pose, .. } => pose.translation.vector,
        }
    }
}

/// Support point of the Minkowski difference `A - B`.
fn support(a: &Core, b: &Core, d: &V3) -> V3 {
    a.support(d) - b.support(&-d)
}

#[derive(Debug, Clone)]
pub(crate) enum GjkResult {
    Separated(f64),
    /// Cores overlap; the simplex is handed to EPA.
    Intersecting(Vec<V3>),
}

const GJK_MAX_ITERATIONS: usize = 256;
const GJK_REL_TOLERANCE: f64 = 1e-12;
const GJK_ABS_TOLERANCE: f64 = 1e-24;

pub(crate) fn gjk(a: &Core, b: &Core) -> GjkResult {
    let mut dir = a.center() - b.center();
    if dir.norm_squared() < 1e-24 {
        dir = V3::x();
    }
    let mut v = support(a, b, &-dir);
    let mut simplex: Vec<V3> = vec![v];
    let mut best_sq = v.norm_squared();
    if best_sq <= GJK_ABS_TOLERANCE {
        return GjkResult::Intersecting(simplex);
    }

    for _ in 0..GJK_MAX_ITERATIONS {
        let w = support(a, b, &-v);
        let vv = v.norm_squared();
        // no further progress possible toward the origin
        if vv - v.dot(&w) <= GJK_REL_TOLERANCE * vv {
            return GjkResult::Separated(vv.sqrt());
        }
        if simplex
            .iter()
            .any(|p| (p - w).norm_squared() <= GJK_ABS_TOLERANCE.max(1e-30 * vv))
        {
            return GjkResult::Separated(vv.sqrt());
        }
        simplex.push(w);
        let (closest, reduced) = closest_on_simplex(&simplex);
        let Some(closest) = closest else {
            // origin enclosed by the tetrahedron
            return GjkResult::Intersecting(simplex);
        };
        simplex = reduced;
        let cc = closest.norm_squared();
        if cc <= GJK_ABS_TOLERANCE {
            return GjkResult::Intersecting(simplex);
        }
        if cc >= best_sq {
            // numerical stall; the previous estimate is the best we have
            return GjkResult::Separated(best_sq.min(cc).sqrt());
        }
        best_sq = cc;
        v = closest;
    }
    GjkResult::Separated(best_sq.sqrt())
}

/// Closest point of the simplex to the origin and the smallest sub-simplex
/// supporting it. Returns `None` when a tetrahedron contains the origin.
fn closest_on_simplex(s: &[V3]) -> (Option<V3>, Vec<V3>) {
    match s.len() {
        1 => (Some(s[0]), s.to_vec()),
        2 => {
            let (p, keep) = closest_on_segment(s[0], s[1]);
            (Some(p), keep)
        }
        3 => {
            let (p, keep) = closest_on_triangle(s[0], s[1], s[2]);
            (Some(p), keep)
        }
        4 => closest_on_tetrahedron(s[0], s[1], s[2], s[3]),
        _ => unreachable!("simplex has at most four vertices"),
    }
}

fn closest_on_segment(a: V3, b: V3) -> (V3, Vec<V3>) {
    let ab = b - a;
    let denom = ab.norm_squared();
    if denom <= 1e-300 {
        return (a, vec![a]);
    }
    let t = -a.dot(&ab) / denom;
    if t <= 0.0 {
        (a, vec![a])
    } else if t >= 1.0 {
        (b, vec![b])
    } else {
        (a + ab * t, vec![a, b])
    }
}

/// Voronoi-region walk over the triangle (origin as query point).
fn closest_on_triangle(a: V3, b: V3, c: V3) -> (V3, Vec<V3>) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, vec![a]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, vec![b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, vec![a, b]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, vec![c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, vec![a, c]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, vec![b, c]);
    }
    let sum = va + vb + vc;
    if sum.abs() <= 1e-300 {
        // degenerate triangle: fall back to its edges
        return [(a, b), (b, c), (a, c)]
            .into_iter()
            .map(|(p, q)| closest_on_segment(p, q))
            .min_by(|x, y| x.0.norm_squared().total_cmp(&y.0.norm_squared()))
            .expect("three edges");
    }
    let denom = 1.0 / sum;
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, vec![a, b, c])
}

fn closest_on_tetrahedron(a: V3, b: V3, c: V3, d: V3) -> (Option<V3>, Vec<V3>) {
    // origin and the opposite vertex on different sides of a face plane
    let outside = |p: V3, q: V3, r: V3, opposite: V3| -> bool {
        let n = (q - p).cross(&(r - p));
        let sign_origin = (-p).dot(&n);
        let sign_opp = (opposite - p).dot(&n);
        sign_origin * sign_opp < 0.0
    };
    let faces = [(a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a)];
    let volume = (b - a).cross(&(c - a)).dot(&(d - a));
    let scale = [b - a, c - a, d - a]
        .iter()
        .fold(0.0f64, |m, e| m.max(e.norm_squared()));
    if volume.abs() <= 1e-12 * scale.powf(1.5) {
        // flat tetrahedron: cannot enclose the origin, use its faces
        let (p, keep) = faces
            .iter()
            .map(|&(p, q, r, _)| closest_on_triangle(p, q, r))
            .min_by(|x, y| x.0.norm_squared().total_cmp(&y.0.norm_squared()))
            .expect("four faces");
        return (Some(p), keep);
    }
    let mut best: Option<(V3, Vec<V3>)> = None;
    let mut any_outside = false;
    for (p, q, r, opp) in faces {
        if outside(p, q, r, opp) {
            any_outside = true;
            let (pt, keep) = closest_on_triangle(p, q, r);
            if best
                .as_ref()
                .is_none_or(|(bp, _)| pt.norm_squared() < bp.norm_squared())
            {
                best = Some((pt, keep));
            }
        }
    }
    match best {
        Some((p, keep)) => (Some(p), keep),
        None if !any_outside => (None, vec![a, b, c, d]),
        None => unreachable!(),
    }
}

const EPA_MAX_ITERATIONS: usize = 512;
const EPA_TOLERANCE: f64 = 1e-9;
const EPA_MAX_FACES: usize = 4096;

#[derive(Clone, Copy)]
struct Face {
    idx: [usize; 3],
    normal: V3,
    dist: f64,
}

fn make_face(pts: &[V3], i: usize, j: usize, k: usize, interior: &V3) -> Option<Face> {
    let n = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
    let len = n.norm();
    if len < 1e-14 {
        return None;
    }
    let mut normal = n / len;
    let mut idx = [i, j, k];
    if normal.dot(&(pts[i] - interior)) < 0.0 {
        normal = -normal;
        idx = [i, k, j];
    }
    Some(Face {
        idx,
        normal,
        dist: normal.dot(&pts[i]),
    })
}

/// Twice the area below which a triangle counts as flat.
const FLAT_TRIANGLE: f64 = 1e-14;

/// Grows the GJK simplex into a tetrahedron spanning three dimensions.
fn blow_up(a: &Core, b: &Core, mut simplex: Vec<V3>) -> Option<Vec<V3>> {
    let axes = [
        V3::x(),
        V3::y(),
        V3::z(),
        -V3::x(),
        -V3::y(),
        -V3::z(),
        V3::new(1.0, 1.0, 1.0).normalize(),
        V3::new(-1.0, -1.0, -1.0).normalize(),
    ];
    let eps = 1e-10;
    let mut attempts = 0;
    while simplex.len() < 4 {
        attempts += 1;
        if attempts > 16 {
            return None;
        }
        let added = match simplex.len() {
            1 => axes.iter().find_map(|d| {
                let w = support(a, b, d);
                ((w - simplex[0]).norm() > eps).then_some(w)
            }),
            2 => {
                let line = (simplex[1] - simplex[0]).normalize();
                let seed = if line.x.abs() < 0.6 { V3::x() } else { V3::y() };
                let perp = line.cross(&seed).normalize();
                (0..6).find_map(|k| {
                    let rot =
                        nalgebra::UnitQuaternion::from_scaled_axis(line * (k as f64 * std::f64::consts::PI / 3.0));
                    let w = support(a, b, &(rot * perp));
                    let normal = (simplex[1] - simplex[0]).cross(&(w - simplex[0]));
                    (normal.norm() > FLAT_TRIANGLE).then_some(w)
                })
            }
            _ => {
                let n = (simplex[1] - simplex[0]).cross(&(simplex[2] - simplex[0]));
                if n.norm() <= FLAT_TRIANGLE {
                    simplex.pop();
                    continue;
                }
                let n = n.normalize();
                [n, -n].iter().find_map(|d| {
                    let w = support(a, b, d);
                    ((w - simplex[0]).dot(&n).abs() > eps).then_some(w)
                })
            }
        };
        simplex.push(added?);
    }
    Some(simplex)
}

/// Penetration depth of two overlapping cores. Returns 0 for contacts that
/// are flat in some direction (touching, zero-volume overlap).
pub(crate) fn epa(a: &Core, b: &Core, simplex: Vec<V3>) -> f64 {
    let Some(mut pts) = blow_up(a, b, simplex) else {
        return 0.0;
    };
    let interior = (pts[0] + pts[1] + pts[2] + pts[3]) / 4.0;
    let mut faces: Vec<Face> = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
        .iter()
        .filter_map(|&(i, j, k)| make_face(&pts, i, j, k, &interior))
        .collect();
    if faces.len() < 4 {
        return 0.0;
    }

    let mut best = f64::INFINITY;
    for _ in 0..EPA_MAX_ITERATIONS {
        let Some(face) = faces.iter().min_by(|x, y| x.dist.total_cmp(&y.dist)).copied() else {
            break;
        };
        best = face.dist.max(0.0);
        let w = support(a, b, &face.normal);
        let gain = w.dot(&face.normal) - face.dist;
        if gain <= EPA_TOLERANCE {
            return best;
        }
        let wi = pts.len();
        pts.push(w);

        // remove faces visible from w and collect the horizon
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let mut kept = Vec::with_capacity(faces.len());
        for f in faces.drain(..) {
            if f.normal.dot(&(w - pts[f.idx[0]])) > 1e-14 {
                for e in [(f.idx[0], f.idx[1]), (f.idx[1], f.idx[2]), (f.idx[2], f.idx[0])] {
                    if let Some(pos) = horizon.iter().position(|&(p, q)| p == e.1 && q == e.0) {
                        horizon.swap_remove(pos);
                    } else {
                        horizon.push(e);
                    }
                }
            } else {
                kept.push(f);
            }
        }
        faces = kept;
        for (p, q) in horizon {
            // A sliver face would leave a hole in the polytope; stop with
            // the depth found so far.
            let Some(face) = make_face(&pts, p, q, wi, &interior) else {
                return best;
            };
            faces.push(face);
        }
        if faces.is_empty() || faces.len() > EPA_MAX_FACES {
            break;
        }
    }
    best
}
