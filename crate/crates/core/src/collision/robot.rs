use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};

use super::distance::shape_distance;
use super::shape::{Aabb, Shape};
use crate::kinematics::link_poses_raw;
use crate::pose::Pose;
use crate::robot_model::{Group, JointKind, ModelError, RobotModel};
use crate::scene::CollisionObject;
use crate::space::JointSpace;
use crate::state::JointState;

/// Margin added to bounding boxes before any narrow-phase query.
pub const BROAD_PHASE_MARGIN: f64 = 0.1;

/// Joint-space resolution for edge checks, radians.
pub const DEFAULT_EDGE_STEP: f64 = 0.05;

/// Absorbs rounding in distance queries when certifying edges, meters.
const CERTIFY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionOptions {
    pub self_collision: bool,
    /// Inflation applied to every pairwise distance, meters.
    pub padding: f64,
}

impl Default for CollisionOptions {
    fn default() -> Self {
        Self {
            self_collision: true,
            padding: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContactPair {
    Object { link: String, object: String },
    Links { a: String, b: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub pair: ContactPair,
    pub penetration_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionReport {
    pub in_collision: bool,
    pub contacts: Vec<Contact>,
    /// Smallest padded distance between a robot link and a scene object;
    /// infinite when there are no objects.
    pub min_clearance: f64,
}

#[derive(Debug, Clone)]
struct PlacedObject {
    id: String,
    shape: Shape,
    pose: Pose,
    aabb: Aabb,
}

#[derive(Debug, Clone, Copy)]
struct SelfPair {
    link_a: usize,
    geom_a: usize,
    link_b: usize,
    geom_b: usize,
}

/// Collision queries for one group of one robot against a fixed set of
/// objects. Cheap to share across threads; holds no interior state.
#[derive(Debug, Clone)]
pub struct CollisionChecker<'m> {
    model: &'m RobotModel,
    group: &'m Group,
    space: JointSpace,
    objects: Vec<PlacedObject>,
    self_pairs: Vec<SelfPair>,
    options: CollisionOptions,
    /// Per actuated joint: how far a unit joint motion can move any point
    /// of the links it carries.
    lever: Vec<f64>,
}

impl<'m> CollisionChecker<'m> {
    pub fn new<'o>(
        model: &'m RobotModel,
        group: &str,
        objects: impl IntoIterator<Item = &'o CollisionObject>,
        options: CollisionOptions,
    ) -> Result<Self, ModelError> {
        let g = model.group(group)?;
        let objects = objects
            .into_iter()
            .map(|o| PlacedObject {
                id: o.id.clone(),
                shape: o.shape,
                pose: o.pose,
                aabb: o.shape.aabb(&o.pose),
            })
            .collect();
        let mut self_pairs = Vec::new();
        if options.self_collision {
            let links = model.links();
            for a in 0..links.len() {
                for b in a + 1..links.len() {
                    if model.links_adjacent(a, b) {
                        continue;
                    }
                    for ga in 0..links[a].collision.len() {
                        for gb in 0..links[b].collision.len() {
                            self_pairs.push(SelfPair {
                                link_a: a,
                                geom_a: ga,
                                link_b: b,
                                geom_b: gb,
                            });
                        }
                    }
                }
            }
        }
        let lever = g
            .actuated
            .iter()
            .map(|&j| {
                let joint = model.joint(j);
                if joint.kind == JointKind::Prismatic {
                    1.0
                } else {
                    model.link_index(&joint.child).map_or(0.0, |l| subtree_extent(model, l))
                }
            })
            .collect();
        Ok(Self {
            model,
            group: g,
            space: JointSpace::for_group(model, group)?,
            objects,
            self_pairs,
            options,
            lever,
        })
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn options(&self) -> CollisionOptions {
        self.options
    }

    fn geometry_poses(&self, q: &[f64]) -> Vec<Vec<Pose>> {
        let link_poses: Vec<Isometry3<f64>> = link_poses_raw(self.model, self.group, q);
        self.model
            .links()
            .iter()
            .zip(&link_poses)
            .map(|(link, iso)| {
                link.collision
                    .iter()
                    .map(|g| Pose::from_isometry(&(iso * g.origin.to_isometry())))
                    .collect()
            })
            .collect()
    }

    /// Full report: every link/object pair is measured exactly.
    pub fn report(&self, q: &[f64]) -> CollisionReport {
        let geoms = self.geometry_poses(q);
        let links = self.model.links();
        let padding = self.options.padding;
        let mut contacts = Vec::new();
        let mut min_clearance = f64::INFINITY;
        for (li, link) in links.iter().enumerate() {
            for obj in &self.objects {
                let mut worst: Option<f64> = None;
                for (gi, geom) in link.collision.iter().enumerate() {
                    let d = shape_distance(&geom.shape, &geoms[li][gi], &obj.shape, &obj.pose) - padding;
                    min_clearance = min_clearance.min(d);
                    if d < 0.0 {
                        worst = Some(worst.map_or(-d, |w: f64| w.max(-d)));
                    }
                }
                if let Some(depth) = worst {
                    contacts.push(Contact {
                        pair: ContactPair::Object {
                            link: link.name.clone(),
                            object: obj.id.clone(),
                        },
                        penetration_depth: depth,
                    });
                }
            }
        }
        let mut self_contacts: Vec<Contact> = Vec::new();
        for p in &self.self_pairs {
            let ga = &links[p.link_a].collision[p.geom_a];
            let gb = &links[p.link_b].collision[p.geom_b];
            let d = shape_distance(
                &ga.shape,
                &geoms[p.link_a][p.geom_a],
                &gb.shape,
                &geoms[p.link_b][p.geom_b],
            ) - padding;
            if d < 0.0 {
                let pair = ContactPair::Links {
                    a: links[p.link_a].name.clone(),
                    b: links[p.link_b].name.clone(),
                };
                match self_contacts.iter_mut().find(|c| c.pair == pair) {
                    Some(c) => c.penetration_depth = c.penetration_depth.max(-d),
                    None => self_contacts.push(Contact {
                        pair,
                        penetration_depth: -d,
                    }),
                }
            }
        }
        contacts.extend(self_contacts);
        CollisionReport {
            in_collision: !contacts.is_empty(),
            contacts,
            min_clearance,
        }
    }

    /// Limits plus collision test with broad-phase culling and early exit.
    pub fn is_valid(&self, q: &[f64]) -> bool {
        if !self.space.within_limits(q) {
            return false;
        }
        let geoms = self.geometry_poses(q);
        let links = self.model.links();
        let margin = BROAD_PHASE_MARGIN + self.options.padding;
        for (li, link) in links.iter().enumerate() {
            for (gi, geom) in link.collision.iter().enumerate() {
                let pose = &geoms[li][gi];
                let bounds = geom.shape.aabb(pose).inflate(margin);
                for obj in &self.objects {
                    if !bounds.intersects(&obj.aabb) {
                        continue;
                    }
                    if shape_distance(&geom.shape, pose, &obj.shape, &obj.pose) < self.options.padding {
                        return false;
                    }
                }
            }
        }
        for p in &self.self_pairs {
            let ga = &links[p.link_a].collision[p.geom_a];
            let gb = &links[p.link_b].collision[p.geom_b];
            let (pa, pb) = (&geoms[p.link_a][p.geom_a], &geoms[p.link_b][p.geom_b]);
            if !ga.shape.aabb(pa).inflate(margin).intersects(&gb.shape.aabb(pb)) {
                continue;
            }
            if shape_distance(&ga.shape, pa, &gb.shape, pb) < self.options.padding {
                return false;
            }
        }
        true
    }

    /// Upper bound on how far any point of the robot moves along the straight
    /// joint-space segment `a → b`.
    pub fn motion_bound(&self, a: &[f64], b: &[f64]) -> f64 {
        self.space
            .difference(a, b)
            .iter()
            .zip(&self.lever)
            .map(|(d, r)| d.abs() * r)
            .sum()
    }

    /// Padded clearance at `q`, capped at `cap`: the smallest link/object
    /// distance, and half the smallest distance between non-adjacent links.
    /// Negative when `q` is in collision or outside the limits.
    pub fn clearance(&self, q: &[f64], cap: f64) -> f64 {
        if !self.space.within_limits(q) {
            return f64::NEG_INFINITY;
        }
        let geoms = self.geometry_poses(q);
        let links = self.model.links();
        let padding = self.options.padding;
        let mut best = cap;
        for (li, link) in links.iter().enumerate() {
            for (gi, geom) in link.collision.iter().enumerate() {
                let pose = &geoms[li][gi];
                let bounds = geom.shape.aabb(pose).inflate(best + padding);
                for obj in &self.objects {
                    if !bounds.intersects(&obj.aabb) {
                        continue;
                    }
                    let d = shape_distance(&geom.shape, pose, &obj.shape, &obj.pose) - padding;
                    if d < best {
                        best = d;
                        if best < 0.0 {
                            return best;
                        }
                    }
                }
            }
        }
        for p in &self.self_pairs {
            let ga = &links[p.link_a].collision[p.geom_a];
            let gb = &links[p.link_b].collision[p.geom_b];
            let (pa, pb) = (&geoms[p.link_a][p.geom_a], &geoms[p.link_b][p.geom_b]);
            if !ga
                .shape
                .aabb(pa)
                .inflate(2.0 * best + padding)
                .intersects(&gb.shape.aabb(pb))
            {
                continue;
            }
            let d = 0.5 * (shape_distance(&ga.shape, pa, &gb.shape, pb) - padding);
            if d < best {
                best = d;
                if best < 0.0 {
                    return best;
                }
            }
        }
        best
    }

    /// Conservative continuous check of the straight segment `a → b`.
    ///
    /// A sub-interval is accepted once both of its ends have more clearance
    /// than half the interval's motion bound, since every state inside lies
    /// within that distance of one end. Otherwise it is bisected, down to a
    /// per-joint spacing of `min_spacing`, below which the segment is
    /// rejected. A `true` result means no state on the segment collides.
    pub fn edge_certified(&self, a: &[f64], b: &[f64], min_spacing: f64) -> bool {
        let need = |x: &[f64], y: &[f64]| 0.5 * self.motion_bound(x, y) + CERTIFY_SLACK;
        let top = need(a, b);
        let ca = self.clearance(a, 2.0 * top);
        if ca < 0.0 {
            return false;
        }
        let cb = self.clearance(b, 2.0 * top);
        if cb < 0.0 {
            return false;
        }
        let mut stack = vec![(a.to_vec(), ca, b.to_vec(), cb)];
        while let Some((qa, ca, qb, cb)) = stack.pop() {
            let n = need(&qa, &qb);
            if ca > n && cb > n {
                continue;
            }
            if self.space.max_joint_distance(&qa, &qb) <= min_spacing {
                return false;
            }
            let mid = self.space.interpolate(&qa, &qb, 0.5);
            let cm = self.clearance(&mid, n);
            if cm < 0.0 {
                return false;
            }
            stack.push((mid.clone(), cm, qb, cb));
            stack.push((qa, ca, mid, cm));
        }
        true
    }

    /// True iff every state on the dyadic subdivision of `a → b` with
    /// per-joint spacing at most `step` is valid, endpoints included.
    ///
    /// Subdivision points for a finer step are a superset of those for a
    /// coarser one, so refining the step can only turn `true` into `false`.
    pub fn segment_valid(&self, a: &[f64], b: &[f64], step: f64) -> bool {
        if !self.is_valid(a) || !self.is_valid(b) {
            return false;
        }
        let levels = subdivision_levels(self.space.max_joint_distance(a, b), step);
        for level in 1..=levels {
            let denom = (1u64 << level) as f64;
            let count = 1u64 << (level - 1);
            for m in 0..count {
                let t = (2 * m + 1) as f64 / denom;
                if !self.is_valid(&self.space.interpolate(a, b, t)) {
                    return false;
                }
            }
        }
        true
    }
}

/// Radius of a ball around `link`'s frame that contains the geometry of the
/// link and everything below it, at any joint values.
fn subtree_extent(model: &RobotModel, link: usize) -> f64 {
    let here = &model.links()[link];
    let own = here
        .collision
        .iter()
        .map(|g| g.origin.position.norm() + g.shape.bounding_radius())
        .fold(0.0, f64::max);
    model
        .joints()
        .iter()
        .filter(|j| j.parent == here.name)
        .filter_map(|j| {
            let child = model.link_index(&j.child)?;
            let travel = if j.kind == JointKind::Prismatic {
                let (lo, hi) = j.bounds();
                lo.abs().max(hi.abs())
            } else {
                0.0
            };
            Some(j.origin.position.norm() + travel + subtree_extent(model, child))
        })
        .fold(own, f64::max)
}

/// Smallest `k` with `distance / 2^k <= step`.
pub(crate) fn subdivision_levels(distance: f64, step: f64) -> u32 {
    let mut k = 0;
    while k < 40 && distance / (1u64 << k) as f64 > step {
        k += 1;
    }
    k
}

pub fn robot_in_collision(
    model: &RobotModel,
    q: &JointState,
    objects: &[CollisionObject],
    options: CollisionOptions,
) -> Result<CollisionReport, ModelError> {
    let checker = CollisionChecker::new(model, &q.group, objects, options)?;
    model.check_dimension(model.group(&q.group)?, q)?;
    Ok(checker.report(&q.positions))
}

pub fn segment_valid(
    model: &RobotModel,
    q_a: &JointState,
    q_b: &JointState,
    objects: &[CollisionObject],
    step: f64,
) -> Result<bool, ModelError> {
    let group = model.group(&q_a.group)?;
    model.check_dimension(group, q_a)?;
    if q_b.group != q_a.group {
        return Err(ModelError::UnknownGroup(q_b.group.clone()));
    }
    model.check_dimension(group, q_b)?;
    let checker = CollisionChecker::new(model, &q_a.group, objects, CollisionOptions::default())?;
    Ok(checker.segment_valid(&q_a.positions, &q_b.positions, step))
}
