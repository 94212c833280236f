//! URDF subset reader and writer.
//!
//! Supported: links with `<collision>` box/sphere/cylinder/mesh geometry,
//! joints of type revolute/prismatic/continuous/fixed, and a `<group>`
//! extension element naming a base→tip chain:
//!
//! ```xml
//! <group name="arm" base_link="base" tip_link="link2">
//!   <origin xyz="1 0 0" rpy="0 0 0"/>   <!-- optional tip offset -->
//! </group>
//! ```
//!
//! A `<capsule radius length>` geometry element is also accepted. Visuals,
//! inertials, transmissions, materials and plugin tags are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use roxmltree::{Document, Node};

use super::mesh;
use super::{CollisionGeometry, GroupSpec, Joint, JointKind, JointLimits, Link, ModelError, ParseWarning, RobotModel};
use crate::collision::Shape;
use crate::pose::Pose;

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Treat every `<cylinder>` collision as a capsule of the same radius
    /// and straight length.
    pub cylinders_as_capsules: bool,
    /// Directory used to resolve relative and `package://` mesh paths.
    pub mesh_root: Option<PathBuf>,
}

pub fn parse_urdf(xml_text: &str) -> Result<RobotModel, ModelError> {
    parse_urdf_with(xml_text, &ParseOptions::default())
}

pub fn parse_urdf_with(xml_text: &str, options: &ParseOptions) -> Result<RobotModel, ModelError> {
    let doc = Document::parse(xml_text).map_err(|e| ModelError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ModelError::MalformedXml(format!(
            "expected <robot> root element, found <{}>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();

    let mut warnings = Vec::new();
    let mut links = Vec::new();
    let mut joints = Vec::new();
    let mut groups = Vec::new();
    for node in robot.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => links.push(parse_link(node, options, &mut warnings)?),
            "joint" => joints.push(parse_joint(node)?),
            "group" => groups.push(parse_group(node)?),
            _ => {}
        }
    }

    let mut model = RobotModel::new(name, links, joints, groups)?;
    for w in warnings {
        tracing::warn!(link = %w.link, "{}", w.message);
        model.push_warning(w);
    }
    Ok(model)
}

fn required<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, ModelError> {
    node.attribute(attr).ok_or_else(|| {
        ModelError::MalformedXml(format!("<{}> is missing attribute '{}'", node.tag_name().name(), attr))
    })
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, ModelError> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| ModelError::MalformedXml(format!("bad number '{t}' in {what}")))
        })
        .collect()
}

fn parse_vec3(text: &str, what: &str) -> Result<[f64; 3], ModelError> {
    let v = parse_floats(text, what)?;
    <[f64; 3]>::try_from(v.as_slice())
        .map_err(|_| ModelError::MalformedXml(format!("{what} needs three numbers, got '{text}'")))
}

fn parse_scalar(node: Node, attr: &str) -> Result<f64, ModelError> {
    let text = required(node, attr)?;
    text.trim()
        .parse()
        .map_err(|_| ModelError::MalformedXml(format!("bad number '{text}' for '{attr}'")))
}

fn optional_scalar(node: Node, attr: &str) -> Result<Option<f64>, ModelError> {
    node.attribute(attr).map(|_| parse_scalar(node, attr)).transpose()
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn parse_origin(parent: Node) -> Result<Pose, ModelError> {
    let Some(origin) = child(parent, "origin") else {
        return Ok(Pose::identity());
    };
    let xyz = origin
        .attribute("xyz")
        .map(|t| parse_vec3(t, "origin xyz"))
        .transpose()?
        .unwrap_or([0.0; 3]);
    let rpy = origin
        .attribute("rpy")
        .map(|t| parse_vec3(t, "origin rpy"))
        .transpose()?
        .unwrap_or([0.0; 3]);
    Ok(Pose::from_xyz_rpy(xyz, rpy))
}

fn parse_link(node: Node, options: &ParseOptions, warnings: &mut Vec<ParseWarning>) -> Result<Link, ModelError> {
    let name = required(node, "name")?.to_string();
    let mut collision = Vec::new();
    for col in node
        .children()
        .filter(|c| c.is_element() && c.tag_name().name() == "collision")
    {
        let origin = parse_origin(col)?;
        let geometry = child(col, "geometry")
            .ok_or_else(|| ModelError::MalformedXml(format!("collision on link '{name}' has no <geometry>")))?;
        let Some(shape_node) = geometry.children().find(Node::is_element) else {
            return Err(ModelError::MalformedXml(format!("empty <geometry> on link '{name}'")));
        };
        match shape_node.tag_name().name() {
            "box" => {
                let size = parse_vec3(required(shape_node, "size")?, "box size")?;
                collision.push(CollisionGeometry {
                    shape: Shape::cuboid(size[0] / 2.0, size[1] / 2.0, size[2] / 2.0),
                    origin,
                });
            }
            "sphere" => collision.push(CollisionGeometry {
                shape: Shape::sphere(parse_scalar(shape_node, "radius")?),
                origin,
            }),
            "cylinder" => {
                let radius = parse_scalar(shape_node, "radius")?;
                let half_length = parse_scalar(shape_node, "length")? / 2.0;
                let as_capsule = options.cylinders_as_capsules || shape_node.attribute("capsule") == Some("true");
                let shape = if as_capsule {
                    Shape::capsule(radius, half_length)
                } else {
                    Shape::cylinder(radius, half_length)
                };
                collision.push(CollisionGeometry { shape, origin });
            }
            "capsule" => collision.push(CollisionGeometry {
                shape: Shape::capsule(
                    parse_scalar(shape_node, "radius")?,
                    parse_scalar(shape_node, "length")? / 2.0,
                ),
                origin,
            }),
            "mesh" => {
                let filename = required(shape_node, "filename")?;
                let scale = shape_node
                    .attribute("scale")
                    .map(|t| parse_vec3(t, "mesh scale"))
                    .transpose()?
                    .unwrap_or([1.0; 3]);
                let path = resolve_mesh_path(filename, options.mesh_root.as_deref());
                match mesh::load_bounds(&path) {
                    Ok((min, max)) => {
                        let s = Vector3::from(scale);
                        let (min, max) = (min.component_mul(&s), max.component_mul(&s));
                        let (lo, hi) = (min.inf(&max), min.sup(&max));
                        let half = (hi - lo) / 2.0;
                        let center = (hi + lo) / 2.0;
                        warnings.push(ParseWarning {
                            link: name.clone(),
                            message: format!("collision mesh '{filename}' replaced by its bounding box"),
                        });
                        collision.push(CollisionGeometry {
                            shape: Shape::cuboid(half.x, half.y, half.z),
                            origin: origin.compose(&Pose::from_translation(center.x, center.y, center.z)),
                        });
                    }
                    Err(e) => warnings.push(ParseWarning {
                        link: name.clone(),
                        message: format!("collision mesh '{filename}' could not be read ({e}); geometry dropped"),
                    }),
                }
            }
            other => warnings.push(ParseWarning {
                link: name.clone(),
                message: format!("unsupported geometry <{other}> ignored"),
            }),
        }
    }
    Ok(Link { name, collision })
}

fn resolve_mesh_path(filename: &str, root: Option<&Path>) -> PathBuf {
    if let Some(rest) = filename.strip_prefix("file://") {
        return PathBuf::from(rest);
    }
    let relative = match filename.strip_prefix("package://") {
        // drop the package name, keep the path inside it
        Some(rest) => rest.split_once('/').map_or(rest, |(_, p)| p),
        None => filename,
    };
    let p = Path::new(relative);
    match root {
        Some(root) if p.is_relative() => root.join(p),
        _ => p.to_path_buf(),
    }
}

fn parse_joint(node: Node) -> Result<Joint, ModelError> {
    let name = required(node, "name")?.to_string();
    let kind = match required(node, "type")? {
        "revolute" => JointKind::Revolute,
        "prismatic" => JointKind::Prismatic,
        "continuous" => JointKind::Continuous,
        "fixed" => JointKind::Fixed,
        other => {
            return Err(ModelError::InvalidJoint {
                joint: name,
                reason: format!("unsupported joint type '{other}'"),
            })
        }
    };
    let link_of = |tag: &str| -> Result<String, ModelError> {
        let n = child(node, tag).ok_or_else(|| ModelError::MalformedXml(format!("joint '{name}' has no <{tag}>")))?;
        Ok(required(n, "link")?.to_string())
    };
    let parent = link_of("parent")?;
    let child_link = link_of("child")?;
    let origin = parse_origin(node)?;

    let axis = match child(node, "axis").and_then(|a| a.attribute("xyz")) {
        Some(text) => Vector3::from(parse_vec3(text, "axis")?),
        None => Vector3::x(),
    };
    let axis = if kind == JointKind::Fixed {
        axis
    } else {
        let n = axis.norm();
        if !(n.is_finite() && n > 1e-12) {
            return Err(ModelError::InvalidJoint {
                joint: name,
                reason: "zero-length axis".into(),
            });
        }
        axis / n
    };

    let limits = match (kind, child(node, "limit")) {
        (JointKind::Fixed, _) => None,
        (_, None) => return Err(ModelError::MissingLimit(name)),
        (_, Some(limit)) => {
            let max_velocity =
                optional_scalar(limit, "velocity")?.ok_or_else(|| ModelError::MissingLimit(name.clone()))?;
            let (lower, upper) = if kind == JointKind::Continuous {
                (None, None)
            } else {
                // URDF defaults missing bounds to zero
                (
                    Some(optional_scalar(limit, "lower")?.unwrap_or(0.0)),
                    Some(optional_scalar(limit, "upper")?.unwrap_or(0.0)),
                )
            };
            Some(JointLimits {
                lower,
                upper,
                max_velocity,
            })
        }
    };

    Ok(Joint {
        name,
        kind,
        parent,
        child: child_link,
        axis,
        origin,
        limits,
    })
}

fn parse_group(node: Node) -> Result<GroupSpec, ModelError> {
    Ok(GroupSpec {
        name: required(node, "name")?.to_string(),
        base_link: required(node, "base_link")?.to_string(),
        tip_link: required(node, "tip_link")?.to_string(),
        tip_offset: parse_origin(node)?,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn origin_xml(pose: &Pose) -> String {
    let (r, p, y) = pose.orientation.euler_angles();
    let t = pose.position;
    format!("<origin xyz=\"{} {} {}\" rpy=\"{} {} {}\"/>", t.x, t.y, t.z, r, p, y)
}

pub(super) fn write_urdf(model: &RobotModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\"?>");
    let _ = writeln!(out, "<robot name=\"{}\">", escape(model.name()));
    for link in model.links() {
        if link.collision.is_empty() {
            let _ = writeln!(out, "  <link name=\"{}\"/>", escape(&link.name));
            continue;
        }
        let _ = writeln!(out, "  <link name=\"{}\">", escape(&link.name));
        for geom in &link.collision {
            let shape = match geom.shape {
                Shape::Box { half_extents: h } => {
                    format!("<box size=\"{} {} {}\"/>", 2.0 * h[0], 2.0 * h[1], 2.0 * h[2])
                }
                Shape::Sphere { radius } => format!("<sphere radius=\"{radius}\"/>"),
                Shape::Cylinder { radius, half_length } => {
                    format!("<cylinder radius=\"{radius}\" length=\"{}\"/>", 2.0 * half_length)
                }
                Shape::Capsule { radius, half_length } => {
                    format!("<capsule radius=\"{radius}\" length=\"{}\"/>", 2.0 * half_length)
                }
            };
            let _ = writeln!(
                out,
                "    <collision>{}<geometry>{}</geometry></collision>",
                origin_xml(&geom.origin),
                shape
            );
        }
        let _ = writeln!(out, "  </link>");
    }
    for joint in model.joints() {
        let _ = writeln!(
            out,
            "  <joint name=\"{}\" type=\"{}\">",
            escape(&joint.name),
            joint.kind.as_str()
        );
        let _ = writeln!(out, "    <parent link=\"{}\"/>", escape(&joint.parent));
        let _ = writeln!(out, "    <child link=\"{}\"/>", escape(&joint.child));
        let _ = writeln!(out, "    {}", origin_xml(&joint.origin));
        if joint.kind != JointKind::Fixed {
            let a = joint.axis;
            let _ = writeln!(out, "    <axis xyz=\"{} {} {}\"/>", a.x, a.y, a.z);
        }
        if let Some(l) = joint.limits {
            let mut attrs = format!("velocity=\"{}\"", l.max_velocity);
            if let (Some(lo), Some(hi)) = (l.lower, l.upper) {
                attrs = format!("lower=\"{lo}\" upper=\"{hi}\" {attrs}");
            }
            let _ = writeln!(out, "    <limit {attrs}/>");
        }
        let _ = writeln!(out, "  </joint>");
    }
    for g in model.groups() {
        let _ = writeln!(
            out,
            "  <group name=\"{}\" base_link=\"{}\" tip_link=\"{}\">{}</group>",
            escape(&g.name),
            escape(&g.base_link),
            escape(&g.tip_link),
            origin_xml(&g.tip_offset)
        );
    }
    let _ = writeln!(out, "</robot>");
    out
}
