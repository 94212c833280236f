use std::fmt;
use std::path::Path;

use planhub_core::collision::{robot_in_collision, CollisionOptions, ContactPair};
use planhub_core::scene::PlanningScene;

use crate::{load_model, load_scene, CliError, Exit};

#[derive(Debug, Clone, PartialEq)]
pub enum RobotStatus {
    /// The scene stores no robot state.
    Absent,
    CollisionFree,
    /// Contact descriptions.
    InCollision(Vec<String>),
    /// Not checked because the scene has violations.
    Unchecked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneReport {
    pub objects: usize,
    pub violations: Vec<String>,
    pub robot: RobotStatus,
}

impl SceneReport {
    pub fn exit(&self) -> Exit {
        if self.violations.is_empty() {
            Exit::Success
        } else {
            Exit::Failure
        }
    }
}

impl fmt::Display for SceneReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let noun = if self.objects == 1 { "object" } else { "objects" };
        write!(f, "{} {noun}", self.objects)?;
        match &self.robot {
            RobotStatus::Absent => writeln!(f, ", no robot state")?,
            RobotStatus::CollisionFree => writeln!(f, ", robot collision-free")?,
            RobotStatus::InCollision(contacts) => {
                writeln!(f, ", robot in collision")?;
                for c in contacts {
                    writeln!(f, "  contact: {c}")?;
                }
            }
            RobotStatus::Unchecked => writeln!(f)?,
        }
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        Ok(())
    }
}

pub fn cmd_scene_check(scene: &Path, urdf: &Path) -> Result<SceneReport, CliError> {
    let model = load_model(urdf)?;
    let file = load_scene(scene)?;
    let mut violations: Vec<String> = file.violations().iter().map(ToString::to_string).collect();
    if let Some(q) = &file.robot_state {
        let fits = model.group(&q.group).and_then(|g| model.check_dimension(g, q));
        if let Err(e) = fits {
            violations.push(format!("robot_state: {e}"));
        }
    }
    let objects = file.objects.len();
    if !violations.is_empty() {
        return Ok(SceneReport {
            objects,
            violations,
            robot: RobotStatus::Unchecked,
        });
    }
    let built = PlanningScene::from_file(&file).map_err(|e| CliError::Parse {
        path: scene.to_path_buf(),
        message: e.to_string(),
    })?;
    let robot = match &file.robot_state {
        None => RobotStatus::Absent,
        Some(q) => {
            let objects: Vec<_> = built.objects().cloned().collect();
            let report = robot_in_collision(&model, q, &objects, CollisionOptions::default())
                .map_err(|e| CliError::Config(e.to_string()))?;
            if report.in_collision {
                RobotStatus::InCollision(
                    report
                        .contacts
                        .iter()
                        .map(|c| match &c.pair {
                            ContactPair::Object { link, object } => {
                                format!(
                                    "link {link} touches object {object} ({:.4} m deep)",
                                    c.penetration_depth
                                )
                            }
                            ContactPair::Links { a, b } => {
                                format!("link {a} touches link {b} ({:.4} m deep)", c.penetration_depth)
                            }
                        })
                        .collect(),
                )
            } else {
                RobotStatus::CollisionFree
            }
        }
    };
    Ok(SceneReport {
        objects,
        violations,
        robot,
    })
}
