use std::path::{Path, PathBuf};

use planhub_core::planning::{plan, MotionPlanRequest, MotionPlanResponse};
use planhub_core::scene::{CollisionObject, PlanningScene};
use serde::{Deserialize, Serialize};

use crate::{load_model, load_scene, read_file, write_file, CliError};

/// One headless planning job. Relative paths in a spec file are resolved
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPlanSpec {
    pub urdf: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    pub request: MotionPlanRequest,
    /// Receives the full plan response.
    pub output: PathBuf,
    /// Receives the trajectory alone; defaults to [`default_trajectory_path`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_output: Option<PathBuf>,
}

impl BatchPlanSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut spec: Self = serde_json::from_str(&read_file(path)?).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut spec.urdf);
        resolve(&mut spec.output);
        spec.scene.as_mut().map(resolve);
        spec.trajectory_output.as_mut().map(resolve);
        Ok(spec)
    }

    pub fn trajectory_path(&self) -> PathBuf {
        self.trajectory_output
            .clone()
            .unwrap_or_else(|| default_trajectory_path(&self.output))
    }
}

/// `out/plan.json` becomes `out/plan.trajectory.json`.
pub fn default_trajectory_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    output.with_file_name(format!("{stem}.trajectory.json"))
}

/// Plans once and writes the response and, on success, the trajectory.
/// A request without a seed takes `seed`.
pub fn cmd_plan(spec: &BatchPlanSpec, seed: Option<u64>) -> Result<MotionPlanResponse, CliError> {
    let model = load_model(&spec.urdf)?;
    let objects: Vec<CollisionObject> = match &spec.scene {
        Some(path) => {
            let file = load_scene(path)?;
            if let Some(v) = file.violations().first() {
                return Err(CliError::Parse {
                    path: path.clone(),
                    message: format!("object {:?}: {}", v.object, v.message),
                });
            }
            let scene = PlanningScene::from_file(&file).map_err(|e| CliError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
            scene.objects().cloned().collect()
        }
        None => Vec::new(),
    };
    let mut request = spec.request.clone();
    if request.seed.is_none() {
        request.seed = seed;
    }
    let response = plan(&model, &objects, &request);
    tracing::info!(
        status = response.status.as_str(),
        time = response.planning_time,
        "planned"
    );

    let text = serde_json::to_string_pretty(&response).expect("response serializes");
    write_file(&spec.output, &(text + "\n"))?;
    if let Some(trajectory) = &response.trajectory {
        let text = serde_json::to_string_pretty(trajectory).expect("trajectory serializes");
        write_file(&spec.trajectory_path(), &(text + "\n"))?;
    }
    Ok(response)
}
