//! Operator commands behind the `planhub` binary. Each command is a plain
//! function so tests and scripts can call it without spawning a process.

mod batch;
mod check;
mod replay;
mod serve;

use std::path::{Path, PathBuf};

pub use batch::{cmd_plan, default_trajectory_path, BatchPlanSpec};
pub use check::{cmd_scene_check, RobotStatus, SceneReport};
pub use replay::{load_trajectory, render_svg, render_table};
pub use serve::{cmd_serve, server_config, ServeArgs};

/// Fixes every stochastic seed when set to an unsigned integer.
pub const SEED_ENV: &str = "ERUPT_SEED";

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    /// The command ran but the outcome was negative.
    Failure = 1,
    /// Bad flags, unreadable or invalid input files.
    Usage = 2,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit(&self) -> Exit {
        Exit::Usage
    }
}

/// Reads [`SEED_ENV`].
pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(text) => text
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{SEED_ENV} must be an unsigned integer, got {text:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("{SEED_ENV}: {e}"))),
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

pub(crate) fn load_model(path: &Path) -> Result<planhub_core::RobotModel, CliError> {
    let model = planhub_core::robot_model::parse_urdf(&read_file(path)?).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    for warning in model.warnings() {
        tracing::warn!(path = %path.display(), link = %warning.link, "{}", warning.message);
    }
    Ok(model)
}

pub(crate) fn load_scene(path: &Path) -> Result<planhub_core::scene::SceneFile, CliError> {
    planhub_core::scene::SceneFile::from_json(&read_file(path)?).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
