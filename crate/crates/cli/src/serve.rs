use std::future::Future;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use planhub_server::{start, ServerConfig, DEFAULT_PLANNING_WORKERS, DEFAULT_TCP_PORT, DEFAULT_WS_PORT};

use crate::{load_model, load_scene, load_trajectory, CliError};

#[derive(Debug, Clone, clap::Args)]
pub struct ServeArgs {
    /// Robot description.
    #[arg(long)]
    pub urdf: PathBuf,
    /// Initial scene; empty when omitted.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TCP_PORT)]
    pub tcp_port: u16,
    /// Also serves --static-dir over HTTP.
    #[arg(long, default_value_t = DEFAULT_WS_PORT)]
    pub ws_port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    pub bind: IpAddr,
    /// Browser console bundle.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Recorded trajectory replayed while mirror mode is on.
    #[arg(long)]
    pub mirror_file: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PLANNING_WORKERS)]
    pub planning_workers: usize,
}

pub fn server_config(args: &ServeArgs, seed: Option<u64>) -> Result<ServerConfig, CliError> {
    let model = load_model(&args.urdf)?;
    let mut config = ServerConfig::new(model);
    if let Some(path) = &args.scene {
        let file = load_scene(path)?;
        config = config.with_scene_file(&file).map_err(|e| CliError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
    }
    if let Some(dir) = &args.static_dir {
        if !dir.is_dir() {
            return Err(CliError::Config(format!(
                "--static-dir {} is not a directory",
                dir.display()
            )));
        }
    }
    if let Some(path) = &args.mirror_file {
        let recording = load_trajectory(path)?;
        let group = config.model.group(&recording.group).map_err(|e| CliError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if recording.points.iter().any(|p| p.positions.len() != group.dof()) {
            return Err(CliError::Parse {
                path: path.clone(),
                message: format!("every point needs {} positions", group.dof()),
            });
        }
        config.mirror_source = Some(Arc::new(recording));
    }
    if args.planning_workers == 0 {
        return Err(CliError::Config("--planning-workers must be at least 1".into()));
    }
    config.tcp_addr = SocketAddr::new(args.bind, args.tcp_port);
    config.ws_addr = SocketAddr::new(args.bind, args.ws_port);
    config.static_dir = args.static_dir.clone();
    config.planning_workers = args.planning_workers;
    config.seed = seed;
    Ok(config)
}

/// Serves until `stop` resolves, then closes every session.
pub async fn cmd_serve(config: ServerConfig, stop: impl Future<Output = ()>) -> Result<(), CliError> {
    let robot = config.model.name().to_string();
    let static_dir = config.static_dir.clone();
    let handle = start(config).await.map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "planhub: serving {robot} on tcp {} and websocket ws://{}/ws",
        handle.tcp_addr(),
        handle.ws_addr()
    )
    .ok();
    if let Some(dir) = static_dir {
        writeln!(
            out,
            "planhub: console at http://{}/ from {}",
            handle.ws_addr(),
            dir.display()
        )
        .ok();
    }
    out.flush().ok();
    drop(out);

    stop.await;
    tracing::info!("shutting down");
    handle.shutdown().await;
    Ok(())
}
