use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use planhub_cli::{
    cmd_plan, cmd_scene_check, cmd_serve, env_seed, load_trajectory, render_svg, render_table, server_config,
    BatchPlanSpec, CliError, Exit, ServeArgs,
};
use planhub_core::planning::{MotionPlanRequest, PlanStatus};
use tracing::level_filters::LevelFilter;

#[derive(Parser)]
#[command(name = "planhub", version, about = "Motion-planning server and offline tools")]
struct Cli {
    /// off, error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the planning server until interrupted.
    Serve(ServeArgs),
    /// Plan once and write the response and trajectory to files.
    Plan(PlanArgs),
    /// Validate a scene file and check the stored robot state for collisions.
    SceneCheck {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        urdf: PathBuf,
    },
    /// Print a trajectory as a table, or plot it as SVG.
    Replay {
        /// Trajectory file or plan output.
        trajectory: PathBuf,
        /// Resample every STEP seconds instead of listing stored points.
        #[arg(long)]
        step: Option<f64>,
        /// Write a joint-position plot here instead of printing.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct PlanArgs {
    /// Batch spec file; the other flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    urdf: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Motion plan request file.
    #[arg(long)]
    request: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    trajectory_output: Option<PathBuf>,
    #[arg(long)]
    planner: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn usage_error(message: String) -> ! {
    Cli::command()
        .error(clap::error::ErrorKind::MissingRequiredArgument, message)
        .exit()
}

fn batch_spec(args: PlanArgs) -> Result<BatchPlanSpec, CliError> {
    let mut spec = match &args.spec {
        Some(path) => Some(BatchPlanSpec::load(path)?),
        None => None,
    };
    if let Some(path) = &args.request {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let request: MotionPlanRequest = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        match &mut spec {
            Some(spec) => spec.request = request,
            None => {
                let (Some(urdf), Some(output)) = (args.urdf.clone(), args.output.clone()) else {
                    usage_error("plan needs --spec, or --urdf, --request and --output".into());
                };
                spec = Some(BatchPlanSpec {
                    urdf,
                    scene: None,
                    request,
                    output,
                    trajectory_output: None,
                });
            }
        }
    }
    let Some(mut spec) = spec else {
        usage_error("plan needs --spec, or --urdf, --request and --output".into());
    };
    if let Some(urdf) = args.urdf {
        spec.urdf = urdf;
    }
    if let Some(output) = args.output {
        spec.output = output;
    }
    if args.scene.is_some() {
        spec.scene = args.scene;
    }
    if args.trajectory_output.is_some() {
        spec.trajectory_output = args.trajectory_output;
    }
    if let Some(planner) = args.planner {
        spec.request.planner_id = planner;
    }
    if args.seed.is_some() {
        spec.request.seed = args.seed;
    }
    Ok(spec)
}

async fn interrupted() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("signal handler installs");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn run(command: Command) -> Result<Exit, CliError> {
    let seed = env_seed()?;
    match command {
        Command::Serve(args) => {
            let config = server_config(&args, seed)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Config(e.to_string()))?;
            runtime.block_on(cmd_serve(config, interrupted()))?;
            Ok(Exit::Success)
        }
        Command::Plan(args) => {
            let spec = batch_spec(args)?;
            let response = cmd_plan(&spec, seed)?;
            match response.status {
                PlanStatus::Success => {
                    let duration = response.trajectory.as_ref().map_or(0.0, |t| t.duration());
                    println!(
                        "SUCCESS: {} waypoints, {duration:.3} s motion, planned in {:.3} s",
                        response.waypoint_count, response.planning_time
                    );
                    println!(
                        "wrote {} and {}",
                        spec.output.display(),
                        spec.trajectory_path().display()
                    );
                    Ok(Exit::Success)
                }
                status => {
                    println!("{}: {}", status.as_str(), response.message.as_deref().unwrap_or(""));
                    println!("wrote {}", spec.output.display());
                    Ok(Exit::Failure)
                }
            }
        }
        Command::SceneCheck { scene, urdf } => {
            let report = cmd_scene_check(&scene, &urdf)?;
            print!("{report}");
            Ok(report.exit())
        }
        Command::Replay { trajectory, step, svg } => {
            let trajectory = load_trajectory(&trajectory)?;
            match svg {
                Some(path) => {
                    std::fs::write(&path, render_svg(&trajectory)).map_err(|source| CliError::Io { path, source })?
                }
                None => print!("{}", render_table(&trajectory, step)),
            }
            Ok(Exit::Success)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_max_level(cli.log_level)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let exit = run(cli.command).unwrap_or_else(|e| {
        eprintln!("planhub: {e}");
        e.exit()
    });
    ExitCode::from(exit as u8)
}
