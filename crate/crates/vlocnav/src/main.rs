use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vlocnav::formats::{read_gallery, read_log, read_world, write_gallery, write_log, write_world};
use vlocnav::report::{summarize, summary_csv, write_report};
use vlocnav::{run_sweep, Axis, AxisKind, ConfigError, ExperimentConfig, FormatError, ReportError, SweepOptions, SweepResult};
use vlocnav_core::vloc::{build_gallery, GalleryMap};
use vlocnav_core::world::{generate_world, WorldMap};

#[derive(Parser)]
#[command(name = "vlocnav", version, about = "Closed-loop visual localization benchmark")]
struct Cli {
    /// Scenario file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario's episode seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0: all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the landmark world and write world.json.
    GenerateWorld,
    /// Capture and triangulate the gallery and write gallery.bin.
    BuildGallery {
        /// World file; generated from the scenario when omitted.
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Run the scenario's base condition: episodes, reference pass, baseline.
    Run {
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        gallery: Option<PathBuf>,
    },
    /// Sweep one condition axis.
    Sweep {
        /// Axis to sweep; defaults to `conditions.sweep.axis`.
        #[arg(long, value_enum)]
        axis: Option<AxisKind>,
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        gallery: Option<PathBuf>,
    },
    /// Tables, series and charts from an episode log.
    Report {
        /// Directory holding episodes.jsonl; defaults to --out.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Execution(String),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, AppError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn world_for(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<WorldMap, AppError> {
    match path {
        Some(p) => Ok(read_world(p)?),
        None => generate_world(&cfg.world).map_err(|e| AppError::Config(ConfigError::Invalid(e.to_string()))),
    }
}

fn gallery_for(cfg: &ExperimentConfig, world: &WorldMap, path: Option<&Path>) -> Result<GalleryMap, AppError> {
    match path {
        Some(p) => Ok(read_gallery(p)?),
        None => build_gallery(world, &cfg.gallery).map_err(|e| AppError::Execution(e.to_string())),
    }
}

fn create_out(dir: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::Format(FormatError::Io(dir.display().to_string(), e)))
}

fn write_results(cli: &Cli, cfg: &ExperimentConfig, result: &SweepResult) -> Result<(), AppError> {
    create_out(&cli.out)?;
    write_log(&cli.out.join("episodes.jsonl"), &result.to_log())?;
    let rows = summarize(result, &cfg.metrics.recall_thresholds)?;
    let csv = summary_csv(&rows)?;
    let path = cli.out.join("summary.csv");
    std::fs::write(&path, &csv).map_err(|e| FormatError::Io(path.display().to_string(), e))?;
    print!("{csv}");
    for p in result.points.iter().chain(result.baseline.iter()) {
        if let Some(e) = &p.error {
            eprintln!("axis value {} ({}) failed: {e}", p.axis_value, p.method);
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), AppError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::GenerateWorld => {
            let world = world_for(&cfg, None)?;
            create_out(&cli.out)?;
            let path = cli.out.join("world.json");
            write_world(&path, &world)?;
            println!("{}: {} landmarks, route {:.1} m", path.display(), world.landmarks.len(), world.route.total_length());
        }
        Command::BuildGallery { world } => {
            let world = world_for(&cfg, world.as_deref())?;
            let gallery = gallery_for(&cfg, &world, None)?;
            create_out(&cli.out)?;
            let path = cli.out.join("gallery.bin");
            write_gallery(&path, &gallery)?;
            println!("{}: {} keyframes, {} points", path.display(), gallery.keyframes.len(), gallery.points3d.len());
        }
        Command::Run { world, gallery } => {
            let world = world_for(&cfg, world.as_deref())?;
            let gallery = gallery_for(&cfg, &world, gallery.as_deref())?;
            let options = SweepOptions { jobs: cli.jobs, ..Default::default() };
            let result = run_sweep(&world, &gallery, &cfg.scenario(), &Axis::Base, &options);
            write_results(cli, &cfg, &result)?;
        }
        Command::Sweep { axis, world, gallery } => {
            let axis = cfg.axis(axis.unwrap_or(cfg.conditions.sweep.axis))?;
            let world = world_for(&cfg, world.as_deref())?;
            let gallery = gallery_for(&cfg, &world, gallery.as_deref())?;
            let options = SweepOptions { jobs: cli.jobs, ..Default::default() };
            let result = run_sweep(&world, &gallery, &cfg.scenario(), &axis, &options);
            write_results(cli, &cfg, &result)?;
        }
        Command::Report { input } => {
            let input = input.as_deref().unwrap_or(&cli.out);
            let result = SweepResult::from_log(read_log(&input.join("episodes.jsonl"))?)?;
            for path in write_report(&cli.out, &result, &cfg.metrics.recall_thresholds)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
