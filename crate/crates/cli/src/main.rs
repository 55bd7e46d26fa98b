use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tactile_explore::explorer::Policy;
use tactile_explore::harness::{self, RunOverrides};
use tactile_explore::Error;

/// Simulated visuo-tactile shape exploration.
#[derive(Parser)]
#[command(name = "explore", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore one scene and export the report, meshes and touch fragments.
    Run {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "bopt")]
        policy: Policy,
        #[arg(long)]
        udrr_threshold: Option<f64>,
        /// Marching-cubes cells per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run bopt and random over the same seeds and summarize.
    Compare {
        scene: PathBuf,
        /// Use seeds 0..N instead of the scene's seed list.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inspect the bundled scenes.
    Shapes {
        #[command(subcommand)]
        action: ShapesAction,
    },
}

#[derive(Subcommand)]
enum ShapesAction {
    List,
    Describe {
        name: String,
        /// Print the full scene file instead of a summary.
        #[arg(long)]
        json: bool,
    },
}

fn execute(command: Command) -> Result<i32, Error> {
    match command {
        Command::Run {
            scene,
            out,
            seed,
            policy,
            udrr_threshold,
            grid,
        } => {
            let spec = harness::load_scene(&scene)?;
            let overrides = RunOverrides {
                seed,
                policy,
                udrr_threshold,
                grid,
            };
            let outcome = harness::run(&spec, &out, &overrides)?;
            let r = &outcome.report;
            println!(
                "{} touches, stop {}, udrr {:.3}, cd {:.2} -> {:.2} mm, output in {}",
                r.touch_count(),
                r.stop.label(),
                r.final_udrr(),
                r.initial_chamfer(),
                r.final_chamfer(),
                outcome.dir.display()
            );
            Ok(outcome.exit_code())
        }
        Command::Compare { scene, seeds, out } => {
            let spec = harness::load_scene(&scene)?;
            let seeds = seeds.map_or_else(|| spec.seeds.clone(), |n| (0..n).collect());
            let summary = harness::compare(&spec, &seeds, &out)?;
            print!("{}", summary.summary_csv());
            if summary.bopt_spread_not_larger() == Some(false) {
                log::warn!("bopt touch-count spread exceeds random on this scene");
            }
            Ok(0)
        }
        Command::Shapes { action } => {
            match action {
                ShapesAction::List => print!("{}", harness::shapes_list()),
                ShapesAction::Describe { name, json: false } => print!("{}", harness::shapes_describe(&name)?),
                ShapesAction::Describe { name, json: true } => println!("{}", harness::builtin_scene(&name)?.to_json()),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("EXPLORE_LOG", "info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::error_exit_code(&e) as u8)
        }
    }
}
