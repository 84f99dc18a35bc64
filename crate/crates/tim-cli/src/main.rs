//! `tim` — batch trajectory interaction mining.
//!
//! Subcommands mirror the pipeline: synth (make test data), extract
//! (classify + organize), assess (quality metrics), enhance (denoise),
//! calibrate (fit the car-following model on stop-at-light trajectories).

mod commands;
mod summary;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use tim_core::io::resolve_config_path;

#[derive(Parser)]
#[command(name = "tim", version, about = "Trajectory interaction mining for AV traffic-device encounters")]
struct Cli {
    /// Parameter config (TOML). Falls back to $TIM_CONFIG, then defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (0 = all cores). Outputs are identical for any value.
    #[arg(long, default_value_t = 0, global = true)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify segments and write organized per-category trajectory CSVs.
    Extract {
        /// Interchange files or directories of them.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Output directory (per-category subdirectories + manifest).
        #[arg(long)]
        out: PathBuf,
        /// Fail on the first invalid segment instead of skip-and-report.
        #[arg(long)]
        strict: bool,
    },
    /// Report quality metrics for a directory of trajectory CSVs.
    Assess {
        #[arg(long)]
        dir: PathBuf,
        /// Assess the `_enhanced` siblings instead of the raw files.
        #[arg(long)]
        enhanced: bool,
    },
    /// Denoise every trajectory CSV, writing `_enhanced` siblings and a
    /// before/after metric table.
    Enhance {
        #[arg(long)]
        dir: PathBuf,
        /// Denoise the stored acceleration directly instead of re-deriving
        /// it from the denoised speed (comparison mode).
        #[arg(long)]
        independent_accel: bool,
    },
    /// Calibrate the car-following model on stop-at-light trajectories.
    Calibrate {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the calibration seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Calibrate on the `_enhanced` siblings.
        #[arg(long)]
        enhanced: bool,
    },
    /// Generate labeled synthetic segments from a scenario spec file.
    Synth {
        /// JSON array of scenario specs.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Re-seed the specs as base, base+1, ...
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    let cli = Cli::parse();
    let config = resolve_config_path(cli.config);
    let result = match cli.command {
        Command::Extract { input, out, strict } => {
            commands::cmd_extract(&input, config.as_deref(), &out, cli.jobs, strict)
        }
        Command::Assess { dir, enhanced } => {
            commands::cmd_assess(&dir, config.as_deref(), cli.jobs, enhanced)
        }
        Command::Enhance {
            dir,
            independent_accel,
        } => commands::cmd_enhance(&dir, config.as_deref(), cli.jobs, independent_accel),
        Command::Calibrate {
            dir,
            out,
            seed,
            enhanced,
        } => commands::cmd_calibrate(&dir, config.as_deref(), &out, seed, enhanced, cli.jobs),
        Command::Synth { spec, out, seed } => commands::cmd_synth(&spec, &out, seed).map(|_| ()),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.exit_code);
    }
}
