use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod manifest;

/// Multimodal survival modeling: simulate, ingest, train, evaluate.
///
/// Logging goes to stderr and is controlled by SURVFUSE_LOG (default
/// `info`). SURVFUSE_THREADS caps the number of concurrent runs in `suite`.
#[derive(Parser)]
#[command(name = "survfuse", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort in the external file formats.
    Simulate {
        /// Generator spec (TOML); defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and validate a cohort, then write it as a bundle directory.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attention-pool token hidden states into pooled vectors.
    Pool {
        #[arg(long)]
        hidden_states: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one configuration and evaluate it.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every `*.toml` config in a directory on a shared split.
    Suite {
        #[arg(long)]
        configs_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-evaluate a checkpoint on its cohort and split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Take data paths from this config instead of the checkpoint's.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn teacher responses into student target sequences.
    ParseTeacher {
        #[arg(long)]
        teacher: PathBuf,
        /// Outcomes CSV; needed for calibration correction.
        #[arg(long)]
        outcomes: Option<PathBuf>,
        #[arg(long)]
        calibration_correction: bool,
        #[arg(long, default_value_t = 5.0)]
        horizon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blend hidden-state curves with verbalized probabilities.
    Blend {
        /// Curves CSV with columns `id,t,S`.
        #[arg(long)]
        hidden: PathBuf,
        /// Target JSONL written by `parse-teacher`.
        #[arg(long)]
        targets: PathBuf,
        /// Fixed blend weight; otherwise chosen on `--outcomes`.
        #[arg(long)]
        lambda: Option<f64>,
        /// Outcomes used to select lambda (normally the validation split).
        #[arg(long)]
        outcomes: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        horizon: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SURVFUSE_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.command {
        Command::Simulate { spec, out } => commands::simulate(spec.as_deref(), &out),
        Command::Ingest { config, out } => commands::ingest(&config, &out),
        Command::Pool { hidden_states, out } => commands::pool(&hidden_states, &out),
        Command::Train { config, out } => commands::train(&config, &out),
        Command::Suite { configs_dir, out } => commands::suite(&configs_dir, &out),
        Command::Eval {
            checkpoint,
            config,
            out,
        } => commands::eval(&checkpoint, config.as_deref(), &out),
        Command::ParseTeacher {
            teacher,
            outcomes,
            calibration_correction,
            horizon,
            out,
        } => commands::parse_teacher(
            &teacher,
            outcomes.as_deref(),
            calibration_correction,
            horizon,
            &out,
        ),
        Command::Blend {
            hidden,
            targets,
            lambda,
            outcomes,
            horizon,
            out,
        } => commands::blend(
            &hidden,
            &targets,
            lambda,
            outcomes.as_deref(),
            horizon,
            &out,
        ),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.code())
        }
    }
}
