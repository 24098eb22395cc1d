use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "pvlstm", version, about = "Pedestrian box and crossing-intention forecasting")]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Cvcs,
    Lkf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MotionArg {
    ConstantVelocity,
    Sinusoid,
    Mixed,
}

#[derive(Subcommand)]
enum Command {
    /// Cut a track CSV into fixed-length windows with a video-level split.
    Windows {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on the train split of a windows file.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        /// Epoch log CSV; defaults to the checkpoint path with `.log.csv` appended.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Continue from this checkpoint up to the configured epoch count.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint or a baseline on a windows file.
    Eval {
        #[arg(long, required_unless_present = "baseline")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
        /// Supplies baseline parameters; for checkpoints it must match the stored model.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Also write the report as key=value lines.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the report as a CSV header and row.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare analytic gradients of a small model against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 3)]
        tobs: usize,
        #[arg(long, default_value_t = 3)]
        tpred: usize,
        #[arg(long, default_value_t = 2)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-2)]
        threshold: f64,
        /// Scale the analytic gradient of this block by 1.5 before comparing.
        #[arg(long, hide = true)]
        corrupt_block: Option<String>,
    },
    /// Forecast the last observed segment of every pedestrian in a track CSV.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic track CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        videos: usize,
        #[arg(long, default_value_t = 18)]
        tobs: usize,
        #[arg(long, default_value_t = 18)]
        tpred: usize,
        #[arg(long, value_enum, default_value = "mixed")]
        motion: MotionArg,
        /// Camera velocity standard deviation in px/frame.
        #[arg(long, default_value_t = 0.0)]
        drift: f32,
        /// Box noise standard deviation in px.
        #[arg(long, default_value_t = 0.0)]
        noise: f32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print every configuration key with its default value.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        pvlstm::Execution::Sequential
    } else {
        pvlstm::Execution::default()
    };
    let result = match cli.command {
        Command::Windows { tracks, config, out } => commands::windows(&tracks, config.as_deref(), &out),
        Command::Train {
            config,
            data,
            out,
            log,
            resume,
        } => commands::train(config.as_deref(), &data, &out, log, resume.as_deref(), exec),
        Command::Eval {
            checkpoint,
            data,
            baseline,
            config,
            split,
            out,
            csv,
        } => commands::eval(commands::EvalArgs {
            checkpoint,
            data,
            baseline,
            config,
            split,
            out,
            csv,
            exec,
        }),
        Command::Gradcheck {
            hidden,
            tobs,
            tpred,
            batch,
            seed,
            threshold,
            corrupt_block,
        } => commands::gradcheck(hidden, tobs, tpred, batch, seed, threshold, corrupt_block.as_deref()),
        Command::Predict { checkpoint, tracks, out } => commands::predict(&checkpoint, &tracks, &out, exec),
        Command::Synth {
            out,
            count,
            videos,
            tobs,
            tpred,
            motion,
            drift,
            noise,
            seed,
        } => commands::synth(&out, count, videos, tobs, tpred, motion, drift, noise, seed),
        Command::Config => {
            print!("{}", pvlstm::train::TrainConfig::documented_defaults());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
