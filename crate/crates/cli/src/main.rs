use std::path::PathBuf;
use std::process::ExitCode;

use asqg_core::inference::{DecodeConfig, PenaltyForm};
use asqg_core::text::vocab::DEFAULT_CAP;
use asqg_core::Error;
use clap::{Parser, Subcommand};

mod commands;
mod manifest;

use commands::{AnalyzeArgs, EvaluateArgs, GenerateArgs, PreprocessArgs, TrainArgs};

#[derive(Parser)]
#[command(name = "asqg", version, about = "Answer-separated question generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mask answers, replace entities and build a vocabulary.
    Preprocess {
        input: PathBuf,
        output: PathBuf,
        /// Keep the answer span in the passage.
        #[arg(long)]
        no_mask: bool,
        /// Skip entity replacement.
        #[arg(long)]
        no_ner: bool,
        /// Vocabulary file (default: <output stem>.vocab.txt).
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        vocab_cap: usize,
    },
    /// Train from DATA_DIR/train.jsonl (and dev.jsonl when present).
    Train {
        config: PathBuf,
        data_dir: PathBuf,
        /// Output directory (default: DATA_DIR/run).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode questions for preprocessed examples.
    Generate {
        checkpoint: PathBuf,
        input: PathBuf,
        output: PathBuf,
        /// Vocabulary file (default: vocab.txt next to the checkpoint).
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        beam: usize,
        #[arg(long, default_value_t = 2.1)]
        alpha: f64,
        #[arg(long, default_value_t = 50)]
        max_len: usize,
        /// Use len^alpha instead of ((5 + len) / 6)^alpha.
        #[arg(long)]
        power_penalty: bool,
        /// Store the passage attention matrix with every question.
        #[arg(long)]
        trace: bool,
    },
    /// Score generated questions against preprocessed gold data.
    Evaluate {
        generated: PathBuf,
        gold: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Mean and standard deviation over evaluation reports of repeated runs.
    Analyze {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write the summary as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::InvalidArgument(_)
        | Error::UnknownToken(_)
        | Error::Shape { .. }
        | Error::Json(_) => 2,
        Error::Io(_) | Error::Checkpoint(_) | Error::NonFiniteLoss { .. } | Error::Numeric(_) => 1,
    }
}

fn run(cli: Cli) -> asqg_core::Result<()> {
    match cli.command {
        Command::Preprocess {
            input,
            output,
            no_mask,
            no_ner,
            vocab,
            vocab_cap,
        } => commands::preprocess_cmd(&PreprocessArgs {
            input,
            output,
            no_mask,
            no_ner,
            vocab,
            vocab_cap,
        }),
        Command::Train {
            config,
            data_dir,
            out,
        } => commands::train_cmd(&TrainArgs {
            config,
            data_dir,
            out,
        }),
        Command::Generate {
            checkpoint,
            input,
            output,
            vocab,
            beam,
            alpha,
            max_len,
            power_penalty,
            trace,
        } => commands::generate_cmd(&GenerateArgs {
            checkpoint,
            input,
            output,
            vocab,
            decode: DecodeConfig {
                beam_width: beam,
                alpha,
                max_len,
                penalty: if power_penalty {
                    PenaltyForm::Power
                } else {
                    PenaltyForm::Gnmt
                },
            },
            trace,
        }),
        Command::Evaluate {
            generated,
            gold,
            json,
        } => commands::evaluate_cmd(&EvaluateArgs {
            generated,
            gold,
            json,
        }),
        Command::Analyze { reports, json } => commands::analyze_cmd(&AnalyzeArgs { reports, json }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
