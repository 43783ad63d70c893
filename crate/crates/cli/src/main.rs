//! `pure`: corpus generation, training, coding and evaluation.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pure",
    version,
    about = "Entropy-guided residual vector quantization codec"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic clean/noisy corpus.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a quantizer stack on a generated corpus.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corpus directory; overrides the `corpus` key.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        p_enh: Option<f64>,
        #[arg(long)]
        delay_steps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a WAV file into a `.pure` packet.
    Encode {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        /// Number of streams to keep; defaults to every stage.
        #[arg(long)]
        streams: Option<usize>,
        /// Enhanced version of the input used as the stage-1 anchor.
        #[arg(long)]
        enhance_ref: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a `.pure` packet into a 32-bit float WAV file.
    Decode {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perceptual entropy of WAV files or code entropy of packets.
    Analyze {
        /// One or more WAV or `.pure` files. With two WAV files the
        /// reduction from the first to the second is reported as well.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Compare a decoded signal with its reference.
    Eval {
        reference: PathBuf,
        estimate: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Packet whose streams are scored against the reference embeddings.
        #[arg(long)]
        packet: Option<PathBuf>,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenData { config, seed, out } => commands::gen_data(config.as_deref(), seed, &out),
        Command::Train {
            config,
            corpus,
            seed,
            p_enh,
            delay_steps,
            out,
        } => commands::train(
            config.as_deref(),
            commands::TrainOverrides {
                corpus,
                seed,
                p_enh,
                delay_steps,
            },
            &out,
        ),
        Command::Encode {
            model,
            input,
            streams,
            enhance_ref,
            out,
        } => commands::encode(&model, &input, streams, enhance_ref.as_deref(), &out),
        Command::Decode { model, input, out } => commands::decode(&model, &input, &out),
        Command::Analyze { inputs } => commands::analyze(&inputs),
        Command::Eval {
            reference,
            estimate,
            model,
            packet,
            out,
        } => commands::eval(
            &reference,
            &estimate,
            model.as_deref(),
            packet.as_deref(),
            out.as_deref(),
        ),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
