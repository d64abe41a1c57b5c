use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ivtm::data::Mode;

mod commands;
mod config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ivtm::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 1 runtime or IO failure, 2 invalid input or configuration, 3 incompatible checkpoint.
    pub fn exit_code(&self) -> u8 {
        use ivtm::Error as E;
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::CheckpointMismatch(_) => 3,
                E::Io(_)
                | E::Image(_)
                | E::Csv(_)
                | E::Json(_)
                | E::Archive(_)
                | E::CorruptFile { .. }
                | E::Flow(_)
                | E::NonFiniteLoss { .. } => 1,
                _ => 2,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Image,
    Video,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Image => Mode::Image,
            ModeArg::Video => Mode::Video,
        }
    }
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML or JSON file with training, generator and schedule settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output location; defaults to a per-command directory under $IVTM_CACHE_DIR.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Parser)]
#[command(name = "ivtm", version, about = "Unsupervised HDR image and video tone mapping")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn HDR or LDR stills into short clips by random cropping.
    Synth(commands::SynthArgs),
    /// Train a generator and discriminator pair.
    Train(commands::TrainArgs),
    /// Tone map an HDR image or a directory of HDR frames.
    Tonemap(commands::TonemapArgs),
    /// Score a tone mapper on a directory of HDR videos.
    Eval(commands::EvalArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&cli.global, a),
        Command::Train(a) => commands::train(&cli.global, a),
        Command::Tonemap(a) => commands::tonemap(&cli.global, a),
        Command::Eval(a) => commands::eval(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
