//! Command-line driver: synthetic data generation, training, decoding,
//! evaluation, hyperparameter sweeps and an interactive chat loop.
//!
//! The binary is a thin wrapper around [`run`]; tests drive the same entry
//! point with in-memory input and output.

pub mod artifact;
pub mod chat;
pub mod commands;
pub mod config;
pub mod error;

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ncdial::decoding::{DecoderKind, ExpansionStrategy, DEFAULT_NUCLEUS_P};

use config::{DecodeSettings, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ncdial", version, about = "Noisy-channel decoding for task-oriented dialogue")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for decoding.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus, database and train/dev/test splits.
    GenData(commands::gen_data::GenDataArgs),
    /// Train direct, channel and source models.
    Train(commands::train::TrainArgs),
    /// Decode every turn of a split.
    Decode(commands::decode::DecodeArgs),
    /// Score decode results against references.
    Eval(commands::eval::EvalArgs),
    /// Grid search over weights and beam sizes on the dev split.
    Sweep(commands::sweep::SweepArgs),
    /// Interactive session over standard input.
    Chat(chat::ChatArgs),
}

/// Decoder flags shared by `decode`, `sweep` and `chat`.
#[derive(Debug, Clone, Default, Args)]
pub struct DecoderArgs {
    /// direct, rerank or online.
    #[arg(long)]
    pub decoder: Option<DecoderKind>,
    /// Named weights and beam sizes: multiwoz, camrest or smcalflow.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda3: Option<f64>,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Candidate expansion strategy.
    #[arg(long, value_parser = ["topk", "swr", "topks", "nucleus"])]
    pub strategy: Option<String>,
    /// Nucleus mass for --strategy nucleus [default: 0.98].
    #[arg(long)]
    pub nucleus_p: Option<f64>,
}

impl DecoderArgs {
    /// Applies the preset first, then explicit values.
    pub fn apply(&self, s: &mut DecodeSettings) -> Result<(), CliError> {
        if let Some(p) = &self.preset {
            s.apply_preset(p)?;
        } else if let Some(p) = s.preset.clone() {
            s.apply_preset(&p)?;
        }
        if let Some(d) = self.decoder {
            s.decoder = d;
        }
        if let Some(v) = self.lambda1 {
            s.weights.lambda1 = v;
        }
        if let Some(v) = self.lambda2 {
            s.weights.lambda2 = v;
        }
        if let Some(v) = self.lambda3 {
            s.weights.lambda3 = v;
        }
        if let Some(v) = self.k1 {
            s.beam.k1 = v;
        }
        if let Some(v) = self.k2 {
            s.beam.k2 = v;
        }
        if let Some(v) = self.max_len {
            s.beam.max_len = v;
        }
        let p = self.nucleus_p.unwrap_or(match s.beam.strategy {
            ExpansionStrategy::Nucleus(p) => p,
            _ => DEFAULT_NUCLEUS_P,
        });
        s.beam.strategy = match self.strategy.as_deref() {
            Some("topk") => ExpansionStrategy::TopKMax,
            Some("swr") => ExpansionStrategy::SampleWithoutReplacement,
            Some("topks") => ExpansionStrategy::TopKSample,
            Some("nucleus") => ExpansionStrategy::Nucleus(p),
            Some(other) => return Err(CliError::Usage(format!("unknown strategy {other:?}"))),
            None => match s.beam.strategy {
                ExpansionStrategy::Nucleus(_) => ExpansionStrategy::Nucleus(p),
                other => other,
            },
        };
        s.weights.validate()?;
        Ok(())
    }
}

/// Resolved settings handed to each command.
pub struct Context {
    pub config: RunConfig,
    pub workers: usize,
    pub force: bool,
}

impl Context {
    pub fn new(global: &GlobalArgs) -> Result<Self, CliError> {
        let mut config = match &global.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = global.seed {
            config.seed = s;
        }
        if let Some(o) = &global.out {
            config.paths.out = o.clone();
        }
        if global.workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        Ok(Self { config, workers: global.workers, force: global.force })
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
    }
}

/// Runs one parsed command. Status lines go to `output`; `input` feeds the
/// chat loop.
pub fn run<R: BufRead, W: Write>(cli: Cli, input: R, output: &mut W) -> Result<(), CliError> {
    let mut ctx = Context::new(&cli.global)?;
    let msg = match cli.command {
        Command::GenData(a) => commands::gen_data::run(&mut ctx, &a)?,
        Command::Train(a) => commands::train::run(&mut ctx, &a)?,
        Command::Decode(a) => commands::decode::run(&mut ctx, &a)?,
        Command::Eval(a) => commands::eval::run(&mut ctx, &a)?,
        Command::Sweep(a) => commands::sweep::run(&mut ctx, &a)?,
        Command::Chat(a) => return chat::run(&mut ctx, &a, input, output),
    };
    writeln!(output, "{msg}")?;
    Ok(())
}
