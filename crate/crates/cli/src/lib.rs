//! Batch front end: one subcommand per processing stage, each writing
//! outputs, `metrics.json` and a checksummed `manifest.json`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use commands::Ctx;
use config::{ConfigFile, Params};
use error::CliError;
use output::RunLock;

type Overrides = Vec<(String, String)>;

#[derive(Debug, Parser)]
#[command(name = "hsi", version, about = "Hyperspectral cube processing")]
pub struct Cli {
    /// Run configuration (INI-style sections or flat section.key lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output root; each command writes into `<out>/<command>/`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for every random operation (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print dimensions, wavelength range, quantity and band statistics.
    Info {
        /// ENVI header.
        path: PathBuf,
    },
    /// Generate a synthetic scene with ground truth.
    Synth(commands::synth::Settings),
    /// Convert raw digital numbers to reflectance with dark and white frames.
    Calibrate(commands::calibrate::Settings),
    /// Invert a degradation with Laplacian regularization.
    Restore(commands::restore::Settings),
    /// Fuse a low-resolution cube with a high-resolution broadband image.
    Fuse(commands::fuse::Settings),
    /// PCA, MNF or band selection.
    Reduce(commands::reduce::Settings),
    /// Supervised or clustered pixel classification.
    Classify(commands::classify::Settings),
    /// Endmember extraction and abundance estimation.
    Unmix(commands::unmix::Settings),
    /// Score outputs against a synth ground-truth directory.
    Eval(commands::eval::Settings),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Info { .. } => "info",
            Command::Synth(_) => "synth",
            Command::Calibrate(_) => "calibrate",
            Command::Restore(_) => "restore",
            Command::Fuse(_) => "fuse",
            Command::Reduce(_) => "reduce",
            Command::Classify(_) => "classify",
            Command::Unmix(_) => "unmix",
            Command::Eval(_) => "eval",
        }
    }

    /// Command-line settings and the keys this command accepts.
    fn settings(&self) -> Result<(Overrides, &'static [&'static str]), CliError> {
        use commands::*;
        Ok(match self {
            Command::Info { .. } => (Vec::new(), &[]),
            Command::Synth(s) => (s.overrides()?, synth::Settings::KEYS),
            Command::Calibrate(s) => (s.overrides()?, calibrate::Settings::KEYS),
            Command::Restore(s) => (s.overrides()?, restore::Settings::KEYS),
            Command::Fuse(s) => (s.overrides()?, fuse::Settings::KEYS),
            Command::Reduce(s) => (s.overrides()?, reduce::Settings::KEYS),
            Command::Classify(s) => (s.overrides()?, classify::Settings::KEYS),
            Command::Unmix(s) => (s.overrides()?, unmix::Settings::KEYS),
            Command::Eval(s) => (s.overrides()?, eval::Settings::KEYS),
        })
    }
}

fn global<T>(flag: Option<T>, file: Option<&ConfigFile>, key: &str) -> Result<Option<T>, CliError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    match file.and_then(|f| f.global.get(key)) {
        None => Ok(None),
        Some(e) => e
            .value
            .trim()
            .parse()
            .map(Some)
            .map_err(|err: T::Err| CliError::InvalidValue {
                key: key.to_string(),
                value: e.value.clone(),
                reason: err.to_string(),
            }),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    if let Some(f) = &file {
        commands::validate_file(f)?;
    }
    let threads: Option<usize> = global(cli.threads, file.as_ref(), "threads")?;
    if let Some(n) = threads {
        // only fails if a pool already exists, as in repeated in-process runs
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::debug!("thread pool already configured: {e}");
        }
    }
    if let Command::Info { path } = &cli.command {
        return commands::info::run(path);
    }

    let name = cli.command.name();
    let (overrides, keys) = cli.command.settings()?;
    let params = Params::new(name, file.as_ref(), &overrides, keys)?;
    let global_seed: u64 = global(cli.seed, file.as_ref(), "seed")?.unwrap_or(0);
    let seed = params.get_or("seed", global_seed)?;
    let root: PathBuf =
        global(cli.out, file.as_ref(), "out")?.ok_or_else(|| CliError::MissingKey("out".into()))?;
    let _lock = RunLock::acquire(&root)?;
    let ctx = Ctx {
        global: json!({ "seed": seed, "threads": threads }),
        root,
        seed,
        params,
    };
    match &cli.command {
        Command::Info { .. } => unreachable!("handled above"),
        Command::Synth(_) => commands::synth::run(&ctx),
        Command::Calibrate(_) => commands::calibrate::run(&ctx),
        Command::Restore(_) => commands::restore::run(&ctx),
        Command::Fuse(_) => commands::fuse::run(&ctx),
        Command::Reduce(_) => commands::reduce::run(&ctx),
        Command::Classify(_) => commands::classify::run(&ctx),
        Command::Unmix(_) => commands::unmix::run(&ctx),
        Command::Eval(_) => commands::eval::run(&ctx),
    }
}
