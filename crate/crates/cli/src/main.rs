//! `pakd`: generate synthetic treebanks, label them with a simulated or
//! supervised teacher, run distillation pipelines and analyses, and compare
//! every pipeline across seeds.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use pakd_core::distill::PipelineKind;
use pakd_core::experiment::{AnalysisKind, RunConfig};

#[derive(Parser)]
#[command(name = "pakd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the labeled, unlabeled and test pools.
    Gen,
    /// Label the unlabeled pool with the configured teacher.
    Annotate,
    /// Run one pipeline and save its final model and report.
    Distill,
    /// Run the selected analyses.
    Analyze {
        /// Analyses to run; defaults to `analysis.select` from the config.
        #[arg(long = "analysis", value_parser = parse_analysis)]
        analyses: Vec<AnalysisKind>,
        /// A saved model whose predictions replace the freshly trained
        /// student in `buckets` and `delta`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run every configured pipeline on every configured seed.
    Bench,
}

/// Flags that override the config file. Flags win.
#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_pipeline)]
    pipeline: Option<PipelineKind>,
    #[arg(long = "r-percent", global = true)]
    r_percent: Option<f64>,
    /// Training epochs: the peer and final stages of every pipeline and the
    /// checkpoints of the curve analyses.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

fn parse_pipeline(s: &str) -> Result<PipelineKind, String> {
    s.parse()
}

fn parse_analysis(s: &str) -> Result<AnalysisKind, String> {
    s.parse()
}

/// A failure tagged with the exit code it maps to.
pub enum Failure {
    /// Bad config, bad flag values, or inputs that do not match the config.
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

pub fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn load_config(o: &Overrides) -> Result<RunConfig, Failure> {
    let mut config = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .map_err(config_error)?;
            RunConfig::from_toml(&text)
                .with_context(|| format!("in {}", path.display()))
                .map_err(config_error)?
        }
        None => RunConfig::standard(),
    };
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    if let Some(out) = &o.out {
        config.out = out.to_string_lossy().into_owned();
    }
    if let Some(kind) = o.pipeline {
        config.pipeline.kind = kind;
    }
    if let Some(r) = o.r_percent {
        config.pipeline.r_percent = r;
    }
    if let Some(epochs) = o.epochs {
        config.pipeline.peer_epochs = epochs;
        config.pipeline.final_epochs = epochs;
        config.analysis.epochs = epochs;
    }
    config.pipeline.seed = config.seed;
    config.validate().map_err(config_error)?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(&cli.overrides)?;
    let format = cli.overrides.format;
    match cli.command {
        Command::Gen => commands::gen(&config),
        Command::Annotate => commands::annotate(&config),
        Command::Distill => commands::distill(&config, format),
        Command::Analyze { analyses, model } => commands::analyze(&config, &analyses, model.as_deref(), format),
        Command::Bench => commands::bench(&config, format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Config(e) | Failure::Runtime(e)) = &failure;
            eprintln!("error: {e:#}");
            ExitCode::from(failure.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("pakd").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_the_config() {
        let dir = std::env::temp_dir().join(format!("pakd-flags-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(&path, "seed = 5\n[pipeline]\nr_percent = 30.0\nfinal_epochs = 7\n").unwrap();
        let p = path.to_str().unwrap();

        let cli = parse(&["bench", "--config", p]);
        let cfg = load_config(&cli.overrides).ok().unwrap();
        assert_eq!((cfg.seed, cfg.pipeline.r_percent, cfg.pipeline.final_epochs), (5, 30.0, 7));

        let cli = parse(&["--config", p, "--seed", "8", "--r-percent", "60", "--epochs", "4", "distill", "--pipeline", "sd"]);
        let cfg = load_config(&cli.overrides).ok().unwrap();
        assert_eq!(cfg.seed, 8);
        assert_eq!(cfg.pipeline.seed, 8);
        assert_eq!(cfg.pipeline.r_percent, 60.0);
        assert_eq!((cfg.pipeline.peer_epochs, cfg.pipeline.final_epochs, cfg.analysis.epochs), (4, 4, 4));
        assert_eq!(cfg.pipeline.kind, PipelineKind::Sd);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn missing_config_file_is_a_config_error() {
        let cli = parse(&["gen", "--config", "/definitely/not/here.toml"]);
        assert!(matches!(load_config(&cli.overrides), Err(Failure::Config(_))));
    }
}
