//! `enhance`: command-line driver for enhancement attack experiments.
//!
//! Every subcommand reads one JSON experiment config. Diagnostics go to
//! standard error; results go to files under the config's output
//! directory. Exit codes: 0 success, 1 configuration or data error,
//! 2 numerical failure, 3 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use enhance::harness::{self, ExperimentConfig, ExperimentKind};
use enhance::Error;

#[derive(Parser, Debug)]
#[command(name = "enhance", version, about = "Enhancement attack experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config value by dotted path, e.g. `cross.n_e=20`; the
    /// value is parsed as JSON, falling back to a string.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Validate the config and print the plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Worker thread cap.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write the configured datasets as bundles under `<output>/data`.
    GenData,
    /// Within-dataset enhancement over the configured scales.
    EnhanceWithin,
    /// Method enhancement over the configured lambda and eta grid.
    EnhanceMethod,
    /// Cross-dataset enhancement of every configured model.
    EnhanceCross,
    /// Cross-dataset enhancement over generalization-set sizes.
    SweepCrossSize,
    /// Cross-validate the original data and every saved enhanced dataset.
    Evaluate,
    /// Within-dataset attacks by every model, evaluated on every model.
    Transfer,
    /// Write plot tables under `<output>/plots`.
    ExportPlots,
}

impl Command {
    fn kind(self) -> Option<ExperimentKind> {
        match self {
            Command::EnhanceWithin => Some(ExperimentKind::WithinSweep),
            Command::EnhanceMethod => Some(ExperimentKind::MethodGrid),
            Command::EnhanceCross => Some(ExperimentKind::CrossRun),
            Command::SweepCrossSize => Some(ExperimentKind::CrossSizeSweep),
            Command::Transfer => Some(ExperimentKind::TransferMatrix),
            _ => None,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            // clap routes help and version to stdout, usage errors to stderr
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match harness::error_category(e) {
        "numerical" => 2,
        "io" => 3,
        _ => 1,
    }
}

fn run(cli: &Cli) -> enhance::Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::config("--config is required"))?;
    let mut cfg = load_config(path, &cli.overrides)?;
    if let Some(kind) = cli.command.kind() {
        cfg.kind = kind;
        cfg.save_datasets = true;
    }
    cfg.validate()?;
    let out = cfg.resolved_output_dir();

    if cli.dry_run {
        let lines = match cli.command {
            Command::GenData => {
                let mut v = vec![format!("write {}", out.join("data/train").display())];
                if cfg.gen.is_some() {
                    v.push(format!("write {}", out.join("data/gen").display()));
                }
                v
            }
            Command::Evaluate => vec![format!("evaluate bundles under {}", out.join("enhanced").display())],
            Command::ExportPlots => vec![format!("export plot tables to {}", out.join("plots").display())],
            _ => cfg.plan(),
        };
        // a closed pipe on stdout is not an error of the run
        let _ = writeln!(std::io::stdout().lock(), "{}", lines.join("\n"));
        return Ok(());
    }

    match cli.command {
        Command::GenData => {
            for p in harness::generate_data(&cfg)? {
                log::info!("wrote {}", p.display());
            }
        }
        Command::Evaluate => {
            let recs = harness::evaluate_saved(&cfg)?;
            log::info!("evaluated {} cells into {}", recs.len(), out.join("evaluation.csv").display());
        }
        Command::ExportPlots => {
            for p in harness::export_plots(&out, &out.join("plots"))? {
                log::info!("wrote {}", p.display());
            }
        }
        _ => {
            let result = harness::run_experiment(&cfg)?;
            log::info!("{} result rows in {}", result.records.len(), result.output_dir.display());
        }
    }
    Ok(())
}

fn load_config(path: &Path, overrides: &[String]) -> enhance::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io {
            context: format!("reading {}", path.display()),
            source: e,
        }
    })?;
    let raw: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    if overrides.is_empty() {
        return Ok(raw);
    }
    // overrides apply to the resolved document so defaulted keys exist
    let mut doc = serde_json::to_value(&raw).expect("config serializes");
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    serde_json::from_value(doc).map_err(|e| Error::config(format!("after overrides: {e}")))
}

fn apply_override(doc: &mut Value, spec: &str) -> enhance::Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {spec:?} is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let here = parts[..=i].join(".");
        let next = match node {
            Value::Object(map) => map.get_mut(*part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|j| items.get_mut(j)),
            _ => None,
        };
        node = next.ok_or_else(|| Error::config(format!("override key {here:?} does not exist")))?;
        if node.is_null() && i + 1 < parts.len() {
            return Err(Error::config(format!("override key {here:?} is unset; set it as a whole")));
        }
    }
    *node = value;
    Ok(())
}
