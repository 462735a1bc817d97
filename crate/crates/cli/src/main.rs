use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use hybridq_cli::config::{from_document, schema_text, ConfigError, Document, Mode, RunConfig};
use hybridq_cli::presets::{find, PRESETS};
use hybridq_cli::run::{run, RunError};

#[derive(Parser)]
#[command(name = "simulate", version, about = "Spin-ensemble / squeezed-cavity simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-field photon decay and fitted decay rate.
    Semiclassical(RunArgs),
    /// Lindblad evolution and cavity-state fidelity.
    Quantum(RunArgs),
    /// Lindblad evolution plus the Wigner function of one snapshot.
    Wigner(RunArgs),
    /// Mean-field decay rates over the r × δ grid, in parallel.
    Sweep(RunArgs),
    /// List presets, or print the config schema.
    Presets {
        #[arg(long)]
        schema: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config document (flat TOML); overrides the preset key by key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named parameter set.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the (δ, r) points [default: logical CPUs].
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for random class sampling (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn config_error(message: String) -> RunError {
    RunError::Config(ConfigError { key: None, line: None, message })
}

fn load(mode: Mode, args: &RunArgs) -> Result<RunConfig, RunError> {
    if args.config.is_none() && args.preset.is_none() {
        return Err(config_error("give --config, --preset, or both".into()));
    }
    let mut doc = Document::default();
    if let Some(name) = &args.preset {
        let p = find(name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            config_error(format!("unknown preset {name:?} (known: {})", known.join(", ")))
        })?;
        doc = Document::parse(p.document)?.without_lines();
        doc.remove("mode");
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        let file = Document::parse(&text)?;
        if let Some(Value::String(m)) = file.get("mode") {
            if m != mode.name() {
                return Err(config_error(format!("config says mode = {m:?} but the subcommand is {}", mode.name())));
            }
        }
        doc.overlay(&file);
    }
    doc.set("mode", Value::String(mode.name().into()));
    let mut config = from_document(&doc)?;
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(mode: Mode, args: &RunArgs) -> Result<(), RunError> {
    let config = load(mode, args)?;
    let report = run(&config, args.workers)?;
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, args) = match &cli.command {
        Command::Presets { schema } => {
            if *schema {
                print!("{}", schema_text());
            } else {
                for p in PRESETS {
                    println!("{:<10} {}", p.name, p.summary);
                }
            }
            return ExitCode::SUCCESS;
        }
        Command::Semiclassical(a) => (Mode::Semiclassical, a),
        Command::Quantum(a) => (Mode::Quantum, a),
        Command::Wigner(a) => (Mode::Wigner, a),
        Command::Sweep(a) => (Mode::Sweep, a),
    };
    match execute(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
