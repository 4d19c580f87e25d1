use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ginibre_tau::moments::{MemoryStore, MomentStore};
use ginibre_tau_cli::config::{ConfigError, ErrorCode};
use ginibre_tau_cli::{execute, parse_config, run, write_output, Command, DiskStore};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Deformed random-matrix partition functions: series, oracles and checks.
#[derive(Parser)]
#[command(name = "ginibre-tau", version)]
struct Args {
    /// partition-function, compare-oracle, hirota-check, group-integral,
    /// kernel-check, moments-dump, discrete-check or suite
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Moment-table cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn config_error(e: &ConfigError) -> ExitCode {
    eprintln!("configuration error {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return config_error(&ConfigError::new(ErrorCode::Io, format!("cannot read {}: {e}", args.config.display()))),
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    let requested: Command = match serde_json::from_value(serde_json::Value::String(args.command.clone())) {
        Ok(c) => c,
        Err(_) => return config_error(&ConfigError::new(ErrorCode::InvalidValue, format!("unknown command {}", args.command))),
    };
    if requested != config.command {
        return config_error(&ConfigError::new(
            ErrorCode::InvalidValue,
            format!("command {} does not match the config's {}", requested.name(), config.command.name()),
        ));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.out.is_some() {
        config.output = args.out;
    }
    if args.cache.is_some() {
        config.cache = args.cache;
    }

    let disk;
    let memory = MemoryStore::new();
    let store: &dyn MomentStore = match &config.cache {
        Some(dir) => match DiskStore::open(dir) {
            Ok(d) => {
                disk = d;
                &disk
            }
            Err(e) => return config_error(&ConfigError::new(ErrorCode::Io, e.to_string())),
        },
        None => &memory,
    };

    let outcome = match execute(&config, store) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    match &config.output {
        Some(dir) => match write_output(&config, &outcome, dir) {
            Ok(path) => eprintln!("{} -> {}", outcome.summary, path.display()),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_FAIL);
            }
        },
        None => {
            let bytes = match run::render(&config, &outcome) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAIL);
                }
            };
            let _ = std::io::stdout().write_all(&bytes);
            eprintln!("{}", outcome.summary);
        }
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}
