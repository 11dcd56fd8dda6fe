mod config;
mod experiments;

use clap::{Parser, Subcommand};
use config::{check_writable, load, ConfigError, ExperimentConfig};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const SEED_ENV: &str = "CARLEMAN_LAB_SEED";

#[derive(Parser, Debug)]
#[command(name = "carleman-lab", version, about = "Runs degenerate parabolic control experiments from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment named in the config.
    Run {
        config: PathBuf,
        /// Worker threads for the parallel parts (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn invalid(err: ConfigError) -> ExitCode {
    eprintln!("invalid config:\n{err}");
    ExitCode::from(2)
}

fn load_valid(path: &Path) -> Result<(Vec<u8>, ExperimentConfig), ConfigError> {
    let (bytes, cfg) = load(path)?;
    cfg.validate()?;
    Ok((bytes, cfg))
}

fn resolve_seed(cfg: &ExperimentConfig) -> Result<(u64, &'static str), ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| (s, "environment"))
            .map_err(|_| ConfigError { messages: vec![format!("{SEED_ENV}: {v:?} is not an unsigned integer")] }),
        Err(_) => Ok((cfg.seed, "config")),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(dir.join(name))?;
    f.write_all(bytes)?;
    f.flush()
}

fn run(path: &Path, jobs: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let (bytes, cfg) = match load_valid(path) {
        Ok(v) => v,
        Err(e) => return invalid(e),
    };
    let (seed, seed_source) = match resolve_seed(&cfg) {
        Ok(s) => s,
        Err(e) => return invalid(e),
    };
    if jobs == Some(0) {
        return invalid(ConfigError { messages: vec!["--jobs: must be >= 1".into()] });
    }
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    if let Err(e) = check_writable(&dir) {
        return invalid(e);
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };

    let start = Instant::now();
    let result = pool.install(|| experiments::run(&cfg, seed));
    let elapsed = start.elapsed().as_secs_f64();
    let hash = hex::encode(Sha256::digest(&bytes));
    let mut log = vec![
        format!("carleman-lab {}", env!("CARGO_PKG_VERSION")),
        format!("experiment {} ({})", cfg.experiment.name(), experiments::anchor(cfg.experiment)),
        format!("config {} sha256 {hash}", path.display()),
        format!("seed {seed} from {seed_source}, generator {}", carleman_core::sampling::GENERATOR_NAME),
        format!("threads {}", pool.current_num_threads()),
    ];

    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            log.push(format!("error: {e}"));
            let _ = write_file(&dir, "run.log", (log.join("\n") + "\n").as_bytes());
            eprintln!("invariant violated: experiment did not complete: {e}");
            return ExitCode::FAILURE;
        }
    };
    log.extend(outcome.log.iter().cloned());
    let failed: Vec<&str> = outcome.invariants.iter().filter(|i| !i.passed).map(|i| i.name.as_str()).collect();
    let summary = json!({
        "experiment": cfg.experiment,
        "anchor": outcome.anchor,
        "status": if failed.is_empty() { "pass" } else { "fail" },
        "seed": seed,
        "seed_source": seed_source,
        "generator": carleman_core::sampling::GENERATOR_NAME,
        "config_sha256": hash,
        "version": env!("CARGO_PKG_VERSION"),
        "invariants": outcome.invariants,
        "results": outcome.results,
        "files": outcome.files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
    });
    let mut files = outcome.files;
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    files.push(("summary.json".into(), text.into_bytes()));
    for (name, data) in &files {
        if let Err(e) = write_file(&dir, name, data) {
            eprintln!("error: cannot write {}: {e}", dir.join(name).display());
            return ExitCode::FAILURE;
        }
    }
    log.push(format!("wrote {} files to {} in {elapsed:.2}s", files.len(), dir.display()));
    if let Err(e) = write_file(&dir, "run.log", (log.join("\n") + "\n").as_bytes()) {
        eprintln!("error: cannot write log: {e}");
        return ExitCode::FAILURE;
    }
    for line in &log {
        println!("{line}");
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("invariant violated: {}", failed.join("; "));
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, jobs, out } => run(&config, jobs, out),
        Command::Validate { config } => match load_valid(&config).and_then(|(_, c)| resolve_seed(&c).map(|_| c)) {
            Ok(cfg) => {
                println!("{}: valid {} config", config.display(), cfg.experiment.name());
                ExitCode::SUCCESS
            }
            Err(e) => invalid(e),
        },
    }
}
