use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use saddle_cli::config::{parse_config_with_overrides, ExperimentConfig};
use saddle_cli::experiment::run_experiment;
use saddle_cli::report::emit_report;
use saddle_cli::sweep::{parse_grid, sweep_csv};
use saddle_cli::OUT_DIR_ENV;

/// Runs saddle-point solver experiments and certifies their contraction bounds.
///
/// Exit codes: 0 every certificate passed, 1 a certificate failed,
/// 2 invalid config, module error or I/O error.
#[derive(Parser)]
#[command(name = "saddle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certificates plus every method in `[run] methods`.
    Run {
        config: PathBuf,
        /// `section.key=value`, applied after the file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory; beats the environment variable and the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certificates only.
    Verify {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate-formula landscape, e.g. `--grid delta=0:0.6:50,gamma=0:0.99:50`.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config_with_overrides(&text, overrides).map_err(|e| format!("{}:\n{e}", path.display()))
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| cfg.output.clone())
}

fn experiment(config: &Path, overrides: &[String], out: Option<PathBuf>, run_methods: bool) -> Result<u8, String> {
    let cfg = load(config, overrides)?;
    let dir = out_dir(out, &cfg);
    let ex = run_experiment(&cfg, run_methods);
    let written = emit_report(&ex, &dir).map_err(|e| format!("writing reports to {}: {e}", dir.display()))?;
    if let Some(e) = &ex.error {
        eprintln!("error: {e}");
    }
    println!("{}", written.csv.display());
    println!("{}", written.markdown.display());
    Ok(ex.exit_code() as u8)
}

fn sweep(config: &Path, grid: &str, out: Option<PathBuf>) -> Result<u8, String> {
    let cfg = load(config, &[])?;
    let grid = parse_grid(grid).map_err(|e| format!("--grid: {e}"))?;
    let dir = out_dir(out, &cfg);
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let path = dir.join("sweep.csv");
    fs::write(&path, sweep_csv(&grid)).map_err(|e| format!("{}: {e}", path.display()))?;
    println!("{}", path.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides, out } => experiment(&config, &overrides, out, true),
        Command::Verify { config, overrides, out } => experiment(&config, &overrides, out, false),
        Command::Sweep { config, grid, out } => sweep(&config, &grid, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
