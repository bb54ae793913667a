//! `svhj`: command-line front end for the set-valued Hamilton-Jacobi
//! library. Every command reads a JSON run configuration and writes CSV
//! or JSON artifacts; failures are reported as one machine-readable JSON
//! object on stderr together with a per-family exit code.

mod commands;
mod config;
mod export;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "svhj", version, about = "Set-valued Hamilton-Jacobi equations by characteristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory the artifacts are written into.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the solution curve over the base and write curve.csv.
    Curve(CommonArgs),
    /// Write the half-space family and its boundary polyline.
    Halfspaces(CommonArgs),
    /// Verify the support-gap hypothesis and write hypu.json.
    CheckHypu(CommonArgs),
    /// Scan the existence horizon and write tstar.json.
    Tstar(CommonArgs),
    /// Sweep the conjugate identities and write fenchel.csv.
    FenchelCheck(CommonArgs),
    /// Solve the Hopf-Lax minimization and write hopflax.csv.
    Hopflax(CommonArgs),
    /// Run a pinned reproduction bundle (ex1 or ex2).
    Example {
        /// Which bundle to run: ex1 or ex2.
        #[arg(long)]
        name: String,
        /// Optional config; it is validated, but the bundle keeps its own
        /// pinned parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory the artifacts are written into.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SVHJ_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            CliError::Config(format!(
                "SVHJ_THREADS must be a positive integer, got '{raw}'"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Internal(format!("cannot configure the thread pool: {e}")))
}

fn prepare(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(&args.config).map_err(CliError::Config)?;
    ensure_out(&args.out)?;
    Ok(cfg)
}

fn ensure_out(out: &std::path::Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", out.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Curve(args) => commands::cmd_curve(&prepare(&args)?, &args.out),
        Command::Halfspaces(args) => commands::cmd_halfspaces(&prepare(&args)?, &args.out),
        Command::CheckHypu(args) => commands::cmd_check_hypu(&prepare(&args)?, &args.out),
        Command::Tstar(args) => commands::cmd_tstar(&prepare(&args)?, &args.out),
        Command::FenchelCheck(args) => commands::cmd_fenchel_check(&prepare(&args)?, &args.out),
        Command::Hopflax(args) => commands::cmd_hopflax(&prepare(&args)?, &args.out),
        Command::Example { name, config, out } => {
            if let Some(path) = config {
                RunConfig::load(&path).map_err(CliError::Config)?;
            }
            ensure_out(&out)?;
            commands::cmd_example(&name, &out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!(
            "{}",
            serde_json::json!({"error": {"code": e.code(), "message": e.message()}})
        );
        std::process::exit(e.exit_code());
    }
}
