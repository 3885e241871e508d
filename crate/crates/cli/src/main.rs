//! Command-line front end of the pelab laboratory.

mod checks;
mod entropy;
mod output;
mod report;
mod run;
mod suite;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit codes: 0 success, 1 usage/config error or failed checks, 2 domain
/// abort.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
    Checks(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Checks(_) => 1,
            Failure::Domain(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "error: {e:#}"),
            Failure::Domain(e) => write!(f, "domain abort: {e}"),
            Failure::Checks(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pelab",
    version,
    about = "Finite-difference laboratory for generalized diffusion systems"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed of every run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write snapshots plus a manifest.
    Run { config: PathBuf },
    /// Run a verification suite (a path or a bundled name).
    Verify { suite: String },
    /// Run the cells of a parameter sweep concurrently.
    Sweep { sweep: PathBuf },
    /// Certify a potential and export its γ and decomposition tables.
    Entropy {
        /// Built-in id or path to a JSON potential description.
        potential: String,
        #[arg(long, default_value_t = 1.0)]
        r_max: f64,
    },
    /// Summarize the manifests under a directory.
    Report { dir: PathBuf },
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Usage(e.into()))?;
    }
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match &cli.command {
        Command::Run { config } => run::cmd_run(config, &out("pelab-run"), cli.seed),
        Command::Verify { suite } => suite::cmd_verify(suite, &out("pelab-verify"), cli.seed),
        Command::Sweep { sweep } => sweep::cmd_sweep(sweep, &out("pelab-sweep"), cli.seed),
        Command::Entropy { potential, r_max } => {
            entropy::cmd_entropy(potential, *r_max, &out("pelab-entropy"))
        }
        Command::Report { dir } => report::cmd_report(dir, cli.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code())
        }
    }
}
