use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use clipreg::config::RunConfig;
use clipreg::runner;
use clipreg::zoo::Zoo;

/// Split a bounded function on [-1,1]^n into a small clipped network plus
/// a residual that small networks cannot see.
#[derive(Parser)]
#[command(name = "clipreg", version)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files (default: current directory).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the decomposition; writes report, trace and witness files.
    Decompose {
        #[command(flatten)]
        run: RunArgs,
        /// Re-verify the written report before exiting.
        #[arg(long)]
        verify: bool,
    },
    /// Search for the dictionary element best correlated with the target.
    Adversary {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Repeat the decomposition over several dimensions.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
    },
    /// Target functions.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
    /// Re-verify a report.json.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Subcommand)]
enum ZooAction {
    /// List built-in targets and their parameters.
    List,
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("config {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Decompose { run, verify } => {
            let cfg = load(&run.config)?;
            let report = runner::run_decompose(&cfg)?;
            runner::write_run(&report, &run.out_dir)?;
            let r = &report.report;
            println!(
                "m' = {} (budget {}), residual_l2_sq = {}, audit = {} [{}]",
                r.m_prime, r.m_budget, r.residual_l2_sq, r.audit.result.value, r.audit.verdict
            );
            if verify {
                let written = runner::read_report(&run.out_dir.join(&cfg.output.report))?;
                return report_certification(&runner::verify(&written)?);
            }
            Ok(true)
        }
        Command::Adversary { run } => {
            let cfg = load(&run.config)?;
            let result = runner::run_adversary(&cfg)?;
            fs::create_dir_all(&run.out_dir)?;
            let json = runner::to_json(&result)?;
            fs::write(run.out_dir.join(&cfg.output.adversary), &json)?;
            print!("{json}");
            Ok(true)
        }
        Command::Sweep { run, n } => {
            let cfg = load(&run.config)?;
            let rows = runner::run_sweep(&cfg, &n)?;
            let mut csv = Vec::new();
            runner::write_sweep_csv(&rows, &mut csv)?;
            fs::create_dir_all(&run.out_dir)?;
            fs::write(run.out_dir.join(&cfg.output.sweep), &csv)?;
            print!("{}", String::from_utf8(csv)?);
            Ok(true)
        }
        Command::Zoo {
            action: ZooAction::List,
        } => {
            for f in Zoo::with_builtins().families() {
                println!(
                    "{:<14} {}  params: {:?}",
                    f.name(),
                    f.summary(),
                    f.param_names()
                );
            }
            Ok(true)
        }
        Command::Verify { report } => {
            let run = runner::read_report(&report)
                .with_context(|| format!("report {}", report.display()))?;
            report_certification(&runner::verify(&run)?)
        }
    }
}

fn report_certification(cert: &clipreg::decomposer::Certification) -> Result<bool> {
    if cert.ok {
        println!("verify: ok");
    } else {
        println!("verify: FAILED");
        for d in &cert.details {
            println!("  {d}");
        }
    }
    Ok(cert.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let outcome = match threads {
        Some(0) => Err(anyhow::anyhow!("--threads must be positive")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .context("thread pool")
            .and_then(|pool| pool.install(|| run(cli))),
        None => run(cli),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
