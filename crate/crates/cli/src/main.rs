//! `crossdiff run <config>...` and `crossdiff list`.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 on a
//! configuration or solver error.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod config;
mod output;
mod scenarios;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{load_config, ScenarioId};

#[derive(Parser)]
#[command(
    name = "crossdiff",
    version,
    about = "Gradient-flow experiments for cross-diffusion systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// `key=value`, dotted keys for nested tables; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (with several configs, one subdirectory each).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Configs run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the scenario ids.
    List,
}

const CHECK_FAILED: u8 = 2;
const ERROR: u8 = 1;

fn run_one(path: &Path, overrides: &[String], out: Option<&Path>) -> u8 {
    let result = (|| -> anyhow::Result<(String, scenarios::Outcome)> {
        let config = load_config(path, overrides)?;
        let dir = config.output_dir(out);
        let outcome = scenarios::run(&config, &dir)?;
        Ok((config.scenario.name().to_string(), outcome))
    })();
    match result {
        Ok((name, outcome)) => {
            let mut lines = vec![format!("{} ({})", name, path.display())];
            for c in &outcome.checks {
                lines.push(format!(
                    "  {} {} margin {:.3e} tol {:.1e}{}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.margin,
                    c.tolerance,
                    c.detail
                        .as_deref()
                        .map(|d| format!(" [{d}]"))
                        .unwrap_or_default()
                ));
            }
            if let Some(dir) = outcome.files.first().and_then(|f| f.parent()) {
                lines.push(format!(
                    "  wrote {} files to {}",
                    outcome.files.len(),
                    dir.display()
                ));
            }
            println!("{}", lines.join("\n"));
            if outcome.all_pass() {
                0
            } else {
                CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {}: {e:#}", path.display());
            ERROR
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for s in ScenarioId::ALL {
                println!("{:<22} {}", s.name(), s.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            configs,
            overrides,
            out,
            jobs,
        } => {
            let several = configs.len() > 1;
            let out_for = |p: &Path| -> Option<PathBuf> {
                out.as_ref().map(|o| {
                    if several {
                        o.join(p.file_stem().unwrap_or_default())
                    } else {
                        o.clone()
                    }
                })
            };
            let pool = match rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
            {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot start {jobs} workers: {e}");
                    return ExitCode::from(ERROR);
                }
            };
            let codes: Vec<u8> = pool.install(|| {
                configs
                    .par_iter()
                    .map(|p| run_one(p, &overrides, out_for(p).as_deref()))
                    .collect()
            });
            // A configuration error outranks a failed check.
            let code = if codes.contains(&ERROR) {
                ERROR
            } else {
                codes.into_iter().max().unwrap_or(0)
            };
            ExitCode::from(code)
        }
    }
}
