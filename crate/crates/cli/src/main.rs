//! Batch driver: `resdist run <config.json>`, `resdist convergence
//! <config.json> --levels n1,n2,...`, `resdist selftest`.
//!
//! Exit codes: 2 for configuration errors, 3 when a solver leaves the
//! invariant domain or violates a time-step bound (the last valid snapshot is
//! flushed first), 4 for geometry and mesh-format errors.

mod config;
mod convergence;
mod problems;

use clap::{Parser, Subcommand};
use config::RunConfig;
use resdist::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "resdist", about = "Residual/fluctuation-form hyperbolic solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem from a JSON configuration.
    Run { config: PathBuf },
    /// Mesh-refinement study across the given levels.
    Convergence {
        config: PathBuf,
        /// Comma-separated resolutions, e.g. 24,48,96.
        #[arg(long)]
        levels: String,
    },
    /// Flux-recovery and Riemann-oracle self checks.
    Selftest,
}

fn solver_exit(e: &Error) -> u8 {
    match e {
        Error::InvariantDomain(_) | Error::TimeStep(_) | Error::NodalSolver { .. } => 3,
        Error::Geometry(_) | Error::MeshFormat(_) => 4,
        Error::Argument(_) => 2,
        _ => 1,
    }
}


/// Worker-thread cap from `RESDIST_THREADS`; solvers run their reductions in
/// a fixed order regardless, so outputs do not depend on it.
fn thread_count() -> Result<usize, String> {
    match std::env::var("RESDIST_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("RESDIST_THREADS must be a positive integer, got '{v}'")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = thread_count() {
        eprintln!("configuration error: {msg}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Run { config } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            match problems::run(&cfg) {
                Ok(out) => {
                    for line in out.summary {
                        println!("{line}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(solver_exit(&e))
                }
            }
        }
        Command::Convergence { config, levels } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let parsed: Result<Vec<usize>, _> =
                levels.split(',').map(|s| s.trim().parse::<usize>()).collect();
            let parsed = match parsed {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("configuration error: bad --levels list: {e}");
                    return ExitCode::from(2);
                }
            };
            match convergence::convergence(&cfg, &parsed)
                .and_then(|rows| convergence::write_rate_table(&cfg, &rows))
            {
                Ok(lines) => {
                    for line in lines {
                        println!("{line}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("convergence failed: {e}");
                    ExitCode::from(solver_exit(&e))
                }
            }
        }
        Command::Selftest => {
            let cfg = RunConfig::from_json(
                r#"{"problem": "flux-recovery-selftest", "output_dir": "out"}"#,
            )
            .expect("static selftest configuration");
            let mut failed = false;
            match problems::run(&cfg) {
                Ok(out) => {
                    for line in out.summary {
                        println!("{line}");
                    }
                }
                Err(e) => {
                    println!("{e}");
                    failed = true;
                }
            }
            // quick oracle check: Sod star pressure, Newton vs bisection
            let eos = resdist::gas::IdealGasEos::new(1.4).unwrap();
            let l = resdist::gas::Primitive1 { rho: 1.0, v: 0.0, p: 1.0 };
            let r = resdist::gas::Primitive1 { rho: 0.125, v: 0.0, p: 0.1 };
            let newton = resdist::gas::ExactRiemann::solve(l, r, &eos).unwrap().p_star;
            let bisect = resdist::gas::ExactRiemann::star_pressure_bisection(l, r, &eos).unwrap();
            let ok = (newton - bisect).abs() < 1e-10 && (newton - 0.30313).abs() < 1e-5;
            println!(
                "riemann-oracle-selftest: p* = {:.6} (bisection {:.6}) -> {}",
                newton,
                bisect,
                if ok { "PASS" } else { "FAIL" }
            );
            if failed || !ok {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
