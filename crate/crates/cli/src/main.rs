use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use mdsim::runner::run;
use mdsim::scenario::{load_scenario, Scenario};

const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "sim", version, about = "Multi-domain network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios and write their reports.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory. With several scenarios each gets a
        /// subdirectory named after its file.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Record attributions for selection decisions.
        #[arg(long)]
        explain: bool,
        /// Number of scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn run_one(sc: &Scenario, out: &Path) -> Result<String, String> {
    let report = run(sc).map_err(|e| e.to_string())?;
    report
        .write_to(out)
        .map_err(|e| format!("writing {}: {e}", out.display()))?;
    Ok(format!(
        "{}: {} flows, {} violation windows, {:.3} J, digest {} -> {}",
        report.scenario,
        report.flows,
        report.violations(),
        report.energy.total_joules,
        report.trace_digest,
        out.display()
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { scenario } => match load_scenario(&scenario) {
            Ok(sc) => {
                println!(
                    "{}: ok ({} domains, {} workloads)",
                    scenario.display(),
                    sc.domains.len(),
                    sc.workloads.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}: {e}", scenario.display());
                ExitCode::from(EXIT_INVALID)
            }
        },
        Command::Run {
            scenarios,
            seed,
            out,
            explain,
            jobs,
        } => {
            let mut loaded = Vec::with_capacity(scenarios.len());
            for path in &scenarios {
                match load_scenario(path) {
                    Ok(mut sc) => {
                        if let Some(s) = seed {
                            sc.seed = s;
                        }
                        sc.toggles.explain |= explain;
                        let dir = if scenarios.len() == 1 {
                            out.clone()
                        } else {
                            out.join(stem(path))
                        };
                        loaded.push((sc, dir));
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        return ExitCode::from(EXIT_INVALID);
                    }
                }
            }

            let next = AtomicUsize::new(0);
            let results: Mutex<Vec<Option<Result<String, String>>>> =
                Mutex::new(vec![None; loaded.len()]);
            std::thread::scope(|s| {
                for _ in 0..jobs.clamp(1, loaded.len().max(1)) {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some((sc, dir)) = loaded.get(i) else {
                            break;
                        };
                        let r = run_one(sc, dir);
                        results.lock().expect("no poisoned lock")[i] = Some(r);
                    });
                }
            });

            let mut failed = false;
            for (r, path) in results.into_inner().expect("no poisoned lock").into_iter().zip(&scenarios) {
                match r.expect("every scenario ran") {
                    Ok(line) => println!("{line}"),
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        failed = true;
                    }
                }
            }
            if failed {
                ExitCode::from(EXIT_RUNTIME)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
