//! `tdgsim` command line.
//!
//! Exit codes: 0 ok, 1 config error, 2 runtime error, 3 ledger audit failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use tdgsim::distribution::Strategy;
use tdgsim::ledger::Ledger;
use tdgsim::scenario::{self, summary_csv, Mode, RunError, ScenarioConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_LEDGER: u8 = 3;

#[derive(Parser)]
#[command(name = "tdgsim", version, about = "Volunteer desktop grid simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run {
        /// Scenario file; repeat for a batch.
        #[arg(long = "scenario", required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory. Batches write one subdirectory per scenario.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        strategy: Option<Strategy>,
        /// Horizon override.
        #[arg(long)]
        ticks: Option<u64>,
        /// Scenario files run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a ledger export's hash chain.
    VerifyLedger { file: PathBuf },
    /// Recompute metrics from an event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

struct Overrides {
    seed: Option<u64>,
    mode: Option<Mode>,
    strategy: Option<Strategy>,
    ticks: Option<u64>,
}

fn load(path: &Path, o: &Overrides) -> Result<ScenarioConfig, u8> {
    let report = |e: scenario::ConfigError| {
        for m in e.messages() {
            eprintln!("{}: {m}", path.display());
        }
        EXIT_CONFIG
    };
    let mut cfg = scenario::parse_scenario(path).map_err(report)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(m) = o.mode {
        cfg.mode = m;
    }
    if let Some(s) = o.strategy {
        cfg.strategy = s;
    }
    if let Some(t) = o.ticks {
        cfg.horizon_ticks = t;
    }
    cfg.validate().map_err(report)?;
    Ok(cfg)
}

fn run_one(path: &Path, o: &Overrides, out: &Path) -> Result<String, u8> {
    let cfg = load(path, o)?;
    let fail = |e: RunError| {
        eprintln!("{}: {e}", path.display());
        match e {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::LedgerCorrupt(_) => EXIT_LEDGER,
            _ => EXIT_RUNTIME,
        }
    };
    let output = scenario::run(&cfg).map_err(fail)?;
    scenario::write_outputs(&cfg, &output, out).map_err(fail)?;
    Ok(summary_csv(&output.report))
}

fn cmd_run(scenarios: &[PathBuf], o: &Overrides, out: &Path, jobs: usize) -> u8 {
    if scenarios.len() == 1 {
        return match run_one(&scenarios[0], o, out) {
            Ok(summary) => {
                print!("{summary}");
                0
            }
            Err(code) => code,
        };
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<String, u8>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, scenarios.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(path) = scenarios.get(i) else { break };
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
                let dir = out.join(stem.unwrap_or_else(|| format!("scenario{i}")));
                let r = run_one(path, o, &dir);
                results
                    .lock()
                    .expect("no panics while holding")
                    .push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("workers joined");
    results.sort_by_key(|r| r.0);
    let mut code = 0;
    for (i, r) in results {
        match r {
            Ok(_) => println!("{}: ok", scenarios[i].display()),
            Err(c) => code = code.max(c),
        }
    }
    code
}

fn cmd_verify(file: &Path) -> u8 {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", file.display());
            return EXIT_RUNTIME;
        }
    };
    let ledger = match Ledger::import(&text) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("{}: {e}", file.display());
            return EXIT_LEDGER;
        }
    };
    match ledger.verify_chain() {
        Ok(()) => {
            println!(
                "ok: {} blocks, {} millicredits, head {}",
                ledger.len(),
                ledger.total_committed(),
                hex::encode(ledger.head_hash())
            );
            0
        }
        Err(i) => {
            eprintln!("{}: block {i} fails verification", file.display());
            EXIT_LEDGER
        }
    }
}

fn cmd_replay(log: &Path) -> u8 {
    match scenario::replay_log(log) {
        Ok((_, _, report)) => {
            print!("{}", summary_csv(&report));
            0
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_RUNTIME
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenarios,
            seed,
            out,
            mode,
            strategy,
            ticks,
            jobs,
        } => {
            let o = Overrides {
                seed,
                mode,
                strategy,
                ticks,
            };
            cmd_run(&scenarios, &o, &out, jobs)
        }
        Command::VerifyLedger { file } => cmd_verify(&file),
        Command::Replay { log } => cmd_replay(&log),
    };
    ExitCode::from(code)
}
