//! Driving a scenario to its horizon and writing the results.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ledger::{Ledger, HASH_ALGORITHM};
use crate::sim::{read_log, write_log, Counters, LogHeader, SimEvent, World};

use super::config::{ConfigError, ScenarioConfig};
use super::metrics::{compute_metrics, MetricsReport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("internal consistency failure: ledger block {0} does not verify")]
    LedgerCorrupt(usize),
    #[error("internal consistency failure: {0}")]
    Inconsistent(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    BadLog { path: PathBuf, reason: String },
}

#[derive(Debug)]
pub struct RunOutput {
    pub header: LogHeader,
    pub events: Vec<SimEvent>,
    pub report: MetricsReport,
    pub ledger: Ledger,
    pub counters: Counters,
}

pub fn log_header(cfg: &ScenarioConfig) -> LogHeader {
    let agents = cfg
        .agents
        .iter()
        .flat_map(|g| std::iter::repeat_n(g.profile.as_str().to_string(), g.count as usize))
        .collect();
    LogHeader {
        name: cfg.name.clone(),
        mode: cfg.mode.to_string(),
        strategy: cfg.strategy.to_string(),
        seed: cfg.seed,
        horizon_ticks: cfg.horizon_ticks,
        hash: HASH_ALGORITHM.into(),
        servers: cfg.work.servers,
        agents,
    }
}

/// Runs `cfg` to its horizon, derives the metrics from the log and audits
/// them against the engine's own counters and the ledger.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let mut world = World::new(cfg);
    let mut events = Vec::new();
    for _ in 0..cfg.horizon_ticks {
        events.extend(world.step());
    }
    let header = log_header(cfg);
    let report = compute_metrics(&header, &events);
    let counters = world.counters().clone();
    let ledger = world.into_ledger();
    audit(&report, &counters, &ledger)?;
    Ok(RunOutput {
        header,
        events,
        report,
        ledger,
        counters,
    })
}

fn audit(report: &MetricsReport, c: &Counters, ledger: &Ledger) -> Result<(), RunError> {
    ledger.verify_chain().map_err(RunError::LedgerCorrupt)?;
    let checks = [
        ("issued", report.issued, c.issued),
        ("validated", report.validated, c.validated),
        ("redistributed", report.redistributed, c.redistributed),
        ("abandoned", report.abandoned, c.abandoned),
        (
            "wasted_work",
            report.wasted_work,
            c.units_resolved - c.units_useful,
        ),
        (
            "credit_committed",
            report.credit_committed,
            c.credit_committed,
        ),
        (
            "ledger total",
            report.credit_committed,
            ledger.total_committed(),
        ),
        ("ledger_blocks", report.ledger_blocks, ledger.len() as u64),
    ];
    for (what, from_log, expected) in checks {
        if from_log != expected {
            return Err(RunError::Inconsistent(format!(
                "{what}: log says {from_log}, engine says {expected}"
            )));
        }
    }
    if report.ledger_head != hex::encode(ledger.head_hash()) {
        return Err(RunError::Inconsistent(
            "ledger head differs from log".into(),
        ));
    }
    Ok(())
}

fn write(path: PathBuf, contents: &str) -> Result<(), RunError> {
    fs::write(&path, contents).map_err(|source| RunError::Io { path, source })
}

pub fn summary_csv(report: &MetricsReport) -> String {
    let mut s = String::from("metric,value\n");
    for (k, v) in report.summary_rows() {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

pub fn series_csv(report: &MetricsReport) -> String {
    let mut s = String::from("tick,issued,validated,active_agents,etc_size\n");
    for r in &report.series {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.tick, r.issued, r.validated, r.active_agents, r.etc_size
        ));
    }
    s
}

/// Writes `summary.csv`, `series.csv` and `ledger.txt` into `dir`.
pub fn emit_report(report: &MetricsReport, ledger: &Ledger, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write(dir.join("summary.csv"), &summary_csv(report))?;
    write(dir.join("series.csv"), &series_csv(report))?;
    write(dir.join("ledger.txt"), &ledger.export())
}

/// Full output set of a run: the report files, the config echo and the
/// event log.
pub fn write_outputs(cfg: &ScenarioConfig, out: &RunOutput, dir: &Path) -> Result<(), RunError> {
    emit_report(&out.report, &out.ledger, dir)?;
    write(dir.join("effective_config.txt"), &cfg.to_toml())?;
    let path = dir.join("events.jsonl");
    let mut buf = Vec::new();
    write_log(&mut buf, &out.header, &out.events).expect("writing to memory");
    fs::write(&path, buf).map_err(|source| RunError::Io { path, source })
}

/// Recomputes the metrics from a saved event log.
pub fn replay_log(path: &Path) -> Result<(LogHeader, Vec<SimEvent>, MetricsReport), RunError> {
    let file = fs::File::open(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (header, events) = read_log(BufReader::new(file)).map_err(|reason| RunError::BadLog {
        path: path.to_path_buf(),
        reason,
    })?;
    let report = compute_metrics(&header, &events);
    Ok((header, events, report))
}
