//! Simulation event log.
//!
//! The log is the only input metrics are computed from, so every event
//! carries what a reader needs without access to the world state. A log
//! file is one JSON header line followed by one JSON event per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::community::MembershipEvent;
use crate::ids::{AgentId, CommunityId, ServerId, Tick, WorkUnitId};
use crate::trust::RatingCause;

/// Who handed out a work unit or receives its result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Server(ServerId),
    Agent(AgentId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RedistributeReason {
    /// Centralized server deadline passed.
    Timeout,
    /// The replica group produced no strict majority.
    NoMajority,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    WuIssued {
        wu: WorkUnitId,
        project: ServerId,
        issuer: Endpoint,
        members: Vec<AgentId>,
        short: bool,
        /// DGDS could not group the pool and used random distribution.
        fallback: bool,
        community: Option<CommunityId>,
    },
    WuAccepted {
        wu: WorkUnitId,
        agent: AgentId,
        deadline: Tick,
    },
    WuRejected {
        wu: WorkUnitId,
        agent: AgentId,
    },
    WuCompleted {
        wu: WorkUnitId,
        agent: AgentId,
        units: u64,
        correct: bool,
        late: bool,
        buffered: bool,
    },
    WuDropped {
        wu: WorkUnitId,
        agent: AgentId,
        units: u64,
    },
    WuTimedOut {
        wu: WorkUnitId,
        agent: AgentId,
        units: u64,
    },
    WuValidated {
        wu: WorkUnitId,
        group_size: u32,
        consensus: u32,
        correct: bool,
        complexity: u32,
        /// Units computed by all replicas of this attempt.
        units_total: u64,
        credit: u64,
    },
    WuRedistributed {
        wu: WorkUnitId,
        reason: RedistributeReason,
        units_total: u64,
        /// The unit hit the requeue limit and was given up.
        abandoned: bool,
    },
    ServerDown {
        server: ServerId,
    },
    ServerUp {
        server: ServerId,
    },
    AgentDown {
        agent: AgentId,
    },
    AgentUp {
        agent: AgentId,
    },
    RatingIssued {
        rater: AgentId,
        subject: AgentId,
        cause: RatingCause,
        value: f64,
        /// Subject's reputation after the rating.
        tau: f64,
    },
    TcEvent(MembershipEvent),
    CreditCommitted {
        wu: WorkUnitId,
        block: u64,
        allocations: Vec<(AgentId, u64)>,
        hash: String,
    },
    /// A held result reaches its owner after an outage.
    ResultFlushed {
        wu: WorkUnitId,
        agent: Option<AgentId>,
        to: Endpoint,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub tick: Tick,
    pub seq: u64,
    pub event: EventKind,
}

/// Run facts a log reader needs besides the events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub name: String,
    pub mode: String,
    pub strategy: String,
    pub seed: u64,
    pub horizon_ticks: u64,
    pub hash: String,
    pub servers: u32,
    /// Profile name per agent id.
    pub agents: Vec<String>,
}

pub fn write_log<W: Write>(
    out: &mut W,
    header: &LogHeader,
    events: &[SimEvent],
) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")?;
    for e in events {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(input: R) -> Result<(LogHeader, Vec<SimEvent>), String> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| e.to_string())?;
            serde_json::from_str(&line).map_err(|e| format!("line 1: bad header: {e}"))?
        }
        None => return Err("empty log".into()),
    };
    let mut events = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok((header, events))
}
