//! Metrics computed from the event log alone.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::community::MembershipKind;
use crate::ids::{AgentId, CommunityId, Tick};
use crate::sim::{EventKind, LogHeader, SimEvent};
use crate::trust::NEUTRAL_TAU;

use super::config::Profile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub tick: Tick,
    pub issued: u64,
    pub validated: u64,
    pub active_agents: u64,
    pub etc_size: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizon_ticks: u64,
    pub series: Vec<SeriesRow>,
    pub issued: u64,
    pub validated: u64,
    /// Validated units per tick over the whole horizon.
    pub throughput: f64,
    /// Replicas per validated unit.
    pub replication_overhead: f64,
    /// Mean size of every issued replica group.
    pub mean_group_size: f64,
    /// Complexity units computed that did not end up in a validated result.
    pub wasted_work: u64,
    pub wrong_result_acceptance_rate: f64,
    /// Longest run of ticks without issuance between the first and the last
    /// issuing tick.
    pub issuance_gap_ticks: u64,
    pub rejected: u64,
    pub redistributed: u64,
    pub abandoned: u64,
    pub communities_formed: u64,
    pub tcm_elections: u64,
    pub credit_committed: u64,
    pub ledger_blocks: u64,
    pub ledger_head: String,
    /// Keyed by profile name, only for profiles present in the run.
    pub mean_tau: BTreeMap<String, f64>,
    pub credits: BTreeMap<String, u64>,
}

impl MetricsReport {
    /// `metric,value` rows in their fixed output order.
    pub fn summary_rows(&self) -> Vec<(String, String)> {
        let mut rows: Vec<(String, String)> = vec![
            ("horizon_ticks".into(), self.horizon_ticks.to_string()),
            ("issued".into(), self.issued.to_string()),
            ("validated".into(), self.validated.to_string()),
            ("throughput".into(), self.throughput.to_string()),
            (
                "replication_overhead".into(),
                self.replication_overhead.to_string(),
            ),
            ("mean_group_size".into(), self.mean_group_size.to_string()),
            ("wasted_work".into(), self.wasted_work.to_string()),
            (
                "wrong_result_acceptance_rate".into(),
                self.wrong_result_acceptance_rate.to_string(),
            ),
            (
                "issuance_gap_ticks".into(),
                self.issuance_gap_ticks.to_string(),
            ),
            ("rejected".into(), self.rejected.to_string()),
            ("redistributed".into(), self.redistributed.to_string()),
            ("abandoned".into(), self.abandoned.to_string()),
            (
                "communities_formed".into(),
                self.communities_formed.to_string(),
            ),
            ("tcm_elections".into(), self.tcm_elections.to_string()),
            ("credit_committed".into(), self.credit_committed.to_string()),
            ("ledger_blocks".into(), self.ledger_blocks.to_string()),
            ("ledger_head".into(), self.ledger_head.clone()),
        ];
        for p in Profile::ALL {
            if let Some(t) = self.mean_tau.get(p.as_str()) {
                rows.push((format!("mean_tau.{p}"), t.to_string()));
            }
        }
        for p in Profile::ALL {
            if let Some(c) = self.credits.get(p.as_str()) {
                rows.push((format!("credits.{p}"), c.to_string()));
            }
        }
        rows
    }

    pub fn get(&self, metric: &str) -> Option<String> {
        self.summary_rows()
            .into_iter()
            .find(|(k, _)| k == metric)
            .map(|(_, v)| v)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Last reported reputation per agent; agents never rated stay neutral.
pub fn final_taus(agent_count: usize, events: &[SimEvent]) -> Vec<f64> {
    let mut taus = vec![NEUTRAL_TAU; agent_count];
    for e in events {
        if let EventKind::RatingIssued { subject, tau, .. } = e.event {
            taus[subject.index()] = tau;
        }
    }
    taus
}

pub fn compute_metrics(header: &LogHeader, events: &[SimEvent]) -> MetricsReport {
    let horizon = header.horizon_ticks;
    let n_agents = header.agents.len();
    let mut per_tick: BTreeMap<Tick, (u64, u64)> = BTreeMap::new();
    let mut offline: BTreeSet<AgentId> = BTreeSet::new();
    let mut members: BTreeMap<CommunityId, BTreeSet<AgentId>> = BTreeMap::new();
    let mut series = Vec::with_capacity(horizon as usize);

    let mut issued = 0u64;
    let mut issued_sizes = 0u64;
    let mut validated = 0u64;
    let mut validated_sizes = 0u64;
    let mut wrong = 0u64;
    let mut units_resolved = 0u64;
    let mut units_useful = 0u64;
    let (mut rejected, mut redistributed, mut abandoned) = (0u64, 0u64, 0u64);
    let (mut formed, mut elections) = (0u64, 0u64);
    let mut credit = 0u64;
    let mut blocks = 0u64;
    let mut head = "0".repeat(64);
    let mut credit_by_agent: BTreeMap<AgentId, u64> = BTreeMap::new();
    let mut elected: BTreeSet<CommunityId> = BTreeSet::new();

    let mut i = 0;
    for tick in 1..=horizon {
        while i < events.len() && events[i].tick == tick {
            let slot = per_tick.entry(tick).or_default();
            match &events[i].event {
                EventKind::WuIssued { members: m, .. } => {
                    issued += 1;
                    issued_sizes += m.len() as u64;
                    slot.0 += 1;
                }
                EventKind::WuValidated {
                    group_size,
                    consensus,
                    correct,
                    complexity,
                    units_total,
                    ..
                } => {
                    validated += 1;
                    validated_sizes += u64::from(*group_size);
                    wrong += u64::from(!correct);
                    units_resolved += units_total;
                    units_useful += u64::from(*consensus) * u64::from(*complexity);
                    slot.1 += 1;
                }
                EventKind::WuRedistributed {
                    units_total,
                    abandoned: gave_up,
                    ..
                } => {
                    redistributed += 1;
                    abandoned += u64::from(*gave_up);
                    units_resolved += units_total;
                }
                EventKind::WuRejected { .. } => rejected += 1,
                EventKind::AgentDown { agent } => {
                    offline.insert(*agent);
                }
                EventKind::AgentUp { agent } => {
                    offline.remove(agent);
                }
                EventKind::TcEvent(m) => {
                    let set = members.entry(m.community).or_default();
                    match m.kind {
                        MembershipKind::Joined => {
                            set.insert(m.agent.expect("joins name the agent"));
                        }
                        MembershipKind::Left | MembershipKind::Evicted => {
                            set.remove(&m.agent.expect("departures name the agent"));
                        }
                        MembershipKind::Dissolved => set.clear(),
                        MembershipKind::TcmElected => {
                            elections += 1;
                            // The first election ends formation successfully.
                            if elected.insert(m.community) {
                                formed += 1;
                            }
                        }
                        _ => {}
                    }
                }
                EventKind::CreditCommitted {
                    allocations, hash, ..
                } => {
                    blocks += 1;
                    for &(a, mc) in allocations {
                        credit += mc;
                        *credit_by_agent.entry(a).or_default() += mc;
                    }
                    head.clone_from(hash);
                }
                _ => {}
            }
            i += 1;
        }
        let (iss, val) = per_tick.get(&tick).copied().unwrap_or_default();
        series.push(SeriesRow {
            tick,
            issued: iss,
            validated: val,
            active_agents: (n_agents - offline.len()) as u64,
            etc_size: members.values().map(|s| s.len() as u64).sum(),
        });
    }

    let issuing: Vec<Tick> = series
        .iter()
        .filter(|r| r.issued > 0)
        .map(|r| r.tick)
        .collect();
    let issuance_gap_ticks = issuing
        .windows(2)
        .map(|w| w[1] - w[0] - 1)
        .max()
        .unwrap_or(0);

    let taus = final_taus(n_agents, events);
    let mut tau_sum: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    let mut credits: BTreeMap<String, u64> = BTreeMap::new();
    for (idx, profile) in header.agents.iter().enumerate() {
        let e = tau_sum.entry(profile.as_str()).or_insert((0.0, 0));
        e.0 += taus[idx];
        e.1 += 1;
        let c = credit_by_agent
            .get(&AgentId(idx as u32))
            .copied()
            .unwrap_or(0);
        *credits.entry(profile.clone()).or_default() += c;
    }
    let mean_tau = tau_sum
        .into_iter()
        .map(|(p, (s, n))| (p.to_string(), s / n as f64))
        .collect();

    MetricsReport {
        horizon_ticks: horizon,
        series,
        issued,
        validated,
        throughput: ratio(validated, horizon),
        replication_overhead: ratio(validated_sizes, validated),
        mean_group_size: ratio(issued_sizes, issued),
        wasted_work: units_resolved - units_useful,
        wrong_result_acceptance_rate: ratio(wrong, validated),
        issuance_gap_ticks,
        rejected,
        redistributed,
        abandoned,
        communities_formed: formed,
        tcm_elections: elections,
        credit_committed: credit,
        ledger_blocks: blocks,
        ledger_head: head,
        mean_tau,
        credits,
    }
}
