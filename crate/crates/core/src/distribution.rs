//! Replica-group selection strategies.
//!
//! Every strategy works on an immutable snapshot of candidates whose
//! replication factor was drawn beforehand, so selection itself only
//! consumes randomness for picking agents.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, WorkUnitId};
use crate::trust::TrustClass;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectionError {
    #[error("selection failed: {available} free candidates, {needed} needed")]
    SelectionFailed { available: usize, needed: usize },
    #[error("pool lacks a trusted or an untrusted candidate; falling back to random distribution")]
    FallbackToDrds,
    #[error("replication must be at least 1")]
    ZeroReplication,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub agent: AgentId,
    pub tau: f64,
    /// Number of other agents required next to this one.
    pub f_min: u32,
    pub trust_class: TrustClass,
    pub busy: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaGroup {
    pub wu: WorkUnitId,
    pub initiator: AgentId,
    /// Distinct members, initiator first.
    pub members: Vec<AgentId>,
    /// The group is smaller than `1 + max f_min` of its members.
    pub short: bool,
}

impl ReplicaGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Drds,
    Dods,
    Dgds,
    Random,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Drds => "drds",
            Strategy::Dods => "dods",
            Strategy::Dgds => "dgds",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drds" => Ok(Strategy::Drds),
            "dods" => Ok(Strategy::Dods),
            "dgds" => Ok(Strategy::Dgds),
            "random" => Ok(Strategy::Random),
            other => Err(format!(
                "unknown strategy `{other}` (expected drds|dods|dgds|random)"
            )),
        }
    }
}

/// How many trusted agents DGDS pairs with the selected untrusted ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgdsTrustedCount {
    /// As many trusted as untrusted in total; untrusted never form a majority.
    #[default]
    TotalUntrusted,
    /// As many trusted as *additional* untrusted.
    AdditionalUntrusted,
}

fn free(pool: &[Candidate]) -> Vec<&Candidate> {
    pool.iter().filter(|c| !c.busy).collect()
}

/// Dynamic random distribution: a random initiator and `f_min` random others.
pub fn drds_select<R: Rng + ?Sized>(
    pool: &[Candidate],
    wu: WorkUnitId,
    rng: &mut R,
) -> Result<ReplicaGroup, SelectionError> {
    let free = free(pool);
    if free.len() < 2 {
        return Err(SelectionError::SelectionFailed {
            available: free.len(),
            needed: 2,
        });
    }
    let pick = rng.random_range(0..free.len());
    let initiator = free[pick];
    let others: Vec<&Candidate> = free
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pick)
        .map(|(_, c)| *c)
        .collect();
    let wanted = initiator.f_min as usize;
    let take = wanted.min(others.len());
    let mut members = vec![initiator.agent];
    members.extend(others.choose_multiple(rng, take).map(|c| c.agent));
    Ok(ReplicaGroup {
        wu,
        initiator: initiator.agent,
        members,
        short: take < wanted,
    })
}

/// Result of one DODS assignment round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DodsRound {
    pub groups: Vec<ReplicaGroup>,
    pub deferred: Vec<WorkUnitId>,
}

/// Dynamic ordered distribution over a batch of work units.
///
/// Candidates are sorted by `(f_min, agent)`. Each work unit takes the next
/// unassigned candidate and keeps absorbing the following ones until the
/// group reaches `1 + max f_min` of its members. A group that runs out of
/// candidates first is emitted as short only when `allow_short` is set and
/// it has at least two members; otherwise the unit is deferred.
pub fn dods_assign(
    pool: &[Candidate],
    wus: &[WorkUnitId],
    allow_short: bool,
) -> Result<DodsRound, SelectionError> {
    let mut sorted = free(pool);
    if sorted.is_empty() {
        return Err(SelectionError::SelectionFailed {
            available: 0,
            needed: 2,
        });
    }
    sorted.sort_by_key(|c| (c.f_min, c.agent));

    let mut round = DodsRound::default();
    let mut cursor = 0;
    for &wu in wus {
        if cursor >= sorted.len() {
            round.deferred.push(wu);
            continue;
        }
        let start = cursor;
        let mut max_f = sorted[cursor].f_min as usize;
        cursor += 1;
        while cursor - start < 1 + max_f && cursor < sorted.len() {
            max_f = max_f.max(sorted[cursor].f_min as usize);
            cursor += 1;
        }
        let members: Vec<AgentId> = sorted[start..cursor].iter().map(|c| c.agent).collect();
        let complete = members.len() > max_f;
        if complete || (allow_short && members.len() >= 2) {
            round.groups.push(ReplicaGroup {
                wu,
                initiator: members[0],
                members,
                short: !complete,
            });
        } else {
            // The partial group is released; the pool is exhausted anyway.
            round.deferred.push(wu);
        }
    }
    Ok(round)
}

/// Dynamic grouping distribution.
///
/// Picks one untrusted candidate plus up to `floor((f - 1) / 2)` more, where
/// `f` is the running maximum `f_min` of the group, pairs them with trusted
/// candidates, then fills with undecided (and, once those run out, further
/// trusted) candidates until the group reaches `1 + f`.
pub fn dgds_select<R: Rng + ?Sized>(
    pool: &[Candidate],
    wu: WorkUnitId,
    trusted_count: DgdsTrustedCount,
    rng: &mut R,
) -> Result<ReplicaGroup, SelectionError> {
    let mut untrusted = Vec::new();
    let mut trusted = Vec::new();
    let mut undecided = Vec::new();
    for c in free(pool) {
        match c.trust_class {
            TrustClass::Untrusted => untrusted.push(c),
            TrustClass::Trusted => trusted.push(c),
            TrustClass::Undecided => undecided.push(c),
        }
    }
    if untrusted.is_empty() || trusted.is_empty() {
        return Err(SelectionError::FallbackToDrds);
    }

    let first = untrusted.swap_remove(rng.random_range(0..untrusted.len()));
    let mut picked_untrusted = vec![first];
    let mut f = first.f_min as usize;
    while picked_untrusted.len() - 1 < f.saturating_sub(1) / 2 && !untrusted.is_empty() {
        let c = untrusted.swap_remove(rng.random_range(0..untrusted.len()));
        f = f.max(c.f_min as usize);
        picked_untrusted.push(c);
    }

    let wanted_trusted = match trusted_count {
        DgdsTrustedCount::TotalUntrusted => picked_untrusted.len(),
        DgdsTrustedCount::AdditionalUntrusted => picked_untrusted.len() - 1,
    };
    let n_trusted = wanted_trusted.min(trusted.len());
    if trusted_count == DgdsTrustedCount::TotalUntrusted && n_trusted < picked_untrusted.len() {
        // Not enough trusted partners: shed the extra untrusted picks.
        picked_untrusted.truncate(n_trusted);
        f = picked_untrusted
            .iter()
            .map(|c| c.f_min as usize)
            .max()
            .unwrap_or(0);
    }

    let mut group: Vec<&Candidate> = picked_untrusted;
    for _ in 0..n_trusted {
        let c = trusted.swap_remove(rng.random_range(0..trusted.len()));
        f = f.max(c.f_min as usize);
        group.push(c);
    }
    for bucket in [&mut undecided, &mut trusted] {
        while group.len() < 1 + f && !bucket.is_empty() {
            let c = bucket.swap_remove(rng.random_range(0..bucket.len()));
            f = f.max(c.f_min as usize);
            group.push(c);
        }
    }

    Ok(ReplicaGroup {
        wu,
        initiator: first.agent,
        members: group.iter().map(|c| c.agent).collect(),
        short: group.len() < 1 + f,
    })
}

/// Control condition: a uniformly random group of fixed size, ignoring trust.
pub fn random_baseline_select<R: Rng + ?Sized>(
    pool: &[Candidate],
    wu: WorkUnitId,
    replication: usize,
    rng: &mut R,
) -> Result<ReplicaGroup, SelectionError> {
    if replication == 0 {
        return Err(SelectionError::ZeroReplication);
    }
    let free = free(pool);
    if free.len() < replication {
        return Err(SelectionError::SelectionFailed {
            available: free.len(),
            needed: replication,
        });
    }
    let members: Vec<AgentId> = free
        .choose_multiple(rng, replication)
        .map(|c| c.agent)
        .collect();
    Ok(ReplicaGroup {
        wu,
        initiator: members[0],
        members,
        short: false,
    })
}
