//! Explicit trust communities: formation, manager election, operation and
//! dissolution.
//!
//! A community moves strictly through
//! `PreOrganisation -> Formation -> Operation -> Dissolved`, with a direct
//! `Formation -> Dissolved` edge when too few invitees accept. Every state
//! change is appended to the community's membership log, and
//! [`TrustCommunity::replay`] rebuilds the state from that log alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, CommunityId, Tick};
use crate::trust::{raw_replication_factor, ReplicationLimits};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommunityError {
    #[error("{id}: no available member can become manager; dissolution triggered")]
    DissolutionTriggered { id: CommunityId },
    #[error("{id}: operation requires phase {expected}, community is in {actual}")]
    WrongPhase {
        id: CommunityId,
        expected: Phase,
        actual: Phase,
    },
    #[error("{id}: {agent} is not a member")]
    NotMember { id: CommunityId, agent: AgentId },
    #[error("{id}: {agent} is already a member")]
    AlreadyMember { id: CommunityId, agent: AgentId },
    #[error("illegal event sequence: {0}")]
    IllegalTransition(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    PreOrganisation,
    Formation,
    Operation,
    Dissolved,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Phase {
    /// Allowed lifecycle edges.
    pub fn can_advance_to(self, next: Phase) -> bool {
        matches!(
            (self, next),
            (Phase::PreOrganisation, Phase::Formation)
                | (Phase::Formation, Phase::Operation)
                | (Phase::Formation, Phase::Dissolved)
                | (Phase::Operation, Phase::Dissolved)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityParams {
    pub min_size: usize,
    pub max_size: usize,
    pub join_threshold: f64,
    pub evict_threshold: f64,
    pub drop_delta: f64,
    pub dissolve_fraction: f64,
    /// Ticks from detecting a manager failure to the replacement taking over.
    pub election_delay: u64,
    /// Ticks between formation attempts of a work agent.
    pub formation_interval: u64,
}

impl Default for CommunityParams {
    fn default() -> Self {
        Self {
            min_size: 5,
            max_size: 20,
            join_threshold: 0.7,
            evict_threshold: 0.5,
            drop_delta: 0.2,
            dissolve_fraction: 0.5,
            election_delay: 1,
            formation_interval: 25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MembershipKind {
    Invited,
    Joined,
    Left,
    Evicted,
    TcmElected,
    TcmFailed,
    Dissolved,
    PhaseChanged(Phase),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipEvent {
    pub tick: Tick,
    pub seq: u64,
    pub community: CommunityId,
    pub kind: MembershipKind,
    pub agent: Option<AgentId>,
    /// Subject's reputation at the time of the event, for joins and invites.
    pub tau: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub joined_tick: Tick,
    pub tau_at_join: f64,
}

/// What the manager decided during one operation tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Evict(AgentId),
    Invite(AgentId),
    AssignMonitor(AgentId, Vec<AgentId>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrustCommunity {
    id: CommunityId,
    phase: Phase,
    founder: AgentId,
    members: BTreeMap<AgentId, Member>,
    tcm: Option<AgentId>,
    binary_holders: BTreeSet<AgentId>,
    peak_size: usize,
    log: Vec<MembershipEvent>,
}

/// Invitation list for a founder: every other agent at or above the join
/// threshold, best first, capped so the community stays within `max_size`.
/// Absent when fewer than `min_size` agents qualify.
pub fn evaluate_formation(
    founder: AgentId,
    reputations: &BTreeMap<AgentId, f64>,
    params: &CommunityParams,
) -> Option<Vec<AgentId>> {
    let mut eligible: Vec<(AgentId, f64)> = reputations
        .iter()
        .filter(|&(&a, &tau)| a != founder && tau >= params.join_threshold)
        .map(|(&a, &tau)| (a, tau))
        .collect();
    if eligible.len() < params.min_size {
        return None;
    }
    eligible.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    eligible.truncate(params.max_size.saturating_sub(1).max(params.min_size));
    Some(eligible.into_iter().map(|(a, _)| a).collect())
}

/// Expected credit per work unit in a pool whose mean reputation is
/// `mean_tau`: the unit's value split across `1 + f` co-workers.
pub fn expected_share(wu_credit: f64, mean_tau: f64, limits: ReplicationLimits) -> f64 {
    let f = raw_replication_factor(mean_tau.clamp(0.0, 1.0), limits).unwrap_or(limits.hi());
    wu_credit / (1.0 + f)
}

/// An invitee joins only when the community pays strictly more per unit.
pub fn join_decision(egoistic: bool, inside_share: f64, outside_share: f64) -> bool {
    !egoistic && inside_share > outside_share
}

impl TrustCommunity {
    /// Opens the pre-organisation phase by inviting `invitees`.
    pub fn begin(
        id: CommunityId,
        founder: AgentId,
        invitees: &[(AgentId, f64)],
        tick: Tick,
    ) -> Self {
        let mut tc = Self {
            id,
            phase: Phase::PreOrganisation,
            founder,
            members: BTreeMap::new(),
            tcm: None,
            binary_holders: BTreeSet::new(),
            peak_size: 0,
            log: Vec::new(),
        };
        tc.push(
            tick,
            MembershipKind::PhaseChanged(Phase::PreOrganisation),
            None,
            None,
        );
        for &(a, tau) in invitees {
            tc.push(tick, MembershipKind::Invited, Some(a), Some(tau));
        }
        tc
    }

    pub fn id(&self) -> CommunityId {
        self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn founder(&self) -> AgentId {
        self.founder
    }

    pub fn tcm(&self) -> Option<AgentId> {
        self.tcm
    }

    pub fn members(&self) -> &BTreeMap<AgentId, Member> {
        &self.members
    }

    pub fn is_member(&self, agent: AgentId) -> bool {
        self.members.contains_key(&agent)
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn peak_size(&self) -> usize {
        self.peak_size
    }

    pub fn binary_holders(&self) -> &BTreeSet<AgentId> {
        &self.binary_holders
    }

    pub fn log(&self) -> &[MembershipEvent] {
        &self.log
    }

    pub fn is_alive(&self) -> bool {
        self.phase != Phase::Dissolved
    }

    fn push(&mut self, tick: Tick, kind: MembershipKind, agent: Option<AgentId>, tau: Option<f64>) {
        let seq = self.log.len() as u64;
        self.log.push(MembershipEvent {
            tick,
            seq,
            community: self.id,
            kind,
            agent,
            tau,
        });
    }

    fn require(&self, expected: Phase) -> Result<(), CommunityError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(CommunityError::WrongPhase {
                id: self.id,
                expected,
                actual: self.phase,
            })
        }
    }

    fn set_phase(&mut self, next: Phase, tick: Tick) {
        debug_assert!(
            self.phase.can_advance_to(next),
            "{} -> {}",
            self.phase,
            next
        );
        self.phase = next;
        self.push(tick, MembershipKind::PhaseChanged(next), None, None);
    }

    /// Moves to formation; the founder is the first member.
    pub fn start_formation(&mut self, founder_tau: f64, tick: Tick) -> Result<(), CommunityError> {
        self.require(Phase::PreOrganisation)?;
        self.set_phase(Phase::Formation, tick);
        self.add_member(self.founder, founder_tau, tick)
    }

    fn add_member(&mut self, agent: AgentId, tau: f64, tick: Tick) -> Result<(), CommunityError> {
        if self.members.contains_key(&agent) {
            return Err(CommunityError::AlreadyMember { id: self.id, agent });
        }
        self.members.insert(
            agent,
            Member {
                joined_tick: tick,
                tau_at_join: tau,
            },
        );
        // Every member stores the work-unit construction binary.
        self.binary_holders.insert(agent);
        self.peak_size = self.peak_size.max(self.members.len());
        self.push(tick, MembershipKind::Joined, Some(agent), Some(tau));
        Ok(())
    }

    /// Accepts an invitee during formation or operation.
    pub fn join(&mut self, agent: AgentId, tau: f64, tick: Tick) -> Result<(), CommunityError> {
        if !matches!(self.phase, Phase::Formation | Phase::Operation) {
            return Err(CommunityError::WrongPhase {
                id: self.id,
                expected: Phase::Operation,
                actual: self.phase,
            });
        }
        self.add_member(agent, tau, tick)
    }

    /// Logs an invitation issued while operating.
    pub fn invite(&mut self, agent: AgentId, tau: f64, tick: Tick) -> Result<(), CommunityError> {
        self.require(Phase::Operation)?;
        self.push(tick, MembershipKind::Invited, Some(agent), Some(tau));
        Ok(())
    }

    fn remove_member(
        &mut self,
        agent: AgentId,
        kind: MembershipKind,
        tick: Tick,
    ) -> Result<(), CommunityError> {
        self.require(Phase::Operation)?;
        if self.members.remove(&agent).is_none() {
            return Err(CommunityError::NotMember { id: self.id, agent });
        }
        self.binary_holders.remove(&agent);
        self.push(tick, kind, Some(agent), None);
        Ok(())
    }

    pub fn evict(&mut self, agent: AgentId, tick: Tick) -> Result<(), CommunityError> {
        self.remove_member(agent, MembershipKind::Evicted, tick)
    }

    pub fn leave(&mut self, agent: AgentId, tick: Tick) -> Result<(), CommunityError> {
        self.remove_member(agent, MembershipKind::Left, tick)
    }

    /// Available member with the longest membership, ties by agent id.
    fn longest_serving_available(&self, available: &dyn Fn(AgentId) -> bool) -> Option<AgentId> {
        self.members
            .iter()
            .filter(|&(&a, _)| available(a))
            .min_by_key(|&(&a, m)| (m.joined_tick, a))
            .map(|(&a, _)| a)
    }

    /// Elects the manager. The first election prefers the founder; later
    /// ones pick the longest-serving available member.
    pub fn elect_tcm(
        &mut self,
        available: &dyn Fn(AgentId) -> bool,
        tick: Tick,
    ) -> Result<AgentId, CommunityError> {
        let first = match self.phase {
            Phase::Formation => true,
            Phase::Operation => false,
            actual => {
                return Err(CommunityError::WrongPhase {
                    id: self.id,
                    expected: Phase::Operation,
                    actual,
                })
            }
        };
        let chosen = if first && self.is_member(self.founder) && available(self.founder) {
            Some(self.founder)
        } else {
            self.longest_serving_available(available)
        };
        let Some(tcm) = chosen else {
            return Err(CommunityError::DissolutionTriggered { id: self.id });
        };
        self.tcm = Some(tcm);
        self.push(tick, MembershipKind::TcmElected, Some(tcm), None);
        if first {
            self.set_phase(Phase::Operation, tick);
        }
        Ok(tcm)
    }

    /// Ends formation: elects the first manager, or dissolves when the
    /// community missed its quorum or nobody is available.
    pub fn finish_formation(
        &mut self,
        available: &dyn Fn(AgentId) -> bool,
        params: &CommunityParams,
        tick: Tick,
    ) -> Result<AgentId, CommunityError> {
        self.require(Phase::Formation)?;
        if self.members.len() < params.min_size {
            self.dissolve(tick);
            return Err(CommunityError::DissolutionTriggered { id: self.id });
        }
        self.elect_tcm(available, tick).inspect_err(|_| {
            self.dissolve(tick);
        })
    }

    /// Replaces an unavailable manager. The failed manager stays a member;
    /// leadership does not revert when it comes back.
    pub fn handle_tcm_failure(
        &mut self,
        available: &dyn Fn(AgentId) -> bool,
        tick: Tick,
    ) -> Result<AgentId, CommunityError> {
        self.require(Phase::Operation)?;
        self.push(tick, MembershipKind::TcmFailed, self.tcm, None);
        self.elect_tcm(available, tick)
    }

    /// Manager decisions for one tick of operation.
    ///
    /// `reputations` covers members and any outsiders eligible for an
    /// invitation; `outsiders` lists those eligible outsiders.
    pub fn operate_tick(
        &self,
        reputations: &BTreeMap<AgentId, f64>,
        outsiders: &[AgentId],
        params: &CommunityParams,
    ) -> Result<Vec<Action>, CommunityError> {
        self.require(Phase::Operation)?;
        let mut actions = Vec::new();
        let mut staying = Vec::new();
        for (&a, m) in &self.members {
            let tau = reputations.get(&a).copied().unwrap_or(m.tau_at_join);
            let worse = tau < params.evict_threshold || m.tau_at_join - tau > params.drop_delta;
            if worse && Some(a) != self.tcm {
                actions.push(Action::Evict(a));
            } else {
                staying.push(a);
            }
        }

        let mut candidates: Vec<(AgentId, f64)> = outsiders
            .iter()
            .filter(|a| !self.members.contains_key(a))
            .filter_map(|a| reputations.get(a).map(|&t| (*a, t)))
            .filter(|&(_, t)| t >= params.join_threshold)
            .collect();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let room = params.max_size.saturating_sub(staying.len());
        actions.extend(
            candidates
                .into_iter()
                .take(room)
                .map(|(a, _)| Action::Invite(a)),
        );

        // Round-robin monitoring duty over the remaining members.
        let mut duty: BTreeMap<AgentId, Vec<AgentId>> = BTreeMap::new();
        for (i, &target) in staying.iter().enumerate() {
            duty.entry(staying[i % staying.len()])
                .or_default()
                .push(target);
        }
        actions.extend(duty.into_iter().map(|(m, t)| Action::AssignMonitor(m, t)));
        Ok(actions)
    }

    /// Whether the community should dissolve now.
    pub fn dissolve_check(&self, params: &CommunityParams, project_exhausted: bool) -> bool {
        if self.phase != Phase::Operation {
            return false;
        }
        let n = self.members.len();
        project_exhausted
            || n < params.min_size
            || (n as f64) < params.dissolve_fraction * self.peak_size as f64
    }

    /// Releases every member and closes the community.
    pub fn dissolve(&mut self, tick: Tick) -> Vec<AgentId> {
        if self.phase == Phase::Dissolved {
            return Vec::new();
        }
        let released: Vec<AgentId> = self.members.keys().copied().collect();
        self.members.clear();
        self.binary_holders.clear();
        self.tcm = None;
        self.push(tick, MembershipKind::Dissolved, None, None);
        self.set_phase(Phase::Dissolved, tick);
        released
    }

    /// Rebuilds a community from its membership log.
    pub fn replay(events: &[MembershipEvent]) -> Result<Self, CommunityError> {
        check_log(events)?;
        let first = events
            .first()
            .ok_or_else(|| CommunityError::IllegalTransition("empty log".into()))?;
        let founder = events
            .iter()
            .find(|e| e.kind == MembershipKind::Joined)
            .and_then(|e| e.agent);
        let mut tc = TrustCommunity {
            id: first.community,
            phase: Phase::PreOrganisation,
            founder: founder.unwrap_or(AgentId(u32::MAX)),
            members: BTreeMap::new(),
            tcm: None,
            binary_holders: BTreeSet::new(),
            peak_size: 0,
            log: events.to_vec(),
        };
        for e in events {
            match e.kind {
                MembershipKind::PhaseChanged(p) => tc.phase = p,
                MembershipKind::Joined => {
                    let a = e.agent.expect("checked");
                    tc.members.insert(
                        a,
                        Member {
                            joined_tick: e.tick,
                            tau_at_join: e.tau.unwrap_or(f64::NAN),
                        },
                    );
                    tc.binary_holders.insert(a);
                    tc.peak_size = tc.peak_size.max(tc.members.len());
                }
                MembershipKind::Left | MembershipKind::Evicted => {
                    let a = e.agent.expect("checked");
                    tc.members.remove(&a);
                    tc.binary_holders.remove(&a);
                }
                MembershipKind::TcmElected => tc.tcm = e.agent,
                MembershipKind::Dissolved => {
                    tc.members.clear();
                    tc.binary_holders.clear();
                    tc.tcm = None;
                }
                MembershipKind::Invited | MembershipKind::TcmFailed => {}
            }
        }
        Ok(tc)
    }
}

/// Checks a single community's log against the lifecycle automaton and the
/// membership rules. Returns the first violation found.
pub fn check_log(events: &[MembershipEvent]) -> Result<(), CommunityError> {
    let illegal = |e: &MembershipEvent, why: &str| {
        Err(CommunityError::IllegalTransition(format!(
            "{} seq {} at tick {}: {why}",
            e.community, e.seq, e.tick
        )))
    };
    let mut phase: Option<Phase> = None;
    let mut members = BTreeSet::new();
    let mut last = (0, 0);
    for (i, e) in events.iter().enumerate() {
        if i > 0 && (e.tick, e.seq) <= last {
            return illegal(e, "events out of order");
        }
        last = (e.tick, e.seq);
        match (phase, e.kind) {
            (None, MembershipKind::PhaseChanged(Phase::PreOrganisation)) => {
                phase = Some(Phase::PreOrganisation)
            }
            (None, _) => return illegal(e, "log must open with PreOrganisation"),
            (Some(Phase::Dissolved), _) => return illegal(e, "event after dissolution"),
            (Some(p), MembershipKind::PhaseChanged(next)) => {
                if !p.can_advance_to(next) {
                    return illegal(e, &format!("{p} -> {next}"));
                }
                if next == Phase::Operation && members.is_empty() {
                    return illegal(e, "operating without members");
                }
                phase = Some(next);
            }
            (Some(Phase::PreOrganisation), MembershipKind::Invited) => {}
            (Some(Phase::PreOrganisation), _) => {
                return illegal(e, "membership change before formation")
            }
            (Some(_), MembershipKind::Joined) => {
                if !members.insert(e.agent) {
                    return illegal(e, "duplicate join");
                }
            }
            (Some(Phase::Operation), MembershipKind::Left | MembershipKind::Evicted) => {
                if !members.remove(&e.agent) {
                    return illegal(e, "removal of a non-member");
                }
            }
            (Some(_), MembershipKind::TcmElected) => {
                if !members.contains(&e.agent) {
                    return illegal(e, "manager is not a member");
                }
            }
            (Some(Phase::Operation), MembershipKind::TcmFailed | MembershipKind::Invited) => {}
            (Some(_), MembershipKind::Dissolved) => members.clear(),
            (Some(p), k) => return illegal(e, &format!("{k:?} not allowed in {p}")),
        }
    }
    Ok(())
}
