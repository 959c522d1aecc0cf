//! The discrete-event engine.
//!
//! One call to [`World::step`] advances the clock by a tick and runs the
//! phases in a fixed order: faults and churn, issuance, compute, result
//! collection, timeouts and validation, community lifecycle. All random
//! choices come from named streams derived from the scenario seed, so a
//! (scenario, seed) pair always yields the same log.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::community::{
    evaluate_formation, expected_share, join_decision, Action, CommunityParams, Phase,
    TrustCommunity,
};
use crate::distribution::{
    dgds_select, dods_assign, drds_select, random_baseline_select, Candidate, ReplicaGroup,
    SelectionError, Strategy,
};
use crate::ids::{AgentId, CommunityId, ServerId, Tick, WorkUnitId};
use crate::ledger::{split_credits, Ledger};
use crate::scenario::config::{Entity, FaultAction, FaultSpec, Mode, Profile, ScenarioConfig};
use crate::trust::{
    classify, f_min_for_tau, roulette_round, Rating, RatingCause, ReplicationLimits,
    ReputationProfile, NEUTRAL_TAU,
};

use super::event::{Endpoint, EventKind, RedistributeReason, SimEvent};
use super::validation::{validate_replicas, MemberOutcome, Verdict};

/// Colluding malicious agents all report `ground_truth ^ COLLUSION_MASK`.
pub const COLLUSION_MASK: u64 = 0x0bad_c0de_0bad_c0de;

/// Chance that a slow agent accepts an offered work unit.
pub const SLOW_ACCEPT_PROBABILITY: f64 = 0.8;

const STREAM_SELECT: u64 = 1;
const STREAM_REPLICATION: u64 = 2;
const STREAM_BEHAVIOR: u64 = 3;
const STREAM_CHURN: u64 = 4;
const STREAM_WORK: u64 = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown work unit {0}")]
    UnknownWorkUnit(WorkUnitId),
    #[error("{wu} is not assigned to {agent}")]
    NotAssigned { wu: WorkUnitId, agent: AgentId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WuState {
    Queued,
    Assigned,
    Collected,
    Validated,
    /// Exceeded `max_requeues`.
    Abandoned,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkUnit {
    pub id: WorkUnitId,
    pub project: ServerId,
    pub complexity: u32,
    pub ground_truth: u64,
    pub state: WuState,
    pub requeues: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Collection {
    Routed,
    Buffered,
}

/// Running totals kept by the engine itself. Metrics recomputed from the
/// log must agree with these.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub issued: u64,
    pub validated: u64,
    pub wrong_accepted: u64,
    pub validated_group_sizes: u64,
    pub issued_group_sizes: u64,
    pub redistributed: u64,
    pub abandoned: u64,
    pub units_resolved: u64,
    pub units_useful: u64,
    pub ratings: u64,
    pub credit_committed: u64,
}

#[derive(Clone, Debug)]
struct Agent {
    profile: Profile,
    speed: u32,
    /// (up, down, offset)
    churn: Option<(u64, u64, u64)>,
    forced_down: bool,
    churn_up: bool,
    online: bool,
    work_agent: bool,
    task: Option<WorkUnitId>,
    progress: u64,
}

#[derive(Clone, Debug)]
struct Attempt {
    issued: Tick,
    members: Vec<AgentId>,
    deadlines: BTreeMap<AgentId, Tick>,
    outcomes: BTreeMap<AgentId, MemberOutcome>,
    units: u64,
}

#[derive(Clone, Debug)]
struct Server {
    online: bool,
    queue: VecDeque<WorkUnitId>,
}

#[derive(Clone, Debug)]
struct Buffered {
    wu: WorkUnitId,
    agent: AgentId,
    token: u64,
}

struct Streams {
    select: ChaCha8Rng,
    replication: ChaCha8Rng,
    behavior: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub struct World {
    cfg: ScenarioConfig,
    limits: ReplicationLimits,
    community_params: CommunityParams,
    tick: Tick,
    seq: u64,
    out: Vec<SimEvent>,
    agents: Vec<Agent>,
    reps: Vec<ReputationProfile>,
    wus: Vec<WorkUnit>,
    attempts: BTreeMap<WorkUnitId, Attempt>,
    servers: Vec<Server>,
    rr_cursor: usize,
    collection: VecDeque<Buffered>,
    ready: Vec<Buffered>,
    handback: BTreeMap<AgentId, Vec<WorkUnitId>>,
    communities: Vec<TrustCommunity>,
    tc_emitted: Vec<usize>,
    tcm_down_since: BTreeMap<CommunityId, Tick>,
    faults: BTreeMap<Tick, Vec<FaultSpec>>,
    ledger: Ledger,
    rng: Streams,
    counters: Counters,
}

impl World {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let seed = cfg.seed;
        let mut churn_rng = stream(seed, STREAM_CHURN);
        let mut work_rng = stream(seed, STREAM_WORK);
        let trust = cfg.mode == Mode::Trust;

        let mut agents = Vec::new();
        for g in &cfg.agents {
            for _ in 0..g.count {
                let churn = g
                    .churn
                    .map(|(up, down)| (up, down, churn_rng.random_range(0..up)));
                let work_agent = trust && (agents.len() as u32) < cfg.work.servers;
                agents.push(Agent {
                    profile: g.profile,
                    speed: g.speed,
                    churn,
                    forced_down: false,
                    churn_up: true,
                    online: true,
                    work_agent,
                    task: None,
                    progress: 0,
                });
            }
        }
        let window = cfg.params.window;
        let reps = (0..agents.len())
            .map(|i| ReputationProfile::new(AgentId(i as u32), window).expect("window validated"))
            .collect();

        // Trust-mode projects belong to the first `servers` agents.
        let n_servers = if trust {
            cfg.work.servers.min(agents.len() as u32) as usize
        } else {
            cfg.work.servers.max(1) as usize
        };
        let mut servers = vec![
            Server {
                online: true,
                queue: VecDeque::new()
            };
            n_servers
        ];
        let (lo, hi) = cfg.work.complexity;
        let wu_count = if n_servers == 0 { 0 } else { cfg.work.wu_count };
        let wus = (0..wu_count)
            .map(|i| {
                let project = ServerId(i % n_servers as u32);
                servers[project.index()].queue.push_back(WorkUnitId(i));
                WorkUnit {
                    id: WorkUnitId(i),
                    project,
                    complexity: work_rng.random_range(lo..=hi),
                    ground_truth: work_rng.random(),
                    state: WuState::Queued,
                    requeues: 0,
                }
            })
            .collect();

        let mut faults: BTreeMap<Tick, Vec<FaultSpec>> = BTreeMap::new();
        for f in &cfg.faults {
            faults.entry(f.tick).or_default().push(f.clone());
        }

        Self {
            limits: cfg.replication_limits(),
            community_params: cfg.params.community(),
            cfg: cfg.clone(),
            tick: 0,
            seq: 0,
            out: Vec::new(),
            agents,
            reps,
            wus,
            attempts: BTreeMap::new(),
            servers,
            rr_cursor: 0,
            collection: VecDeque::new(),
            ready: Vec::new(),
            handback: BTreeMap::new(),
            communities: Vec::new(),
            tc_emitted: Vec::new(),
            tcm_down_since: BTreeMap::new(),
            faults,
            ledger: Ledger::new(),
            rng: Streams {
                select: stream(seed, STREAM_SELECT),
                replication: stream(seed, STREAM_REPLICATION),
                behavior: stream(seed, STREAM_BEHAVIOR),
            },
            counters: Counters::default(),
        }
    }

    pub fn tick(&self) -> Tick {
        self.tick
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn into_ledger(self) -> Ledger {
        self.ledger
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn work_units(&self) -> &[WorkUnit] {
        &self.wus
    }

    pub fn communities(&self) -> &[TrustCommunity] {
        &self.communities
    }

    pub fn tau(&self, agent: AgentId) -> f64 {
        self.reps[agent.index()].tau()
    }

    pub fn is_online(&self, agent: AgentId) -> bool {
        self.agents[agent.index()].online
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn profile(&self, agent: AgentId) -> Profile {
        self.agents[agent.index()].profile
    }

    /// Results waiting in the collection server, oldest first.
    pub fn buffered(&self) -> Vec<WorkUnitId> {
        self.collection.iter().map(|b| b.wu).collect()
    }

    fn trust(&self) -> bool {
        self.cfg.mode == Mode::Trust
    }

    fn emit(&mut self, event: EventKind) {
        self.out.push(SimEvent {
            tick: self.tick,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    /// Advances one tick and returns the events it produced.
    pub fn step(&mut self) -> Vec<SimEvent> {
        self.tick += 1;
        let t = self.tick;
        self.apply_faults(t);
        self.apply_churn(t);
        if self.trust() {
            self.issue_trust();
        } else {
            self.issue_centralized();
        }
        let completed = self.compute();
        for (wu, agent, token, late) in completed {
            if self.trust() {
                self.collect_trust(wu, agent, token, late);
            } else {
                let buffered = self
                    .collect_result(wu, agent, token)
                    .expect("compute only completes assigned units")
                    == Collection::Buffered;
                let units = u64::from(self.wus[wu.index()].complexity);
                self.emit(EventKind::WuCompleted {
                    wu,
                    agent,
                    units,
                    correct: token == self.wus[wu.index()].ground_truth,
                    late: false,
                    buffered,
                });
            }
        }
        if self.trust() {
            self.timeouts_trust();
            self.validate_trust();
            self.lifecycle();
        } else {
            let events = self.redistribute_on_timeout();
            self.out.extend(events);
            self.validate_centralized();
        }
        std::mem::take(&mut self.out)
    }

    // ---------------------------------------------------------------- faults

    fn apply_faults(&mut self, t: Tick) {
        let Some(due) = self.faults.remove(&t) else {
            return;
        };
        for f in due {
            self.inject_fault(&f);
        }
    }

    /// Applies a fault immediately at the current tick.
    pub fn inject_fault(&mut self, fault: &FaultSpec) {
        let down = fault.action == FaultAction::Down;
        match (fault.entity, self.cfg.mode) {
            (Entity::Server(s), Mode::Centralized) => {
                let server = &mut self.servers[s as usize];
                if server.online == !down {
                    return;
                }
                server.online = !down;
                let server = ServerId(s);
                if down {
                    self.emit(EventKind::ServerDown { server });
                } else {
                    self.emit(EventKind::ServerUp { server });
                    self.flush_collection(server);
                }
            }
            // A trust-mode server is the work agent with the same index.
            (Entity::Server(a), Mode::Trust) | (Entity::Agent(a), _) => {
                self.agents[a as usize].forced_down = down;
                self.refresh_online(AgentId(a));
            }
        }
    }

    fn apply_churn(&mut self, t: Tick) {
        for i in 0..self.agents.len() {
            if let Some((up, down, offset)) = self.agents[i].churn {
                self.agents[i].churn_up = (t + offset) % (up + down) < up;
                self.refresh_online(AgentId(i as u32));
            }
        }
    }

    fn refresh_online(&mut self, agent: AgentId) {
        let a = &mut self.agents[agent.index()];
        let now = a.churn_up && !a.forced_down;
        if now == a.online {
            return;
        }
        a.online = now;
        if now {
            self.emit(EventKind::AgentUp { agent });
            for wu in self.handback.remove(&agent).unwrap_or_default() {
                self.emit(EventKind::ResultFlushed {
                    wu,
                    agent: None,
                    to: Endpoint::Agent(agent),
                });
            }
        } else {
            self.emit(EventKind::AgentDown { agent });
        }
    }

    // ------------------------------------------------------------ centralized

    fn issue_centralized(&mut self) {
        for i in 0..self.agents.len() {
            let a = &self.agents[i];
            if a.online && a.task.is_none() {
                self.centralized_assign(AgentId(i as u32));
            }
        }
    }

    /// Hands the requesting client the next unit of the next online server
    /// with work, round-robin.
    pub fn centralized_assign(&mut self, agent: AgentId) -> Option<WorkUnitId> {
        let a = &self.agents[agent.index()];
        if !a.online || a.task.is_some() {
            return None;
        }
        let n = self.servers.len();
        let s = (0..n)
            .map(|k| (self.rr_cursor + k) % n)
            .find(|&s| self.servers[s].online && !self.servers[s].queue.is_empty())?;
        self.rr_cursor = (s + 1) % n;
        let wu = self.servers[s].queue.pop_front().expect("non-empty");
        let deadline = self.tick + self.cfg.params.timeout_ticks;
        self.start_attempt(wu, &[agent], &[deadline]);
        self.emit(EventKind::WuIssued {
            wu,
            project: ServerId(s as u32),
            issuer: Endpoint::Server(ServerId(s as u32)),
            members: vec![agent],
            short: false,
            fallback: false,
            community: None,
        });
        self.emit(EventKind::WuAccepted {
            wu,
            agent,
            deadline,
        });
        Some(wu)
    }

    fn start_attempt(&mut self, wu: WorkUnitId, members: &[AgentId], deadlines: &[Tick]) {
        self.wus[wu.index()].state = WuState::Assigned;
        for &m in members {
            let a = &mut self.agents[m.index()];
            a.task = Some(wu);
            a.progress = 0;
        }
        self.attempts.insert(
            wu,
            Attempt {
                issued: self.tick,
                members: members.to_vec(),
                deadlines: members
                    .iter()
                    .copied()
                    .zip(deadlines.iter().copied())
                    .collect(),
                outcomes: BTreeMap::new(),
                units: 0,
            },
        );
        self.counters.issued += 1;
        self.counters.issued_group_sizes += members.len() as u64;
    }

    /// Delivers a finished result to its work server, or to the collection
    /// buffer while that server is down.
    pub fn collect_result(
        &mut self,
        wu: WorkUnitId,
        agent: AgentId,
        token: u64,
    ) -> Result<Collection, SimError> {
        let unit = self
            .wus
            .get(wu.index())
            .ok_or(SimError::UnknownWorkUnit(wu))?;
        let assigned = unit.state == WuState::Assigned
            && self
                .attempts
                .get(&wu)
                .is_some_and(|at| at.members.contains(&agent));
        if !assigned {
            return Err(SimError::NotAssigned { wu, agent });
        }
        let project = unit.project;
        self.wus[wu.index()].state = WuState::Collected;
        if let Some(at) = self.attempts.get_mut(&wu) {
            at.outcomes
                .insert(agent, MemberOutcome::Result { token, late: false });
        }
        let entry = Buffered { wu, agent, token };
        if self.servers[project.index()].online {
            self.ready.push(entry);
            Ok(Collection::Routed)
        } else {
            self.collection.push_back(entry);
            Ok(Collection::Buffered)
        }
    }

    fn flush_collection(&mut self, server: ServerId) {
        let (flush, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.collection)
            .into_iter()
            .partition(|b| self.wus[b.wu.index()].project == server);
        self.collection = keep.into();
        for b in flush {
            self.emit(EventKind::ResultFlushed {
                wu: b.wu,
                agent: Some(b.agent),
                to: Endpoint::Server(server),
            });
            self.ready.push(b);
        }
    }

    /// Requeues every assigned unit whose server deadline has arrived. The
    /// lapsed client is not penalised.
    pub fn redistribute_on_timeout(&mut self) -> Vec<SimEvent> {
        let before = self.out.len();
        let due: Vec<WorkUnitId> = self
            .attempts
            .iter()
            .filter(|(wu, at)| {
                self.wus[wu.index()].state == WuState::Assigned
                    && at.deadlines.values().all(|&d| d <= self.tick)
            })
            .map(|(wu, _)| *wu)
            .collect();
        for wu in due {
            let at = self.attempts.remove(&wu).expect("listed");
            let mut units = at.units;
            for &m in &at.members {
                let a = &mut self.agents[m.index()];
                let mut lapsed = 0;
                if a.task == Some(wu) {
                    lapsed = a.progress;
                    a.task = None;
                    a.progress = 0;
                }
                units += lapsed;
                self.emit(EventKind::WuTimedOut {
                    wu,
                    agent: m,
                    units: lapsed,
                });
            }
            self.requeue(wu, RedistributeReason::Timeout, units);
        }
        self.out.split_off(before)
    }

    fn requeue(&mut self, wu: WorkUnitId, reason: RedistributeReason, units: u64) {
        let unit = &mut self.wus[wu.index()];
        unit.requeues += 1;
        let abandoned = self
            .cfg
            .params
            .max_requeues
            .is_some_and(|m| unit.requeues > m);
        if abandoned {
            unit.state = WuState::Abandoned;
            self.counters.abandoned += 1;
        } else {
            unit.state = WuState::Queued;
            self.servers[unit.project.index()].queue.push_back(wu);
        }
        self.counters.redistributed += 1;
        self.counters.units_resolved += units;
        self.emit(EventKind::WuRedistributed {
            wu,
            reason,
            units_total: units,
            abandoned,
        });
    }

    fn validate_centralized(&mut self) {
        for b in std::mem::take(&mut self.ready) {
            let at = self
                .attempts
                .remove(&b.wu)
                .expect("collected units have an attempt");
            let unit = &self.wus[b.wu.index()];
            let units = at.units + u64::from(unit.complexity);
            let correct = b.token == unit.ground_truth;
            self.finish_validated(b.wu, 1, &[b.agent], correct, units);
        }
    }

    /// Marks a unit validated and commits its credit to `consensus`.
    fn finish_validated(
        &mut self,
        wu: WorkUnitId,
        group_size: usize,
        consensus: &[AgentId],
        correct: bool,
        units_total: u64,
    ) {
        let unit = &mut self.wus[wu.index()];
        unit.state = WuState::Validated;
        let complexity = unit.complexity;
        let credit = self.cfg.work.base_credit * u64::from(complexity);
        let useful = consensus.len() as u64 * u64::from(complexity);
        let c = &mut self.counters;
        c.validated += 1;
        c.validated_group_sizes += group_size as u64;
        c.wrong_accepted += u64::from(!correct);
        c.units_resolved += units_total;
        c.units_useful += useful;
        c.credit_committed += credit;
        self.emit(EventKind::WuValidated {
            wu,
            group_size: group_size as u32,
            consensus: consensus.len() as u32,
            correct,
            complexity,
            units_total,
            credit,
        });
        let allocations = split_credits(credit, consensus).expect("consensus is never empty");
        let block = self
            .ledger
            .append_block(wu, credit, allocations, self.tick)
            .expect("allocations sum to the credit");
        let (index, allocations, hash) = (
            block.index,
            block.allocations.clone(),
            hex::encode(block.hash),
        );
        self.emit(EventKind::CreditCommitted {
            wu,
            block: index,
            allocations,
            hash,
        });
    }

    // ---------------------------------------------------------------- compute

    /// Advances every online worker by its speed. Returns finished results
    /// as (wu, agent, token, late).
    fn compute(&mut self) -> Vec<(WorkUnitId, AgentId, u64, bool)> {
        let mut done = Vec::new();
        for i in 0..self.agents.len() {
            let agent = AgentId(i as u32);
            let a = &self.agents[i];
            let Some(wu) = a.task else { continue };
            let Some(at) = self.attempts.get(&wu) else {
                continue;
            };
            if !a.online || at.issued >= self.tick {
                continue;
            }
            let issued = at.issued;
            let unit = &self.wus[wu.index()];
            let complexity = u64::from(unit.complexity);
            if a.profile == Profile::FreeRider {
                let units = a.progress;
                self.release(agent);
                if self.trust() {
                    let at = self.attempts.get_mut(&wu).expect("checked");
                    at.outcomes.insert(agent, MemberOutcome::Dropped);
                    at.units += units;
                }
                self.emit(EventKind::WuDropped { wu, agent, units });
                continue;
            }
            let a = &mut self.agents[i];
            a.progress = (a.progress + u64::from(a.speed)).min(complexity);
            if a.progress < complexity {
                continue;
            }
            let token = if a.profile == Profile::Malicious {
                unit.ground_truth ^ COLLUSION_MASK
            } else {
                unit.ground_truth
            };
            let expected = issued + complexity.div_ceil(u64::from(a.speed));
            done.push((wu, agent, token, self.tick > expected));
            self.release(agent);
        }
        done
    }

    fn release(&mut self, agent: AgentId) {
        let a = &mut self.agents[agent.index()];
        a.task = None;
        a.progress = 0;
    }

    // ------------------------------------------------------------------ trust

    fn community_of(&self, agent: AgentId) -> Option<CommunityId> {
        self.communities
            .iter()
            .find(|c| c.is_alive() && c.is_member(agent))
            .map(|c| c.id())
    }

    fn live_community_of_founder(&self, owner: AgentId) -> Option<&TrustCommunity> {
        self.communities
            .iter()
            .find(|c| c.is_alive() && c.founder() == owner)
    }

    fn is_idle_worker(&self, agent: AgentId) -> bool {
        let a = &self.agents[agent.index()];
        a.online && a.task.is_none() && !a.work_agent
    }

    fn issue_trust(&mut self) {
        let mut excluded = BTreeSet::new();
        self.issue_communities(&mut excluded);
        self.issue_egoistic();
        self.issue_open_grid(&mut excluded);
    }

    /// Each operating community's manager hands its founder's units to
    /// idle members.
    fn issue_communities(&mut self, excluded: &mut BTreeSet<AgentId>) {
        for ci in 0..self.communities.len() {
            let tc = &self.communities[ci];
            if tc.phase() != Phase::Operation {
                continue;
            }
            let Some(tcm) = tc.tcm().filter(|&m| self.agents[m.index()].online) else {
                continue;
            };
            let id = tc.id();
            let project = tc.founder().index();
            while let Some(&wu) = self.servers[project].queue.front() {
                let tc = &self.communities[ci];
                let workers: Vec<AgentId> = tc
                    .members()
                    .keys()
                    .copied()
                    .filter(|&m| !self.agents[m.index()].work_agent)
                    .collect();
                let idle: Vec<AgentId> = workers
                    .iter()
                    .copied()
                    .filter(|&m| self.is_idle_worker(m) && !excluded.contains(&m))
                    .collect();
                if idle.len() < 2 {
                    break;
                }
                let mean = mean_tau(workers.iter().map(|&m| self.tau(m)));
                let f = f_min_for_tau(mean, self.limits, &mut self.rng.replication) as usize;
                let short = idle.len() < 1 + f;
                if short && !self.cfg.params.allow_short_groups {
                    break;
                }
                let members: Vec<AgentId> = idle
                    .choose_multiple(&mut self.rng.select, (1 + f).min(idle.len()))
                    .copied()
                    .collect();
                let group = ReplicaGroup {
                    wu,
                    initiator: members[0],
                    members,
                    short,
                };
                match self.try_issue(&group, tcm, Endpoint::Agent(tcm), false, Some(id)) {
                    Ok(()) => {
                        self.servers[project].queue.pop_front();
                    }
                    Err(rejecters) => excluded.extend(rejecters),
                }
            }
        }
    }

    /// Egoistic work agents compute their own units alone.
    fn issue_egoistic(&mut self) {
        for w in 0..self.servers.len() {
            let owner = AgentId(w as u32);
            let a = &self.agents[w];
            if a.profile != Profile::Egoistic || !a.online || a.task.is_some() {
                continue;
            }
            let Some(wu) = self.servers[w].queue.pop_front() else {
                continue;
            };
            let group = ReplicaGroup {
                wu,
                initiator: owner,
                members: vec![owner],
                short: false,
            };
            self.try_issue(&group, owner, Endpoint::Agent(owner), false, None)
                .expect("owners accept their own work");
        }
    }

    /// Online work agents take turns placing one unit each on the shared
    /// pool of unaffiliated idle agents.
    fn issue_open_grid(&mut self, excluded: &mut BTreeSet<AgentId>) {
        let mut active: Vec<usize> = (0..self.servers.len())
            .filter(|&w| {
                let a = &self.agents[w];
                a.online && a.profile != Profile::Egoistic && !self.servers[w].queue.is_empty()
            })
            .collect();
        if active.is_empty() {
            return;
        }
        let strategy = self.cfg.strategy;
        let ids: Vec<AgentId> = (0..self.agents.len() as u32)
            .map(AgentId)
            .filter(|&a| {
                self.is_idle_worker(a) && !excluded.contains(&a) && self.community_of(a).is_none()
            })
            .collect();
        let mut pool: Vec<Candidate> = Vec::with_capacity(ids.len());
        for a in ids {
            let tau = self.tau(a);
            let f_min = if strategy == Strategy::Random {
                0
            } else {
                f_min_for_tau(tau, self.limits, &mut self.rng.replication)
            };
            pool.push(Candidate {
                agent: a,
                tau,
                f_min,
                trust_class: classify(tau).expect("tau in range"),
                busy: false,
            });
        }

        while !active.is_empty() {
            let mut next = Vec::new();
            for w in active {
                let Some(&wu) = self.servers[w].queue.front() else {
                    continue;
                };
                let Some((group, fallback)) = self.select_group(&pool, wu) else {
                    continue;
                };
                if group.short && !self.cfg.params.allow_short_groups {
                    continue;
                }
                let owner = AgentId(w as u32);
                let taken =
                    match self.try_issue(&group, owner, Endpoint::Agent(owner), fallback, None) {
                        Ok(()) => {
                            self.servers[w].queue.pop_front();
                            group.members
                        }
                        Err(rejecters) => {
                            excluded.extend(rejecters.iter().copied());
                            rejecters
                        }
                    };
                for c in pool.iter_mut().filter(|c| taken.contains(&c.agent)) {
                    c.busy = true;
                }
                next.push(w);
            }
            active = next;
        }
    }

    fn select_group(&mut self, pool: &[Candidate], wu: WorkUnitId) -> Option<(ReplicaGroup, bool)> {
        let rng = &mut self.rng.select;
        match self.cfg.strategy {
            Strategy::Drds => drds_select(pool, wu, rng).ok().map(|g| (g, false)),
            Strategy::Dods => dods_assign(pool, &[wu], self.cfg.params.allow_short_groups)
                .ok()
                .and_then(|mut r| r.groups.pop())
                .map(|g| (g, false)),
            Strategy::Dgds => {
                match dgds_select(pool, wu, self.cfg.params.dgds_trusted_count, rng) {
                    Ok(g) => Some((g, false)),
                    Err(SelectionError::FallbackToDrds) => {
                        drds_select(pool, wu, rng).ok().map(|g| (g, true))
                    }
                    Err(_) => None,
                }
            }
            Strategy::Random => {
                let size = roulette_round(
                    self.cfg.params.random_replication,
                    &mut self.rng.replication,
                )
                .expect("validated replication");
                random_baseline_select(pool, wu, size.max(1) as usize, rng)
                    .ok()
                    .map(|g| (g, false))
            }
        }
    }

    /// Offers the unit to every group member. Any refusal defers the unit
    /// and returns the refusers.
    fn try_issue(
        &mut self,
        group: &ReplicaGroup,
        rater: AgentId,
        issuer: Endpoint,
        fallback: bool,
        community: Option<CommunityId>,
    ) -> Result<(), Vec<AgentId>> {
        let wu = group.wu;
        let mut rejecters = Vec::new();
        for &m in &group.members {
            let accepts = match self.agents[m.index()].profile {
                Profile::Slow => self.rng.behavior.random_bool(SLOW_ACCEPT_PROBABILITY),
                _ => true,
            };
            if !accepts {
                rejecters.push(m);
            }
        }
        if !rejecters.is_empty() {
            for &m in &rejecters {
                self.emit(EventKind::WuRejected { wu, agent: m });
                self.rate(rater, m, RatingCause::RejectedWU);
            }
            return Err(rejecters);
        }
        let complexity = u64::from(self.wus[wu.index()].complexity);
        let factor = self.cfg.params.deadline_factor;
        let deadlines: Vec<Tick> = group
            .members
            .iter()
            .map(|m| {
                self.tick + complexity.div_ceil(u64::from(self.agents[m.index()].speed)) * factor
            })
            .collect();
        self.start_attempt(wu, &group.members, &deadlines);
        self.emit(EventKind::WuIssued {
            wu,
            project: self.wus[wu.index()].project,
            issuer,
            members: group.members.clone(),
            short: group.short,
            fallback,
            community,
        });
        for (&agent, &deadline) in group.members.iter().zip(&deadlines) {
            self.emit(EventKind::WuAccepted {
                wu,
                agent,
                deadline,
            });
        }
        Ok(())
    }

    fn rate(&mut self, rater: AgentId, subject: AgentId, cause: RatingCause) {
        if rater == subject {
            return;
        }
        let rating = Rating::new(rater, subject, cause, self.tick);
        self.reps[subject.index()]
            .record_rating(rating)
            .expect("ratings are built from the cause table");
        self.counters.ratings += 1;
        let tau = self.reps[subject.index()].tau();
        self.emit(EventKind::RatingIssued {
            rater,
            subject,
            cause,
            value: cause.value(),
            tau,
        });
    }

    /// Who may validate results of `owner`'s project right now.
    fn validator(&self, owner: AgentId) -> Option<AgentId> {
        if self.agents[owner.index()].online {
            return Some(owner);
        }
        let tc = self.live_community_of_founder(owner)?;
        tc.tcm()
            .filter(|&m| tc.phase() == Phase::Operation && self.agents[m.index()].online)
    }

    fn collect_trust(&mut self, wu: WorkUnitId, agent: AgentId, token: u64, late: bool) {
        let unit = &self.wus[wu.index()];
        let units = u64::from(unit.complexity);
        let correct = token == unit.ground_truth;
        let owner = AgentId(unit.project.0);
        let buffered = self.validator(owner).is_none();
        let at = self
            .attempts
            .get_mut(&wu)
            .expect("completed units have an attempt");
        at.outcomes
            .insert(agent, MemberOutcome::Result { token, late });
        at.units += units;
        self.emit(EventKind::WuCompleted {
            wu,
            agent,
            units,
            correct,
            late,
            buffered,
        });
    }

    fn timeouts_trust(&mut self) {
        let t = self.tick;
        let mut lapsed = Vec::new();
        for (&wu, at) in &self.attempts {
            for (&m, &deadline) in &at.deadlines {
                if deadline <= t && !at.outcomes.contains_key(&m) {
                    lapsed.push((wu, m));
                }
            }
        }
        for (wu, m) in lapsed {
            let a = &self.agents[m.index()];
            let units = if a.task == Some(wu) { a.progress } else { 0 };
            if a.task == Some(wu) {
                self.release(m);
            }
            let at = self.attempts.get_mut(&wu).expect("listed");
            at.outcomes.insert(m, MemberOutcome::TimedOut);
            at.units += units;
            self.emit(EventKind::WuTimedOut {
                wu,
                agent: m,
                units,
            });
        }
    }

    fn validate_trust(&mut self) {
        let finished: Vec<WorkUnitId> = self
            .attempts
            .iter()
            .filter(|(_, at)| at.members.iter().all(|m| at.outcomes.contains_key(m)))
            .map(|(&wu, _)| wu)
            .collect();
        for wu in finished {
            let owner = AgentId(self.wus[wu.index()].project.0);
            let Some(validator) = self.validator(owner) else {
                continue;
            };
            let at = self.attempts.remove(&wu).expect("listed");
            let judgement = validate_replicas(&at.members, &at.outcomes);
            for &(subject, cause) in &judgement.ratings {
                self.rate(validator, subject, cause);
            }
            match judgement.verdict {
                Verdict::Validated { token, consensus } => {
                    let correct = token == self.wus[wu.index()].ground_truth;
                    self.finish_validated(wu, at.members.len(), &consensus, correct, at.units);
                    if validator != owner {
                        self.handback.entry(owner).or_default().push(wu);
                    }
                }
                Verdict::Failed => self.requeue(wu, RedistributeReason::NoMajority, at.units),
            }
        }
    }

    // -------------------------------------------------------------- lifecycle

    fn flush_tc_log(&mut self, ci: usize) {
        let log = self.communities[ci].log()[self.tc_emitted[ci]..].to_vec();
        self.tc_emitted[ci] += log.len();
        for e in log {
            self.emit(EventKind::TcEvent(e));
        }
    }

    fn project_exhausted(&self, owner: AgentId) -> bool {
        self.servers[owner.index()].queue.is_empty()
            && !self
                .attempts
                .keys()
                .any(|wu| self.wus[wu.index()].project.0 == owner.0)
    }

    /// Unaffiliated online workers.
    fn outsiders(&self) -> Vec<AgentId> {
        (0..self.agents.len() as u32)
            .map(AgentId)
            .filter(|&a| {
                let ag = &self.agents[a.index()];
                ag.online && !ag.work_agent && self.community_of(a).is_none()
            })
            .collect()
    }

    fn outside_share(&self, credit: f64) -> f64 {
        let mean = mean_tau(
            (0..self.agents.len() as u32)
                .map(AgentId)
                .filter(|&a| !self.agents[a.index()].work_agent && self.community_of(a).is_none())
                .map(|a| self.tau(a)),
        );
        expected_share(credit, mean, self.limits)
    }

    fn inside_share(&self, credit: f64, workers: impl Iterator<Item = AgentId>) -> f64 {
        expected_share(credit, mean_tau(workers.map(|a| self.tau(a))), self.limits)
    }

    fn mean_credit(&self) -> f64 {
        let (lo, hi) = self.cfg.work.complexity;
        self.cfg.work.base_credit as f64 * f64::from(lo + hi) / 2.0
    }

    fn lifecycle(&mut self) {
        let t = self.tick;
        let params = self.community_params;
        let invite_tick = t.is_multiple_of(params.formation_interval);
        for ci in 0..self.communities.len() {
            if self.communities[ci].phase() != Phase::Operation {
                continue;
            }
            self.operate_community(ci, invite_tick);
            self.flush_tc_log(ci);
        }
        if self.cfg.params.formation && invite_tick {
            for w in 0..self.servers.len() {
                self.try_form(AgentId(w as u32));
            }
        }
    }

    fn operate_community(&mut self, ci: usize, invite_tick: bool) {
        let t = self.tick;
        let params = self.community_params;
        let id = self.communities[ci].id();
        let tcm = self.communities[ci]
            .tcm()
            .expect("operating communities have a manager");
        if !self.agents[tcm.index()].online {
            let since = *self.tcm_down_since.entry(id).or_insert(t);
            if t + 1 - since < params.election_delay {
                return;
            }
            self.tcm_down_since.remove(&id);
            let agents = &self.agents;
            let available = |a: AgentId| agents[a.index()].online;
            if self.communities[ci]
                .handle_tcm_failure(&available, t)
                .is_err()
            {
                self.communities[ci].dissolve(t);
                return;
            }
        } else {
            self.tcm_down_since.remove(&id);
        }

        let credit = self.mean_credit();
        let outsiders = if invite_tick {
            self.outsiders()
        } else {
            Vec::new()
        };
        let tc = &self.communities[ci];
        let mut reputations: BTreeMap<AgentId, f64> = BTreeMap::new();
        for &a in tc.members().keys().chain(&outsiders) {
            // Work agents are never rated; their join-time value stands.
            if !self.agents[a.index()].work_agent {
                reputations.insert(a, self.tau(a));
            }
        }
        let actions = tc
            .operate_tick(&reputations, &outsiders, &params)
            .expect("community is operating");
        for action in actions {
            match action {
                Action::Evict(a) => {
                    self.communities[ci].evict(a, t).expect("member");
                }
                Action::Invite(a) => {
                    let tau = self.tau(a);
                    self.communities[ci].invite(a, tau, t).expect("operating");
                    let inside = self.inside_share(credit, self.worker_members(ci).chain([a]));
                    let egoistic = self.agents[a.index()].profile == Profile::Egoistic;
                    if join_decision(egoistic, inside, self.outside_share(credit)) {
                        self.communities[ci].join(a, tau, t).expect("outsider");
                    }
                }
                Action::AssignMonitor(..) => {}
            }
        }

        // Members leave once the open grid would pay them at least as well.
        let tc = &self.communities[ci];
        let tcm = tc.tcm();
        let inside = self.inside_share(credit, self.worker_members(ci));
        let outside = self.outside_share(credit);
        if !join_decision(false, inside, outside) {
            let leavers: Vec<AgentId> = self
                .worker_members(ci)
                .filter(|&a| Some(a) != tcm)
                .collect();
            for a in leavers {
                self.communities[ci].leave(a, t).expect("member");
            }
        }

        let exhausted = self.project_exhausted(self.communities[ci].founder());
        if self.communities[ci].dissolve_check(&params, exhausted) {
            self.communities[ci].dissolve(t);
        }
    }

    fn worker_members(&self, ci: usize) -> impl Iterator<Item = AgentId> + '_ {
        self.communities[ci]
            .members()
            .keys()
            .copied()
            .filter(|a| !self.agents[a.index()].work_agent)
    }

    /// A work agent with pending work and no community invites the best
    /// reputed outsiders.
    fn try_form(&mut self, owner: AgentId) {
        let t = self.tick;
        let a = &self.agents[owner.index()];
        if !a.online
            || a.profile == Profile::Egoistic
            || self.servers[owner.index()].queue.is_empty()
            || self.live_community_of_founder(owner).is_some()
        {
            return;
        }
        let params = self.community_params;
        let reputations: BTreeMap<AgentId, f64> = self
            .outsiders()
            .into_iter()
            .map(|a| (a, self.tau(a)))
            .collect();
        let Some(invitees) = evaluate_formation(owner, &reputations, &params) else {
            return;
        };
        let credit = self.mean_credit();
        let inside = self.inside_share(credit, invitees.iter().copied());
        let outside = self.outside_share(credit);

        let id = CommunityId(self.communities.len() as u32);
        let with_tau: Vec<(AgentId, f64)> =
            invitees.iter().map(|&a| (a, reputations[&a])).collect();
        let mut tc = TrustCommunity::begin(id, owner, &with_tau, t);
        tc.start_formation(self.tau(owner), t)
            .expect("fresh community");
        for &(a, tau) in &with_tau {
            let egoistic = self.agents[a.index()].profile == Profile::Egoistic;
            if join_decision(egoistic, inside, outside) {
                tc.join(a, tau, t).expect("distinct invitees");
            }
        }
        let agents = &self.agents;
        let available = |a: AgentId| agents[a.index()].online;
        // Failure already dissolved the community and logged it.
        let _ = tc.finish_formation(&available, &params, t);
        self.communities.push(tc);
        self.tc_emitted.push(0);
        self.flush_tc_log(self.communities.len() - 1);
    }
}

fn mean_tau(taus: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = taus.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        NEUTRAL_TAU
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::AgentGroup;

    fn config(
        mode: Mode,
        groups: &[(u32, Profile, u32)],
        wu_count: u32,
        complexity: u32,
    ) -> ScenarioConfig {
        let mut cfg = ScenarioConfig {
            mode,
            horizon_ticks: 100,
            ..ScenarioConfig::default()
        };
        cfg.agents = groups
            .iter()
            .map(|&(count, profile, speed)| AgentGroup {
                count,
                profile,
                speed,
                churn: None,
            })
            .collect();
        cfg.work.wu_count = wu_count;
        cfg.work.complexity = (complexity, complexity);
        cfg.params.formation = false;
        cfg
    }

    fn run(world: &mut World, ticks: u64) -> Vec<SimEvent> {
        (0..ticks).flat_map(|_| world.step()).collect()
    }

    fn fault(tick: Tick, entity: Entity, action: FaultAction) -> FaultSpec {
        FaultSpec {
            tick,
            entity,
            action,
        }
    }

    #[test]
    fn empty_world_is_silent() {
        for mode in [Mode::Centralized, Mode::Trust] {
            let mut cfg = config(mode, &[], 0, 1);
            cfg.work.servers = if mode == Mode::Trust { 0 } else { 1 };
            assert!(run(&mut World::new(&cfg), 10).is_empty());
        }
    }

    #[test]
    fn pair_of_replicas_validates_at_tick_four() {
        // Agent 0 owns the project; agents 1 and 2 compute.
        let mut cfg = config(Mode::Trust, &[(3, Profile::Reliable, 1)], 1, 3);
        cfg.limits.lo = 1.0;
        cfg.limits.hi = 1.0;
        let events = run(&mut World::new(&cfg), 6);
        let issued: Vec<_> = events
            .iter()
            .filter_map(|e| match &e.event {
                EventKind::WuIssued { members, .. } => Some((e.tick, members.len())),
                _ => None,
            })
            .collect();
        assert_eq!(issued, vec![(1, 2)]);
        let validated: Vec<Tick> = events
            .iter()
            .filter(|e| matches!(e.event, EventKind::WuValidated { .. }))
            .map(|e| e.tick)
            .collect();
        assert_eq!(validated, vec![4]);
    }

    #[test]
    fn same_seed_same_log() {
        let mut cfg = config(
            Mode::Trust,
            &[
                (2, Profile::Reliable, 2),
                (10, Profile::Reliable, 1),
                (4, Profile::Malicious, 1),
                (3, Profile::Slow, 1),
            ],
            200,
            4,
        );
        cfg.work.servers = 2;
        cfg.work.complexity = (2, 6);
        cfg.params.formation = true;
        cfg.params.formation_interval = 10;
        cfg.seed = 42;
        let a = serde_json::to_string(&run(&mut World::new(&cfg), 150)).unwrap();
        let b = serde_json::to_string(&run(&mut World::new(&cfg), 150)).unwrap();
        assert_eq!(a, b);
        cfg.seed = 43;
        let c = serde_json::to_string(&run(&mut World::new(&cfg), 150)).unwrap();
        assert_ne!(a, c);
    }

    fn issued_by_project(events: &[SimEvent]) -> BTreeMap<ServerId, usize> {
        let mut by = BTreeMap::new();
        for e in events {
            if let EventKind::WuIssued { project, .. } = e.event {
                *by.entry(project).or_insert(0) += 1;
            }
        }
        by
    }

    #[test]
    fn round_robin_splits_requests_evenly() {
        let mut cfg = config(Mode::Centralized, &[(10, Profile::Reliable, 1)], 10, 5);
        cfg.work.servers = 2;
        let mut world = World::new(&cfg);
        world.tick = 1;
        let mut served = BTreeMap::new();
        for a in 0..10 {
            let wu = world.centralized_assign(AgentId(a)).expect("work left");
            *served.entry(world.wus[wu.index()].project).or_insert(0) += 1;
        }
        assert_eq!(served, BTreeMap::from([(ServerId(0), 5), (ServerId(1), 5)]));
        assert_eq!(issued_by_project(&world.out).values().sum::<usize>(), 10);
    }

    #[test]
    fn assignment_respects_server_availability() {
        let mut cfg = config(Mode::Centralized, &[(4, Profile::Reliable, 1)], 10, 5);
        cfg.work.servers = 2;
        let mut world = World::new(&cfg);
        world.inject_fault(&fault(0, Entity::Server(0), FaultAction::Down));
        world.inject_fault(&fault(0, Entity::Server(1), FaultAction::Down));
        assert_eq!(world.centralized_assign(AgentId(0)), None);

        cfg.faults = vec![fault(1, Entity::Server(0), FaultAction::Down)];
        let events = run(&mut World::new(&cfg), 1);
        assert_eq!(
            issued_by_project(&events),
            BTreeMap::from([(ServerId(1), 4)])
        );
    }

    #[test]
    fn collection_routes_buffers_and_rejects_unknown_units() {
        let cfg = config(Mode::Centralized, &[(2, Profile::Reliable, 1)], 2, 5);
        let mut world = World::new(&cfg);
        world.step();
        assert_eq!(
            world.collect_result(WorkUnitId(0), AgentId(0), 1),
            Ok(Collection::Routed)
        );
        assert_eq!(world.wus[0].state, WuState::Collected);
        world.inject_fault(&fault(1, Entity::Server(0), FaultAction::Down));
        assert_eq!(
            world.collect_result(WorkUnitId(1), AgentId(1), 1),
            Ok(Collection::Buffered)
        );
        assert_eq!(world.buffered(), vec![WorkUnitId(1)]);
        assert_eq!(
            world.collect_result(WorkUnitId(9), AgentId(0), 1),
            Err(SimError::UnknownWorkUnit(WorkUnitId(9)))
        );
    }

    #[test]
    fn buffered_results_flush_fifo_on_server_up() {
        let mut cfg = config(Mode::Centralized, &[(3, Profile::Reliable, 1)], 3, 3);
        cfg.faults = vec![
            fault(2, Entity::Server(0), FaultAction::Down),
            fault(10, Entity::Server(0), FaultAction::Up),
        ];
        let events = run(&mut World::new(&cfg), 12);
        let buffered: Vec<WorkUnitId> = events
            .iter()
            .filter_map(|e| match e.event {
                EventKind::WuCompleted {
                    wu, buffered: true, ..
                } => Some(wu),
                _ => None,
            })
            .collect();
        assert_eq!(buffered.len(), 3);
        let flushed: Vec<(Tick, WorkUnitId)> = events
            .iter()
            .filter_map(|e| match e.event {
                EventKind::ResultFlushed { wu, .. } => Some((e.tick, wu)),
                _ => None,
            })
            .collect();
        assert_eq!(
            flushed,
            buffered.iter().map(|&wu| (10, wu)).collect::<Vec<_>>()
        );
        let validated = events
            .iter()
            .filter(|e| matches!(e.event, EventKind::WuValidated { .. }))
            .map(|e| e.tick)
            .collect::<Vec<_>>();
        assert_eq!(validated, vec![10, 10, 10]);
    }

    #[test]
    fn lapsed_unit_requeued_at_deadline() {
        let mut cfg = config(Mode::Centralized, &[(1, Profile::Reliable, 1)], 1, 3);
        cfg.params.timeout_ticks = 10;
        cfg.faults = vec![fault(2, Entity::Agent(0), FaultAction::Down)];
        let events = run(&mut World::new(&cfg), 15);
        let redistributed: Vec<Tick> = events
            .iter()
            .filter(|e| matches!(e.event, EventKind::WuRedistributed { .. }))
            .map(|e| e.tick)
            .collect();
        assert_eq!(redistributed, vec![11]);
        assert!(!events
            .iter()
            .any(|e| matches!(e.event, EventKind::RatingIssued { .. })));
    }

    #[test]
    fn finishing_on_the_deadline_tick_is_in_time() {
        let mut cfg = config(Mode::Centralized, &[(1, Profile::Reliable, 1)], 1, 3);
        cfg.params.timeout_ticks = 3;
        let events = run(&mut World::new(&cfg), 6);
        assert!(!events
            .iter()
            .any(|e| matches!(e.event, EventKind::WuRedistributed { .. })));
        assert!(events
            .iter()
            .any(|e| e.tick == 4 && matches!(e.event, EventKind::WuValidated { .. })));
    }

    #[test]
    fn trust_mode_lapse_is_rated() {
        let mut cfg = config(Mode::Trust, &[(3, Profile::Reliable, 1)], 1, 3);
        cfg.limits.lo = 1.0;
        cfg.limits.hi = 1.0;
        cfg.faults = vec![fault(2, Entity::Agent(2), FaultAction::Down)];
        let events = run(&mut World::new(&cfg), 10);
        // Deadline is 1 + 3 * 2 = 7.
        let lapse = events
            .iter()
            .find_map(|e| match e.event {
                EventKind::RatingIssued {
                    subject,
                    cause: RatingCause::TimedOut,
                    value,
                    ..
                } => Some((e.tick, subject, value)),
                _ => None,
            })
            .expect("timed-out member rated");
        assert_eq!(lapse, (7, AgentId(2), -0.75));
        // One of two members is not a strict majority.
        assert!(events.iter().any(|e| matches!(
            e.event,
            EventKind::WuRedistributed {
                reason: RedistributeReason::NoMajority,
                ..
            }
        )));
    }

    #[test]
    fn four_member_majority_and_two_member_failure() {
        let mut cfg = config(
            Mode::Trust,
            &[
                (1, Profile::Reliable, 1),
                (3, Profile::Reliable, 1),
                (1, Profile::Malicious, 1),
            ],
            1,
            2,
        );
        cfg.limits.lo = 3.0;
        cfg.limits.hi = 3.0;
        let events = run(&mut World::new(&cfg), 5);
        let validated = events
            .iter()
            .find_map(|e| match e.event {
                EventKind::WuValidated {
                    group_size,
                    consensus,
                    correct,
                    ..
                } => Some((group_size, consensus, correct)),
                _ => None,
            })
            .unwrap();
        assert_eq!(validated, (4, 3, true));

        let mut cfg = config(
            Mode::Trust,
            &[(2, Profile::Reliable, 1), (1, Profile::FreeRider, 1)],
            1,
            2,
        );
        cfg.limits.lo = 1.0;
        cfg.limits.hi = 1.0;
        let events = run(&mut World::new(&cfg), 4);
        assert!(events.iter().any(|e| matches!(
            e.event,
            EventKind::WuRedistributed {
                reason: RedistributeReason::NoMajority,
                ..
            }
        )));
        assert!(!events
            .iter()
            .any(|e| matches!(e.event, EventKind::WuValidated { .. })));
    }

    #[test]
    fn manager_failover_within_election_delay() {
        let mut cfg = config(
            Mode::Trust,
            &[
                (1, Profile::Reliable, 1),
                (12, Profile::Reliable, 1),
                (4, Profile::FreeRider, 1),
            ],
            5000,
            2,
        );
        cfg.params.formation = true;
        cfg.params.formation_interval = 10;
        cfg.faults = vec![fault(100, Entity::Agent(0), FaultAction::Down)];
        let mut world = World::new(&cfg);
        let events = run(&mut world, 110);
        let formed = events.iter().any(|e| {
            e.tick < 100 && matches!(&e.event, EventKind::TcEvent(m) if m.kind == crate::community::MembershipKind::TcmElected)
        });
        assert!(formed, "community operating before the fault");
        let failover = events
            .iter()
            .find(|e| {
                e.tick >= 100
                    && matches!(&e.event, EventKind::TcEvent(m) if m.kind == crate::community::MembershipKind::TcmElected)
            })
            .expect("new manager");
        assert!(failover.tick <= 101);
    }

    #[test]
    fn churn_cycle_has_period_up_plus_down() {
        let mut cfg = config(Mode::Centralized, &[(1, Profile::Churner, 1)], 0, 1);
        cfg.agents[0].churn = Some((50, 50));
        let events = run(&mut World::new(&cfg), 400);
        let downs: Vec<Tick> = events
            .iter()
            .filter(|e| matches!(e.event, EventKind::AgentDown { .. }))
            .map(|e| e.tick)
            .collect();
        let ups: Vec<Tick> = events
            .iter()
            .filter(|e| matches!(e.event, EventKind::AgentUp { .. }))
            .map(|e| e.tick)
            .collect();
        assert!(downs.len() >= 3);
        assert!(downs.windows(2).all(|w| w[1] - w[0] == 100));
        assert!(ups.windows(2).all(|w| w[1] - w[0] == 100));
        assert_eq!(ups[0] - downs[0], 50);
    }

    #[test]
    fn counters_agree_with_log_and_ledger() {
        let mut cfg = config(
            Mode::Trust,
            &[
                (1, Profile::Reliable, 1),
                (8, Profile::Reliable, 1),
                (4, Profile::Malicious, 1),
            ],
            300,
            2,
        );
        cfg.strategy = Strategy::Dgds;
        let mut world = World::new(&cfg);
        let events = run(&mut world, 300);
        let wrong = events
            .iter()
            .filter(|e| matches!(e.event, EventKind::WuValidated { correct: false, .. }))
            .count() as u64;
        assert_eq!(world.counters().wrong_accepted, wrong);
        assert_eq!(
            world.counters().credit_committed,
            world.ledger().total_committed()
        );
    }
}
