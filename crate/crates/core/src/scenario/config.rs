//! Scenario files.
//!
//! Scenarios are TOML documents. Loading walks the document by hand instead
//! of deriving `Deserialize` so that every problem in a file is reported at
//! once, unknown keys included.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;
use toml::{Table, Value};

use crate::community::CommunityParams;
use crate::distribution::{DgdsTrustedCount, Strategy};
use crate::trust::{ReplicationLimits, DEFAULT_WINDOW};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn messages(&self) -> Vec<String> {
        match self {
            ConfigError::Io { .. } => vec![self.to_string()],
            ConfigError::Invalid(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Centralized,
    #[default]
    Trust,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "centralized" => Ok(Mode::Centralized),
            "trust" => Ok(Mode::Trust),
            other => Err(format!(
                "unknown mode `{other}` (expected centralized|trust)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Centralized => "centralized",
            Mode::Trust => "trust",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Reliable,
    Churner,
    Slow,
    Malicious,
    FreeRider,
    Egoistic,
}

impl Profile {
    pub const ALL: [Profile; 6] = [
        Profile::Reliable,
        Profile::Churner,
        Profile::Slow,
        Profile::Malicious,
        Profile::FreeRider,
        Profile::Egoistic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Reliable => "reliable",
            Profile::Churner => "churner",
            Profile::Slow => "slow",
            Profile::Malicious => "malicious",
            Profile::FreeRider => "free_rider",
            Profile::Egoistic => "egoistic",
        }
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profile::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                format!("unknown profile `{s}` (expected reliable|churner|slow|malicious|free_rider|egoistic)")
            })
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default on/off cycle for churners that do not declare one.
pub const DEFAULT_CHURN: (u64, u64) = (50, 50);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgentGroup {
    pub count: u32,
    pub profile: Profile,
    pub speed: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub churn: Option<(u64, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkConfig {
    pub wu_count: u32,
    /// Inclusive uniform range of complexity units.
    pub complexity: (u32, u32),
    /// Millicredits per complexity unit.
    pub base_credit: u64,
    /// Work servers (centralized) or work agents (trust mode).
    pub servers: u32,
}

impl Default for WorkConfig {
    fn default() -> Self {
        Self {
            wu_count: 0,
            complexity: (1, 1),
            base_credit: 1000,
            servers: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Entity {
    Server(u32),
    Agent(u32),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Server(i) => write!(f, "server:{i}"),
            Entity::Agent(i) => write!(f, "agent:{i}"),
        }
    }
}

impl FromStr for Entity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad entity `{s}` (expected server:<n> or agent:<n>)");
        let (kind, idx) = s.split_once(':').ok_or_else(bad)?;
        let idx: u32 = idx.parse().map_err(|_| bad())?;
        match kind {
            "server" => Ok(Entity::Server(idx)),
            "agent" => Ok(Entity::Agent(idx)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Entity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultAction {
    Down,
    Up,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaultSpec {
    pub tick: u64,
    pub entity: Entity,
    pub action: FaultAction,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Params {
    /// Reputation sliding window length.
    pub window: usize,
    pub allow_short_groups: bool,
    pub dgds_trusted_count: DgdsTrustedCount,
    /// Mean group size of the random baseline (roulette-rounded per unit).
    pub random_replication: f64,
    /// Server-side deadline in centralized mode.
    pub timeout_ticks: u64,
    /// Safety factor on an agent's own completion estimate in trust mode.
    pub deadline_factor: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_requeues: Option<u32>,
    /// Whether work agents try to found trust communities.
    pub formation: bool,
    pub min_size: usize,
    pub max_size: usize,
    pub join_threshold: f64,
    pub evict_threshold: f64,
    pub drop_delta: f64,
    pub dissolve_fraction: f64,
    pub election_delay: u64,
    pub formation_interval: u64,
}

impl Default for Params {
    fn default() -> Self {
        let c = CommunityParams::default();
        Self {
            window: DEFAULT_WINDOW,
            allow_short_groups: false,
            dgds_trusted_count: DgdsTrustedCount::TotalUntrusted,
            random_replication: 3.0,
            timeout_ticks: 50,
            deadline_factor: 2,
            max_requeues: None,
            formation: true,
            min_size: c.min_size,
            max_size: c.max_size,
            join_threshold: c.join_threshold,
            evict_threshold: c.evict_threshold,
            drop_delta: c.drop_delta,
            dissolve_fraction: c.dissolve_fraction,
            election_delay: c.election_delay,
            formation_interval: c.formation_interval,
        }
    }
}

impl Params {
    pub fn community(&self) -> CommunityParams {
        CommunityParams {
            min_size: self.min_size,
            max_size: self.max_size,
            join_threshold: self.join_threshold,
            evict_threshold: self.evict_threshold,
            drop_delta: self.drop_delta,
            dissolve_fraction: self.dissolve_fraction,
            election_delay: self.election_delay,
            formation_interval: self.formation_interval,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Limits {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub strategy: Strategy,
    pub seed: u64,
    pub horizon_ticks: u64,
    pub agents: Vec<AgentGroup>,
    pub work: WorkConfig,
    pub faults: Vec<FaultSpec>,
    pub params: Params,
    pub limits: Limits,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let l = ReplicationLimits::default();
        Self {
            name: "scenario".into(),
            mode: Mode::default(),
            strategy: Strategy::default(),
            seed: 0,
            horizon_ticks: 1,
            agents: Vec::new(),
            work: WorkConfig::default(),
            faults: Vec::new(),
            params: Params::default(),
            limits: Limits {
                lo: l.lo(),
                hi: l.hi(),
            },
        }
    }
}

impl ScenarioConfig {
    pub fn agent_count(&self) -> u32 {
        self.agents.iter().map(|g| g.count).sum()
    }

    pub fn replication_limits(&self) -> ReplicationLimits {
        ReplicationLimits::new(self.limits.lo, self.limits.hi)
            .expect("limits validated at load time")
    }

    /// Effective configuration as a scenario file.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        parse_scenario_str(text)
    }

    /// Semantic checks shared by loading and programmatic construction.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        self.collect_errors(&mut errs);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    fn collect_errors(&self, errs: &mut Vec<String>) {
        if self.horizon_ticks == 0 {
            errs.push("horizon_ticks: must be positive".into());
        }
        for (i, g) in self.agents.iter().enumerate() {
            if g.speed == 0 {
                errs.push(format!("agents[{i}].speed: must be at least 1"));
            }
            if let Some((up, down)) = g.churn {
                if up == 0 || down == 0 {
                    errs.push(format!(
                        "agents[{i}].churn: both phases must be at least 1 tick"
                    ));
                }
            }
        }
        let (lo, hi) = self.work.complexity;
        if lo == 0 || hi < lo {
            errs.push(format!(
                "work.complexity: need 1 <= min <= max, got [{lo}, {hi}]"
            ));
        }
        if self.work.servers == 0 {
            errs.push("work.servers: must be at least 1".into());
        }
        let n_agents = self.agent_count();
        if self.mode == Mode::Trust && self.work.servers > n_agents {
            errs.push(format!(
                "work.servers: trust mode needs one agent per work agent ({} servers, {n_agents} agents)",
                self.work.servers
            ));
        }
        for (i, f) in self.faults.iter().enumerate() {
            match f.entity {
                Entity::Server(s) if s >= self.work.servers => errs.push(format!(
                    "faults[{i}].entity: unknown entity {} (only {} servers)",
                    f.entity, self.work.servers
                )),
                Entity::Agent(a) if a >= n_agents => errs.push(format!(
                    "faults[{i}].entity: unknown entity {} (only {n_agents} agents)",
                    f.entity
                )),
                _ => {}
            }
        }
        if let Err(e) = ReplicationLimits::new(self.limits.lo, self.limits.hi) {
            errs.push(format!("limits: {e}"));
        }
        let p = &self.params;
        if p.window == 0 {
            errs.push("params.window: must be at least 1".into());
        }
        if !(p.random_replication >= 1.0 && p.random_replication.is_finite()) {
            errs.push("params.random_replication: must be at least 1".into());
        }
        if p.timeout_ticks == 0 {
            errs.push("params.timeout_ticks: must be positive".into());
        }
        if p.deadline_factor == 0 {
            errs.push("params.deadline_factor: must be positive".into());
        }
        if p.min_size < 2 || p.max_size < p.min_size {
            errs.push(format!(
                "params.min_size/max_size: need 2 <= min_size <= max_size, got {} and {}",
                p.min_size, p.max_size
            ));
        }
        for (key, v) in [
            ("join_threshold", p.join_threshold),
            ("evict_threshold", p.evict_threshold),
            ("drop_delta", p.drop_delta),
            ("dissolve_fraction", p.dissolve_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("params.{key}: must lie in [0, 1], got {v}"));
            }
        }
        if p.election_delay == 0 {
            errs.push("params.election_delay: must be at least 1".into());
        }
        if p.formation_interval == 0 {
            errs.push("params.formation_interval: must be at least 1".into());
        }
    }
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}

/// Collects errors while pulling typed values out of TOML tables.
struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn check_keys(&mut self, table: &Table, section: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.errors
                    .push(format!("{}: unknown key", join(section, key)));
            }
        }
    }

    fn get<T>(
        &mut self,
        table: &Table,
        section: &str,
        key: &str,
        default: T,
        convert: impl FnOnce(&Value) -> Result<T, String>,
    ) -> T {
        match table.get(key) {
            None => default,
            Some(v) => match convert(v) {
                Ok(x) => x,
                Err(e) => {
                    self.errors.push(format!("{}: {e}", join(section, key)));
                    default
                }
            },
        }
    }

    fn table<'a>(&mut self, root: &'a Table, key: &str) -> Option<&'a Table> {
        match root.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.errors.push(format!("{key}: expected a table"));
                None
            }
        }
    }

    fn tables<'a>(&mut self, root: &'a Table, key: &str) -> Vec<&'a Table> {
        match root.get(key) {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .filter_map(|(i, v)| match v {
                    Value::Table(t) => Some(t),
                    _ => {
                        self.errors.push(format!("{key}[{i}]: expected a table"));
                        None
                    }
                })
                .collect(),
            Some(_) => {
                self.errors
                    .push(format!("{key}: expected an array of tables"));
                Vec::new()
            }
        }
    }
}

fn join(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn as_u64(v: &Value) -> Result<u64, String> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(i) => Err(format!("must be non-negative, got {i}")),
        _ => Err(format!("expected an integer, got {}", v.type_str())),
    }
}

fn as_u32(v: &Value) -> Result<u32, String> {
    as_u64(v).and_then(|x| u32::try_from(x).map_err(|_| format!("{x} is too large")))
}

fn as_f64(v: &Value) -> Result<f64, String> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(format!("expected a number, got {}", v.type_str())),
    }
}

fn as_bool(v: &Value) -> Result<bool, String> {
    v.as_bool()
        .ok_or_else(|| format!("expected a boolean, got {}", v.type_str()))
}

fn as_str(v: &Value) -> Result<&str, String> {
    v.as_str()
        .ok_or_else(|| format!("expected a string, got {}", v.type_str()))
}

fn parsed<T: FromStr<Err = String>>(v: &Value) -> Result<T, String> {
    as_str(v)?.parse()
}

fn as_pair(v: &Value) -> Result<(u64, u64), String> {
    match v {
        Value::Array(a) if a.len() == 2 => Ok((as_u64(&a[0])?, as_u64(&a[1])?)),
        _ => Err("expected a two-element integer array".into()),
    }
}

fn as_complexity(v: &Value) -> Result<(u32, u32), String> {
    match v {
        Value::Integer(_) => as_u32(v).map(|c| (c, c)),
        Value::Array(a) if a.len() == 2 => Ok((as_u32(&a[0])?, as_u32(&a[1])?)),
        _ => Err("expected an integer or [min, max]".into()),
    }
}

fn as_trusted_count(v: &Value) -> Result<DgdsTrustedCount, String> {
    match as_str(v)? {
        "total_untrusted" => Ok(DgdsTrustedCount::TotalUntrusted),
        "additional_untrusted" => Ok(DgdsTrustedCount::AdditionalUntrusted),
        other => Err(format!(
            "unknown value `{other}` (expected total_untrusted|additional_untrusted)"
        )),
    }
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigError::Invalid(vec![format!("syntax: {}", e.message())])
    })?;
    let mut r = Reader { errors: Vec::new() };
    let d = ScenarioConfig::default();

    r.check_keys(
        &root,
        "",
        &[
            "name",
            "mode",
            "strategy",
            "seed",
            "horizon_ticks",
            "agents",
            "work",
            "faults",
            "params",
            "limits",
        ],
    );
    let name = r.get(&root, "", "name", d.name.clone(), |v| {
        as_str(v).map(String::from)
    });
    let mode = r.get(&root, "", "mode", d.mode, parsed);
    let strategy = r.get(&root, "", "strategy", d.strategy, parsed);
    let seed = r.get(&root, "", "seed", d.seed, as_u64);
    if !root.contains_key("horizon_ticks") {
        r.errors.push("horizon_ticks: required".into());
    }
    let horizon_ticks = r.get(&root, "", "horizon_ticks", 0, as_u64);

    let mut agents = Vec::new();
    for (i, t) in r.tables(&root, "agents").into_iter().enumerate() {
        let sec = format!("agents[{i}]");
        r.check_keys(t, &sec, &["count", "profile", "speed", "churn"]);
        let profile = r.get(t, &sec, "profile", Profile::Reliable, parsed);
        let churn = r.get(t, &sec, "churn", None, |v| as_pair(v).map(Some));
        agents.push(AgentGroup {
            count: r.get(t, &sec, "count", 1, as_u32),
            profile,
            speed: r.get(t, &sec, "speed", 1, as_u32),
            churn: churn.or((profile == Profile::Churner).then_some(DEFAULT_CHURN)),
        });
    }

    let mut work = d.work.clone();
    if let Some(t) = r.table(&root, "work") {
        r.check_keys(
            t,
            "work",
            &["wu_count", "complexity", "base_credit", "servers"],
        );
        work = WorkConfig {
            wu_count: r.get(t, "work", "wu_count", work.wu_count, as_u32),
            complexity: r.get(t, "work", "complexity", work.complexity, as_complexity),
            base_credit: r.get(t, "work", "base_credit", work.base_credit, as_u64),
            servers: r.get(t, "work", "servers", work.servers, as_u32),
        };
    }

    let mut faults = Vec::new();
    for (i, t) in r.tables(&root, "faults").into_iter().enumerate() {
        let sec = format!("faults[{i}]");
        r.check_keys(t, &sec, &["tick", "entity", "action"]);
        for key in ["tick", "entity", "action"] {
            if !t.contains_key(key) {
                r.errors.push(format!("{sec}.{key}: required"));
            }
        }
        let tick = r.get(t, &sec, "tick", 0, as_u64);
        let entity = r.get(t, &sec, "entity", None, |v| parsed(v).map(Some));
        let action = r.get(t, &sec, "action", None, |v| match as_str(v)? {
            "down" => Ok(Some(FaultAction::Down)),
            "up" => Ok(Some(FaultAction::Up)),
            other => Err(format!("unknown action `{other}` (expected down|up)")),
        });
        if let (Some(entity), Some(action)) = (entity, action) {
            faults.push(FaultSpec {
                tick,
                entity,
                action,
            });
        }
    }

    let mut params = d.params.clone();
    if let Some(t) = r.table(&root, "params") {
        let s = "params";
        r.check_keys(
            t,
            s,
            &[
                "window",
                "allow_short_groups",
                "dgds_trusted_count",
                "random_replication",
                "timeout_ticks",
                "deadline_factor",
                "max_requeues",
                "formation",
                "min_size",
                "max_size",
                "join_threshold",
                "evict_threshold",
                "drop_delta",
                "dissolve_fraction",
                "election_delay",
                "formation_interval",
            ],
        );
        let p = params.clone();
        params = Params {
            window: r.get(t, s, "window", p.window, |v| as_u64(v).map(|x| x as usize)),
            allow_short_groups: r.get(t, s, "allow_short_groups", p.allow_short_groups, as_bool),
            dgds_trusted_count: r.get(
                t,
                s,
                "dgds_trusted_count",
                p.dgds_trusted_count,
                as_trusted_count,
            ),
            random_replication: r.get(t, s, "random_replication", p.random_replication, as_f64),
            timeout_ticks: r.get(t, s, "timeout_ticks", p.timeout_ticks, as_u64),
            deadline_factor: r.get(t, s, "deadline_factor", p.deadline_factor, as_u64),
            max_requeues: r.get(t, s, "max_requeues", p.max_requeues, |v| {
                as_u32(v).map(Some)
            }),
            formation: r.get(t, s, "formation", p.formation, as_bool),
            min_size: r.get(t, s, "min_size", p.min_size, |v| {
                as_u64(v).map(|x| x as usize)
            }),
            max_size: r.get(t, s, "max_size", p.max_size, |v| {
                as_u64(v).map(|x| x as usize)
            }),
            join_threshold: r.get(t, s, "join_threshold", p.join_threshold, as_f64),
            evict_threshold: r.get(t, s, "evict_threshold", p.evict_threshold, as_f64),
            drop_delta: r.get(t, s, "drop_delta", p.drop_delta, as_f64),
            dissolve_fraction: r.get(t, s, "dissolve_fraction", p.dissolve_fraction, as_f64),
            election_delay: r.get(t, s, "election_delay", p.election_delay, as_u64),
            formation_interval: r.get(t, s, "formation_interval", p.formation_interval, as_u64),
        };
    }

    let mut limits = d.limits;
    if let Some(t) = r.table(&root, "limits") {
        r.check_keys(t, "limits", &["lo", "hi"]);
        limits = Limits {
            lo: r.get(t, "limits", "lo", limits.lo, as_f64),
            hi: r.get(t, "limits", "hi", limits.hi, as_f64),
        };
    }

    let cfg = ScenarioConfig {
        name,
        mode,
        strategy,
        seed,
        horizon_ticks,
        agents,
        work,
        faults,
        params,
        limits,
    };
    let mut errors = r.errors;
    let mut semantic = Vec::new();
    cfg.collect_errors(&mut semantic);
    let horizon_missing = !root.contains_key("horizon_ticks");
    errors.extend(
        semantic
            .into_iter()
            .filter(|e| !(horizon_missing && e.starts_with("horizon_ticks"))),
    );
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon_ticks = 10

[[agents]]
count = 1

[work]
wu_count = 1
"#;

    #[test]
    fn minimal_file_fills_defaults() {
        let cfg = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(cfg.mode, Mode::Trust);
        assert_eq!(cfg.strategy, Strategy::Drds);
        assert_eq!(cfg.agent_count(), 1);
        assert_eq!(cfg.agents[0].profile, Profile::Reliable);
        assert_eq!(cfg.agents[0].speed, 1);
        assert_eq!(cfg.work.wu_count, 1);
        assert_eq!(cfg.params, Params::default());
        assert_eq!(cfg.limits, Limits { lo: 1.5, hi: 5.0 });
    }

    #[test]
    fn dangling_fault_is_named() {
        let text =
            format!("{MINIMAL}\n[[faults]]\ntick = 5\nentity = \"server:3\"\naction = \"down\"\n");
        let err = parse_scenario_str(&text).unwrap_err();
        let msgs = err.messages();
        assert_eq!(msgs.len(), 1);
        assert!(msgs[0].contains("server:3"), "{msgs:?}");
    }

    #[test]
    fn all_errors_reported() {
        let text = "horizon_ticks = 0\ncolour = \"red\"\n[[agents]]\ncount = 1\n";
        let msgs = parse_scenario_str(text).unwrap_err().messages();
        assert_eq!(msgs.len(), 2, "{msgs:?}");
        assert!(msgs.iter().any(|m| m.starts_with("colour: unknown key")));
        assert!(msgs.iter().any(|m| m.starts_with("horizon_ticks")));
    }

    #[test]
    fn unknown_nested_keys_and_bad_types() {
        let text = r#"
horizon_ticks = 5
strategy = "best"
[[agents]]
count = "many"
speeed = 2
[params]
min_size = 1
"#;
        let msgs = parse_scenario_str(text).unwrap_err().messages();
        assert!(msgs.iter().any(|m| m.contains("strategy")));
        assert!(msgs.iter().any(|m| m.contains("agents[0].count")));
        assert!(msgs
            .iter()
            .any(|m| m.contains("agents[0].speeed: unknown key")));
        assert!(msgs.iter().any(|m| m.contains("min_size")));
    }

    #[test]
    fn missing_horizon_is_an_error() {
        let msgs = parse_scenario_str("[[agents]]\n").unwrap_err().messages();
        assert_eq!(msgs, vec!["horizon_ticks: required".to_string()]);
    }

    #[test]
    fn churner_gets_default_cycle() {
        let cfg =
            parse_scenario_str("horizon_ticks = 3\n[[agents]]\nprofile = \"churner\"\n").unwrap();
        assert_eq!(cfg.agents[0].churn, Some(DEFAULT_CHURN));
    }

    #[test]
    fn emitted_config_parses_back() {
        let mut cfg = parse_scenario_str(MINIMAL).unwrap();
        cfg.faults.push(FaultSpec {
            tick: 3,
            entity: Entity::Agent(0),
            action: FaultAction::Down,
        });
        cfg.params.max_requeues = Some(4);
        cfg.agents.push(AgentGroup {
            count: 2,
            profile: Profile::Churner,
            speed: 3,
            churn: Some((7, 9)),
        });
        let text = cfg.to_toml();
        assert_eq!(parse_scenario_str(&text).unwrap(), cfg);
    }
}
