//! Simulation engine, event log and replica validation.

pub mod event;
pub mod validation;
mod world;

pub use event::{
    read_log, write_log, Endpoint, EventKind, LogHeader, RedistributeReason, SimEvent,
};
pub use validation::{validate_replicas, Judgement, MemberOutcome, Verdict};
pub use world::{
    Collection, Counters, SimError, WorkUnit, World, WuState, COLLUSION_MASK,
    SLOW_ACCEPT_PROBABILITY,
};
