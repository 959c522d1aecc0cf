//! Deterministic simulator of a volunteer desktop-computing grid.
//!
//! Two topologies share one engine: a centralized assignment/work-server
//! baseline and a trust-based grid where reputation drives replication,
//! replica groups are formed by pluggable distribution strategies, and
//! explicit trust communities with an elected manager take over work
//! distribution for their founder.

pub mod community;
pub mod distribution;
pub mod ids;
pub mod ledger;
pub mod scenario;
pub mod sim;
pub mod trust;

pub use ids::{AgentId, CommunityId, ServerId, Tick, WorkUnitId};
