//! Identifier newtypes shared by every subsystem.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// A volunteer machine (client in centralized mode, agent in trust mode).
    AgentId,
    "a"
);
id_type!(
    /// A work unit.
    WorkUnitId,
    "wu"
);
id_type!(
    /// An explicit trust community.
    CommunityId,
    "tc"
);
id_type!(
    /// A work server (centralized) or the work agent owning a project (trust mode).
    ServerId,
    "s"
);

/// Simulation time in whole ticks.
pub type Tick = u64;
