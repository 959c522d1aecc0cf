//! Hash-chained credit ledger.
//!
//! Credits for a validated work unit are split evenly (in integer
//! millicredits) among the agents whose result matched the consensus, and
//! committed as one block. The chain has a single writer, so there is no
//! consensus protocol; integrity comes from each block hashing its
//! predecessor.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ids::{AgentId, Tick, WorkUnitId};

/// Name of the block digest, recorded alongside run outputs.
pub const HASH_ALGORITHM: &str = "sha256";

pub type Digest32 = [u8; 32];
pub type Millicredits = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("no participants to share credits with")]
    NoParticipants,
    #[error("allocations for {wu} sum to {actual}, expected {expected}")]
    SumMismatch {
        wu: WorkUnitId,
        expected: Millicredits,
        actual: Millicredits,
    },
    #[error("ledger fails verification at block {0}")]
    Corrupt(usize),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Splits `total` evenly; the remainder goes one millicredit each to the
/// participants with the smallest ids.
pub fn split_credits(
    total: Millicredits,
    participants: &[AgentId],
) -> Result<Vec<(AgentId, Millicredits)>, LedgerError> {
    let mut ids = participants.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(LedgerError::NoParticipants);
    }
    let n = ids.len() as u64;
    let base = total / n;
    let remainder = (total % n) as usize;
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, a)| (a, base + u64::from(i < remainder)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CreditBlock {
    pub index: u64,
    pub prev_hash: Digest32,
    pub wu: WorkUnitId,
    pub allocations: Vec<(AgentId, Millicredits)>,
    pub tick: Tick,
    pub hash: Digest32,
}

impl CreditBlock {
    /// Digest over index, predecessor, work unit, allocations and tick.
    pub fn compute_hash(&self) -> Digest32 {
        let mut h = Sha256::new();
        h.update(self.index.to_le_bytes());
        h.update(self.prev_hash);
        h.update(self.wu.0.to_le_bytes());
        h.update((self.allocations.len() as u64).to_le_bytes());
        for (agent, mc) in &self.allocations {
            h.update(agent.0.to_le_bytes());
            h.update(mc.to_le_bytes());
        }
        h.update(self.tick.to_le_bytes());
        h.finalize().into()
    }

    pub fn total(&self) -> Millicredits {
        self.allocations.iter().map(|(_, mc)| mc).sum()
    }

    /// One export line: `index prev_hash wu allocations tick hash`.
    pub fn to_line(&self) -> String {
        let mut allocs = String::new();
        for (i, (agent, mc)) in self.allocations.iter().enumerate() {
            if i > 0 {
                allocs.push(',');
            }
            let _ = write!(allocs, "{}:{}", agent.0, mc);
        }
        if allocs.is_empty() {
            allocs.push('-');
        }
        format!(
            "{} {} {} {} {} {}",
            self.index,
            hex::encode(self.prev_hash),
            self.wu.0,
            allocs,
            self.tick,
            hex::encode(self.hash)
        )
    }
}

impl FromStr for CreditBlock {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split(' ').collect();
        let [index, prev, wu, allocs, tick, hash] = fields[..] else {
            return Err(format!("expected 6 fields, found {}", fields.len()));
        };
        let digest = |s: &str| -> Result<Digest32, String> {
            let bytes = hex::decode(s).map_err(|e| format!("bad digest `{s}`: {e}"))?;
            bytes
                .try_into()
                .map_err(|_| format!("digest `{s}` is not 32 bytes"))
        };
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| format!("bad number `{s}`: {e}"))
        };
        let mut allocations = Vec::new();
        if allocs != "-" {
            for pair in allocs.split(',') {
                let (agent, mc) = pair
                    .split_once(':')
                    .ok_or_else(|| format!("bad allocation `{pair}`"))?;
                let agent = agent
                    .parse::<u32>()
                    .map_err(|e| format!("bad agent `{agent}`: {e}"))?;
                allocations.push((AgentId(agent), num(mc)?));
            }
        }
        Ok(CreditBlock {
            index: num(index)?,
            prev_hash: digest(prev)?,
            wu: WorkUnitId(
                wu.parse::<u32>()
                    .map_err(|e| format!("bad work unit `{wu}`: {e}"))?,
            ),
            allocations,
            tick: num(tick)?,
            hash: digest(hash)?,
        })
    }
}

/// Append-only chain of credit blocks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    blocks: Vec<CreditBlock>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> &[CreditBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn head_hash(&self) -> Digest32 {
        self.blocks.last().map(|b| b.hash).unwrap_or([0; 32])
    }

    /// Commits the allocations for `wu`, which must sum to `expected_total`.
    pub fn append_block(
        &mut self,
        wu: WorkUnitId,
        expected_total: Millicredits,
        allocations: Vec<(AgentId, Millicredits)>,
        tick: Tick,
    ) -> Result<&CreditBlock, LedgerError> {
        let actual: Millicredits = allocations.iter().map(|(_, mc)| mc).sum();
        if actual != expected_total {
            return Err(LedgerError::SumMismatch {
                wu,
                expected: expected_total,
                actual,
            });
        }
        let mut block = CreditBlock {
            index: self.blocks.len() as u64,
            prev_hash: self.head_hash(),
            wu,
            allocations,
            tick,
            hash: [0; 32],
        };
        block.hash = block.compute_hash();
        self.blocks.push(block);
        Ok(self.blocks.last().expect("just pushed"))
    }

    /// Returns the lowest index whose hash, index or link is wrong.
    pub fn verify_chain(&self) -> Result<(), usize> {
        let mut prev = [0u8; 32];
        for (i, b) in self.blocks.iter().enumerate() {
            if b.index != i as u64 || b.prev_hash != prev || b.compute_hash() != b.hash {
                return Err(i);
            }
            prev = b.hash;
        }
        Ok(())
    }

    pub fn balance(&self, agent: AgentId) -> Result<Millicredits, LedgerError> {
        self.verify_chain().map_err(LedgerError::Corrupt)?;
        Ok(self
            .blocks
            .iter()
            .flat_map(|b| &b.allocations)
            .filter(|(a, _)| *a == agent)
            .map(|(_, mc)| mc)
            .sum())
    }

    /// Balances of every agent that ever received credit.
    pub fn balances(&self) -> Result<BTreeMap<AgentId, Millicredits>, LedgerError> {
        self.verify_chain().map_err(LedgerError::Corrupt)?;
        let mut out = BTreeMap::new();
        for (a, mc) in self.blocks.iter().flat_map(|b| &b.allocations) {
            *out.entry(*a).or_insert(0) += mc;
        }
        Ok(out)
    }

    pub fn total_committed(&self) -> Millicredits {
        self.blocks.iter().map(CreditBlock::total).sum()
    }

    /// Line-delimited export, one block per line.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(&b.to_line());
            out.push('\n');
        }
        out
    }

    /// Parses an export without verifying it; call [`Ledger::verify_chain`].
    pub fn import(text: &str) -> Result<Self, LedgerError> {
        let blocks = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.parse::<CreditBlock>()
                    .map_err(|reason| LedgerError::Parse {
                        line: i + 1,
                        reason,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { blocks })
    }

    /// Mutable access for audit tests that simulate tampering.
    #[doc(hidden)]
    pub fn blocks_mut(&mut self) -> &mut [CreditBlock] {
        &mut self.blocks
    }
}
