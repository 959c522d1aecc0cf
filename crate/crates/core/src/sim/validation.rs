//! Majority vote over a replica group.

use std::collections::BTreeMap;

use crate::ids::AgentId;
use crate::trust::RatingCause;

/// Terminal state of one replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemberOutcome {
    Result { token: u64, late: bool },
    Dropped,
    TimedOut,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Validated { token: u64, consensus: Vec<AgentId> },
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Judgement {
    pub verdict: Verdict,
    pub ratings: Vec<(AgentId, RatingCause)>,
}

/// Validates when a strict majority of *group members* returned the same
/// token, so silent replicas count against a result. Members missing from
/// `outcomes` are treated as timed out.
///
/// Without a majority nobody can tell right from wrong, so only the
/// non-responders are rated.
pub fn validate_replicas(
    members: &[AgentId],
    outcomes: &BTreeMap<AgentId, MemberOutcome>,
) -> Judgement {
    let outcome = |a: &AgentId| outcomes.get(a).copied().unwrap_or(MemberOutcome::TimedOut);
    let mut votes: BTreeMap<u64, Vec<AgentId>> = BTreeMap::new();
    for a in members {
        if let MemberOutcome::Result { token, .. } = outcome(a) {
            votes.entry(token).or_default().push(*a);
        }
    }
    let winner = votes
        .into_iter()
        .find(|(_, voters)| voters.len() * 2 > members.len());

    let mut ratings = Vec::with_capacity(members.len());
    for a in members {
        let cause = match (outcome(a), &winner) {
            (MemberOutcome::Dropped, _) => Some(RatingCause::DroppedWU),
            (MemberOutcome::TimedOut, _) => Some(RatingCause::TimedOut),
            (MemberOutcome::Result { token, late }, Some((won, _))) => Some(if token != *won {
                RatingCause::WrongResult
            } else if late {
                RatingCause::CorrectLate
            } else {
                RatingCause::CorrectOnTime
            }),
            (MemberOutcome::Result { .. }, None) => None,
        };
        if let Some(c) = cause {
            ratings.push((*a, c));
        }
    }
    let verdict = match winner {
        Some((token, consensus)) => Verdict::Validated { token, consensus },
        None => Verdict::Failed,
    };
    Judgement { verdict, ratings }
}
