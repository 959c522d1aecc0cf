//! Ratings, reputation aggregation, trust classification and the
//! reputation-driven replication factor.
//!
//! A rating is a single judgment in `[-1, 1]` issued by a work submitter
//! about a worker. An agent's reputation `tau` is the affine-scaled mean of
//! its most recent ratings, mapped into `[0, 1]` with `0.5` as the neutral
//! value. Reputation drives the minimum replication factor: the number of
//! *other* agents that must co-compute a work unit handed to this agent.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, Tick};

/// Reputation of an agent nobody has rated yet.
pub const NEUTRAL_TAU: f64 = 0.5;
/// `tau` strictly above this is [`TrustClass::Trusted`].
pub const TRUSTED_ABOVE: f64 = 0.7;
/// `tau` at or below this is [`TrustClass::Untrusted`].
pub const UNTRUSTED_AT_MOST: f64 = 0.4;
/// Default sliding window length.
pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrustError {
    #[error("rating value {0} outside [-1, 1]")]
    RatingOutOfRange(f64),
    #[error("rating for {rating} recorded into profile of {profile}")]
    SubjectMismatch { profile: AgentId, rating: AgentId },
    #[error("reputation {0} outside [0, 1]")]
    TauOutOfRange(f64),
    #[error("invalid replication limits [{lo}, {hi}]: need 1 <= lo <= hi")]
    InvalidLimits { lo: f64, hi: f64 },
    #[error("cannot round negative value {0}")]
    NegativeValue(f64),
    #[error("window length must be at least 1")]
    EmptyWindow,
}

/// What happened in the interaction being rated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RatingCause {
    CorrectOnTime,
    CorrectLate,
    WrongResult,
    RejectedWU,
    DroppedWU,
    TimedOut,
}

impl RatingCause {
    pub const ALL: [RatingCause; 6] = [
        RatingCause::CorrectOnTime,
        RatingCause::CorrectLate,
        RatingCause::RejectedWU,
        RatingCause::DroppedWU,
        RatingCause::TimedOut,
        RatingCause::WrongResult,
    ];

    /// Fixed rating value for the cause, monotone in the harm done.
    pub fn value(self) -> f64 {
        match self {
            RatingCause::CorrectOnTime => 1.0,
            RatingCause::CorrectLate => 0.5,
            RatingCause::RejectedWU => -0.25,
            RatingCause::DroppedWU => -0.75,
            RatingCause::TimedOut => -0.75,
            RatingCause::WrongResult => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub rater: AgentId,
    pub subject: AgentId,
    pub value: f64,
    pub tick: Tick,
    pub cause: RatingCause,
}

impl Rating {
    /// Builds a rating whose value comes from the cause table.
    pub fn new(rater: AgentId, subject: AgentId, cause: RatingCause, tick: Tick) -> Self {
        Self {
            rater,
            subject,
            value: cause.value(),
            tick,
            cause,
        }
    }
}

/// Affine mean of the rating values: `(1 + mean) / 2`, or neutral when empty.
pub fn aggregate_reputation<'a, I>(window: I) -> f64
where
    I: IntoIterator<Item = &'a Rating>,
{
    let (sum, n) = window
        .into_iter()
        .fold((0.0_f64, 0_usize), |(s, n), r| (s + r.value, n + 1));
    if n == 0 {
        return NEUTRAL_TAU;
    }
    ((1.0 + sum / n as f64) / 2.0).clamp(0.0, 1.0)
}

/// An agent's recent ratings and the cached aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReputationProfile {
    subject: AgentId,
    capacity: usize,
    window: VecDeque<Rating>,
    tau: f64,
}

impl ReputationProfile {
    pub fn new(subject: AgentId, capacity: usize) -> Result<Self, TrustError> {
        if capacity == 0 {
            return Err(TrustError::EmptyWindow);
        }
        Ok(Self {
            subject,
            capacity,
            window: VecDeque::with_capacity(capacity),
            tau: NEUTRAL_TAU,
        })
    }

    pub fn subject(&self) -> AgentId {
        self.subject
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &Rating> {
        self.window.iter()
    }

    /// Appends a rating, evicting the oldest one when the window is full.
    pub fn record_rating(&mut self, rating: Rating) -> Result<(), TrustError> {
        if rating.subject != self.subject {
            return Err(TrustError::SubjectMismatch {
                profile: self.subject,
                rating: rating.subject,
            });
        }
        if !(-1.0..=1.0).contains(&rating.value) {
            return Err(TrustError::RatingOutOfRange(rating.value));
        }
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(rating);
        self.tau = aggregate_reputation(&self.window);
        Ok(())
    }

    pub fn classify(&self) -> TrustClass {
        TrustClass::from_tau_unchecked(self.tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrustClass {
    Trusted,
    Undecided,
    Untrusted,
}

impl TrustClass {
    fn from_tau_unchecked(tau: f64) -> Self {
        if tau > TRUSTED_ABOVE {
            TrustClass::Trusted
        } else if tau <= UNTRUSTED_AT_MOST {
            TrustClass::Untrusted
        } else {
            TrustClass::Undecided
        }
    }
}

pub fn classify(tau: f64) -> Result<TrustClass, TrustError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(TrustError::TauOutOfRange(tau));
    }
    Ok(TrustClass::from_tau_unchecked(tau))
}

/// Bounds of the replication factor interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationLimits {
    lo: f64,
    hi: f64,
}

impl Default for ReplicationLimits {
    fn default() -> Self {
        Self { lo: 1.5, hi: 5.0 }
    }
}

impl ReplicationLimits {
    pub fn new(lo: f64, hi: f64) -> Result<Self, TrustError> {
        // NaN fails both comparisons.
        if !(lo >= 1.0 && hi >= lo && hi.is_finite()) {
            return Err(TrustError::InvalidLimits { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Linear interpolation from `hi` at `tau = 0` down to `lo` at `tau = 1`.
pub fn raw_replication_factor(tau: f64, limits: ReplicationLimits) -> Result<f64, TrustError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(TrustError::TauOutOfRange(tau));
    }
    let ReplicationLimits { lo, hi } = limits;
    ReplicationLimits::new(lo, hi)?;
    Ok((hi - tau * (hi - lo)).clamp(lo, hi))
}

/// Roulette-wheel rounding: `floor(x)` with probability `1 - frac(x)`,
/// `ceil(x)` otherwise. Always consumes exactly one draw.
pub fn roulette_round<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<u32, TrustError> {
    if !x.is_finite() || x < 0.0 {
        return Err(TrustError::NegativeValue(x));
    }
    let u: f64 = rng.random();
    let floor = x.floor();
    let frac = x - floor;
    Ok(floor as u32 + u32::from(u < frac))
}

/// Number of other agents that must co-compute a work unit given to the
/// profile's subject.
pub fn effective_f_min<R: Rng + ?Sized>(
    profile: &ReputationProfile,
    limits: ReplicationLimits,
    rng: &mut R,
) -> u32 {
    f_min_for_tau(profile.tau(), limits, rng)
}

pub(crate) fn f_min_for_tau<R: Rng + ?Sized>(
    tau: f64,
    limits: ReplicationLimits,
    rng: &mut R,
) -> u32 {
    let raw = raw_replication_factor(tau.clamp(0.0, 1.0), limits)
        .expect("limits are validated on construction");
    roulette_round(raw, rng).expect("raw factor is at least 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rating(value: f64) -> Rating {
        Rating {
            rater: AgentId(99),
            subject: AgentId(1),
            value,
            tick: 0,
            cause: RatingCause::CorrectOnTime,
        }
    }

    #[test]
    fn empty_profile_single_positive_rating() {
        let mut p = ReputationProfile::new(AgentId(1), 50).unwrap();
        assert_eq!(p.tau(), 0.5);
        p.record_rating(rating(1.0)).unwrap();
        assert_eq!(p.window().len(), 1);
        assert_eq!(p.tau(), 1.0);
    }

    #[test]
    fn full_window_evicts_oldest() {
        let mut p = ReputationProfile::new(AgentId(1), 3).unwrap();
        for _ in 0..3 {
            p.record_rating(rating(1.0)).unwrap();
        }
        p.record_rating(rating(-1.0)).unwrap();
        let values: Vec<f64> = p.window().map(|r| r.value).collect();
        assert_eq!(values, vec![1.0, 1.0, -1.0]);
        assert!((p.tau() - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn record_rating_rejects_bad_input() {
        let mut p = ReputationProfile::new(AgentId(1), 3).unwrap();
        assert_eq!(
            p.record_rating(rating(1.5)),
            Err(TrustError::RatingOutOfRange(1.5))
        );
        let mut other = rating(1.0);
        other.subject = AgentId(2);
        assert!(matches!(
            p.record_rating(other),
            Err(TrustError::SubjectMismatch { .. })
        ));
        assert_eq!(p.window().len(), 0);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_reputation(&[]), 0.5);
        assert_eq!(aggregate_reputation(&[rating(-1.0), rating(1.0)]), 0.5);
        let tau = aggregate_reputation(&[rating(1.0), rating(1.0), rating(0.0)]);
        assert!((tau - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn cause_table_is_monotone_in_harm() {
        let values: Vec<f64> = RatingCause::ALL.iter().map(|c| c.value()).collect();
        assert!(values.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(RatingCause::TimedOut.value(), -0.75);
    }

    #[test]
    fn classify_boundaries() {
        assert_eq!(classify(0.8), Ok(TrustClass::Trusted));
        assert_eq!(classify(0.4), Ok(TrustClass::Untrusted));
        assert_eq!(classify(0.5), Ok(TrustClass::Undecided));
        assert_eq!(classify(0.7), Ok(TrustClass::Undecided));
        assert_eq!(classify(0.0), Ok(TrustClass::Untrusted));
        assert!(classify(1.01).is_err());
        assert!(classify(f64::NAN).is_err());
    }

    #[test]
    fn replication_factor_endpoints() {
        let l = ReplicationLimits::default();
        assert_eq!(raw_replication_factor(1.0, l), Ok(1.5));
        assert_eq!(raw_replication_factor(0.0, l), Ok(5.0));
        assert_eq!(raw_replication_factor(0.5, l), Ok(3.25));
        assert!(ReplicationLimits::new(0.5, 2.0).is_err());
        assert!(ReplicationLimits::new(3.0, 2.0).is_err());
        assert!(raw_replication_factor(1.2, l).is_err());
    }

    #[test]
    fn roulette_integer_input_is_exact_and_consumes_one_draw() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(roulette_round(2.0, &mut a), Ok(2));
            let _: f64 = b.random();
        }
        assert_eq!(a.random::<u64>(), b.random::<u64>());
        assert!(roulette_round(-0.1, &mut a).is_err());
    }

    #[test]
    fn roulette_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| roulette_round(1.5, &mut rng).unwrap() as f64)
            .sum::<f64>()
            / n as f64;
        assert!((1.49..=1.51).contains(&mean), "mean {mean}");
        let fives = (0..n)
            .filter(|_| roulette_round(4.9, &mut rng).unwrap() == 5)
            .count() as f64
            / n as f64;
        assert!((0.89..=0.91).contains(&fives), "freq {fives}");
    }

    #[test]
    fn effective_f_min_examples() {
        let limits = ReplicationLimits::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = ReputationProfile::new(AgentId(1), 50).unwrap();
        let n = 100_000;
        let draws: Vec<u32> = (0..n)
            .map(|_| effective_f_min(&p, limits, &mut rng))
            .collect();
        assert!(draws.iter().all(|&d| d == 3 || d == 4));
        let mean = draws.iter().map(|&d| d as f64).sum::<f64>() / n as f64;
        assert!((mean - 3.25).abs() < 0.02);

        p.record_rating(rating(1.0)).unwrap();
        let draws: Vec<u32> = (0..n)
            .map(|_| effective_f_min(&p, limits, &mut rng))
            .collect();
        assert!(draws.iter().all(|&d| d == 1 || d == 2));
        let mean = draws.iter().map(|&d| d as f64).sum::<f64>() / n as f64;
        assert!((mean - 1.5).abs() < 0.02);

        let mut bad = ReputationProfile::new(AgentId(1), 50).unwrap();
        bad.record_rating(rating(-1.0)).unwrap();
        assert!((0..1000).all(|_| effective_f_min(&bad, limits, &mut rng) == 5));
    }

    proptest! {
        #[test]
        fn aggregate_in_range_and_monotone(
            values in prop::collection::vec(-1.0f64..=1.0, 1..60),
            idx in any::<prop::sample::Index>(),
            bump in 0.0f64..=2.0,
        ) {
            let window: Vec<Rating> = values.iter().map(|&v| rating(v)).collect();
            let tau = aggregate_reputation(&window);
            prop_assert!((0.0..=1.0).contains(&tau));
            let mut raised = window.clone();
            let i = idx.index(raised.len());
            raised[i].value = (raised[i].value + bump).min(1.0);
            prop_assert!(aggregate_reputation(&raised) >= tau);
        }

        #[test]
        fn replication_factor_decreasing_and_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let l = ReplicationLimits::default();
            let fa = raw_replication_factor(a, l).unwrap();
            let fb = raw_replication_factor(b, l).unwrap();
            prop_assert!((1.5..=5.0).contains(&fa));
            if a < b {
                prop_assert!(fa > fb);
            }
            if a <= UNTRUSTED_AT_MOST && b > UNTRUSTED_AT_MOST {
                prop_assert!(fa >= fb);
            }
        }

        #[test]
        fn replay_gives_same_tau(values in prop::collection::vec(-1.0f64..=1.0, 0..120), w in 1usize..20) {
            let mut a = ReputationProfile::new(AgentId(1), w).unwrap();
            let mut b = ReputationProfile::new(AgentId(1), w).unwrap();
            for &v in &values {
                a.record_rating(rating(v)).unwrap();
                b.record_rating(rating(v)).unwrap();
            }
            prop_assert_eq!(a.tau(), b.tau());
            prop_assert!(a.window().len() <= w);
        }
    }
}
