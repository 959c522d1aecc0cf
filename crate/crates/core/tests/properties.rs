use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use tdgsim::community::check_log;
use tdgsim::distribution::Strategy as Dist;
use tdgsim::scenario::config::AgentGroup;
use tdgsim::scenario::{final_taus, run, Mode, Profile, ScenarioConfig};
use tdgsim::sim::EventKind;

fn profile() -> impl Strategy<Value = Profile> {
    prop::sample::select(Profile::ALL.to_vec())
}

fn group() -> impl Strategy<Value = AgentGroup> {
    (
        1u32..8,
        profile(),
        1u32..4,
        prop::option::of((5u64..40, 1u64..20)),
    )
        .prop_map(|(count, profile, speed, churn)| AgentGroup {
            count,
            profile,
            speed,
            churn: if profile == Profile::Churner {
                churn.or(Some((30, 10)))
            } else {
                churn
            },
        })
}

prop_compose! {
    fn scenario()(
        trust in any::<bool>(),
        strategy in prop::sample::select(vec![Dist::Drds, Dist::Dods, Dist::Dgds, Dist::Random]),
        seed in any::<u64>(),
        horizon in 1u64..160,
        agents in prop::collection::vec(group(), 1..5),
        wu_count in 0u32..120,
        cmax in 1u32..6,
        servers in 1u32..3,
        formation in any::<bool>(),
        short in any::<bool>(),
    ) -> ScenarioConfig {
        let mut cfg = ScenarioConfig {
            name: "prop".into(),
            mode: if trust { Mode::Trust } else { Mode::Centralized },
            strategy,
            seed,
            horizon_ticks: horizon,
            agents,
            ..ScenarioConfig::default()
        };
        cfg.work.wu_count = wu_count;
        cfg.work.complexity = (1, cmax);
        cfg.work.servers = servers.min(cfg.agent_count());
        cfg.params.formation = formation;
        cfg.params.allow_short_groups = short;
        cfg.params.min_size = 2;
        cfg.params.formation_interval = 5;
        cfg
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn runs_are_reproducible_and_self_consistent(cfg in scenario()) {
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        prop_assert_eq!(&a.events, &b.events);
        prop_assert_eq!(&a.ledger, &b.ledger);

        let balances: u64 = a.ledger.balances().unwrap().values().sum();
        prop_assert_eq!(balances, a.report.credit_committed);
        prop_assert!(a.report.validated <= a.report.issued);
        prop_assert!(a.report.validated <= u64::from(cfg.work.wu_count));
        prop_assert_eq!(a.report.series.len() as u64, cfg.horizon_ticks);
    }

    #[test]
    fn groups_are_distinct_and_taus_bounded(cfg in scenario()) {
        let out = run(&cfg).unwrap();
        let n = cfg.agent_count() as usize;
        let mut logs: BTreeMap<_, Vec<_>> = BTreeMap::new();
        let mut last = (0, 0);
        for e in &out.events {
            prop_assert!((e.tick, e.seq) > last || last == (0, 0));
            last = (e.tick, e.seq);
            match &e.event {
                EventKind::WuIssued { members, .. } => {
                    let distinct: BTreeSet<_> = members.iter().collect();
                    prop_assert_eq!(distinct.len(), members.len());
                    prop_assert!(members.iter().all(|a| a.index() < n));
                }
                EventKind::RatingIssued { rater, subject, tau, .. } => {
                    prop_assert_ne!(rater, subject);
                    prop_assert!((0.0..=1.0).contains(tau));
                }
                EventKind::WuValidated { consensus, group_size, .. } => {
                    prop_assert!(consensus * 2 > *group_size);
                }
                EventKind::TcEvent(m) => logs.entry(m.community).or_default().push(*m),
                _ => {}
            }
        }
        for log in logs.values() {
            prop_assert!(check_log(log).is_ok(), "{:?}", check_log(log));
        }
        prop_assert!(final_taus(n, &out.events).iter().all(|t| (0.0..=1.0).contains(t)));
    }
}
