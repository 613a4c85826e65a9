// Copyright 2026 The rollout-sprt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//! Properties of the stopping rule and the allocation loop.

use proptest::prelude::*;
use rollout_sprt_core::allocate::{allocate, batch_allocate};
use rollout_sprt_core::math::argmax;
use rollout_sprt_core::rng::StreamPurpose;
use rollout_sprt_core::synth::{gen_instances, CategoricalVoteSource, P0Distribution};
use rollout_sprt_core::{
    AnswerId, ErrorBudget, P0Mode, SprtStopper, StopKind, StopperConfig, VoteTally,
};

fn config_strategy() -> impl Strategy<Value = StopperConfig> {
    (
        1usize..20,
        0usize..40,
        1usize..6,
        prop_oneof![Just(0.01), Just(0.05), Just(0.1)],
        prop_oneof![
            Just(P0Mode::Adaptive),
            (0.3f64..0.95).prop_map(P0Mode::Fixed)
        ],
    )
        .prop_map(|(n_min, extra, streak_k, ab, p0_mode)| StopperConfig {
            budget: ErrorBudget::new(ab, ab).unwrap(),
            n_min,
            m_max: n_min + extra,
            streak_k,
            p0_mode,
            ..StopperConfig::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn stopping_rule_invariants(
        config in config_strategy(),
        m in 2usize..6,
        raw_votes in prop::collection::vec(0usize..6, 60..100),
    ) {
        let votes: Vec<AnswerId> = raw_votes.iter().map(|&v| AnswerId(v % m)).collect();
        let mut stopper = SprtStopper::new(config, m).unwrap();
        let mut tally = VoteTally::new(m).unwrap();
        let mut gaps = Vec::new();
        let mut tau = None;
        for (i, &v) in votes.iter().enumerate() {
            let t = i + 1;
            let d = stopper.step(v).unwrap();
            tally.ingest(v).unwrap();
            if t >= config.n_min {
                gaps.push(tally.top_two().unwrap().gap as i64);
            }
            if t < config.n_min {
                prop_assert_eq!(d.kind(), StopKind::Continue);
            }
            if d.is_terminal() {
                tau = Some(t);
                let cal = stopper.calibration().unwrap();
                match d.kind() {
                    StopKind::StopLeader => {
                        prop_assert!(gaps.len() >= config.streak_k);
                        let tail = &gaps[gaps.len() - config.streak_k..];
                        prop_assert!(tail.iter().all(|&g| g >= cal.thresholds.delta_a));
                        prop_assert_eq!(d.chosen(), Some(tally.top_two().unwrap().leader));
                        let post = cal.model.posterior(&tally).unwrap();
                        prop_assert_eq!(argmax(&post), d.chosen().unwrap().index());
                    }
                    StopKind::BudgetExhausted => {
                        prop_assert_eq!(t, config.m_max);
                        prop_assert_eq!(d.chosen(), Some(tally.top_two().unwrap().leader));
                    }
                    StopKind::StopRunnerUp => prop_assert!(false, "lower boundary is unreachable"),
                    StopKind::Continue => unreachable!(),
                }
                break;
            }
        }
        let tau = tau.expect("m_max < vote count, so a terminal decision must occur");
        prop_assert!(tau <= config.m_max);
        prop_assert!(tau >= config.n_min);
        prop_assert_eq!(stopper.tally().total() as usize, tau);
        prop_assert_eq!(stopper.finalize().unwrap(), stopper.last_decision().chosen().unwrap());
    }
}

#[test]
fn allocation_respects_budget_and_is_deterministic() {
    let config = StopperConfig::default();
    let insts = gen_instances(
        1000,
        4,
        &P0Distribution::Uniform { lo: 0.3, hi: 0.95 },
        1,
        77,
    )
    .unwrap();
    let run = || {
        batch_allocate(
            insts
                .iter()
                .map(|i| CategoricalVoteSource::for_purpose(i, 77, StreamPurpose::AdaptiveArm)),
            &config,
        )
    };
    let a = run();
    let sequential: Vec<_> = insts
        .iter()
        .map(|i| {
            let mut s = CategoricalVoteSource::for_purpose(i, 77, StreamPurpose::AdaptiveArm);
            allocate(&mut s, &config)
        })
        .collect();
    assert_eq!(a, run());
    assert_eq!(a, sequential);
    for r in a {
        let r = r.unwrap();
        assert!(r.tau >= config.n_min && r.tau <= config.m_max);
        assert_eq!(r.votes.len(), r.tau);
        assert_eq!(r.retained, (0..config.n_min).collect::<Vec<_>>());
        assert_eq!(r.total_cost, r.tau as u64);
        if r.decision_kind == StopKind::StopLeader {
            assert_eq!(argmax(&r.posterior_at_stop), r.pseudo_label.index());
        }
    }
}

#[test]
fn adaptive_matches_fixed_budget_accuracy_on_average() {
    // p0 = 0.8, m = 4, defaults, 10k instances
    let config = StopperConfig::default();
    let insts = gen_instances(10_000, 4, &P0Distribution::Constant(0.8), 1, 2026).unwrap();
    let mut adaptive_correct = 0usize;
    let mut fixed_correct = 0usize;
    let mut tau_sum = 0usize;
    for inst in &insts {
        let mut s = CategoricalVoteSource::for_purpose(inst, 2026, StreamPurpose::AdaptiveArm);
        let r = allocate(&mut s, &config).unwrap();
        tau_sum += r.tau;
        adaptive_correct += usize::from(r.pseudo_label == inst.true_answer);

        let mut f = CategoricalVoteSource::for_purpose(inst, 2026, StreamPurpose::FixedArm);
        let mut tally = VoteTally::new(4).unwrap();
        for _ in 0..64 {
            use rollout_sprt_core::VoteSource;
            tally.ingest(f.draw().unwrap().unwrap().answer).unwrap();
        }
        fixed_correct += usize::from(tally.top_two().unwrap().leader == inst.true_answer);
    }
    let mean_tau = tau_sum as f64 / insts.len() as f64;
    let acc_a = adaptive_correct as f64 / insts.len() as f64;
    let acc_f = fixed_correct as f64 / insts.len() as f64;
    assert!(mean_tau < 64.0, "mean tau {mean_tau}");
    assert!(acc_a >= acc_f - 0.01, "adaptive {acc_a} fixed {acc_f}");
}
