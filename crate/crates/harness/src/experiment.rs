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
//! Experiment runners: fixed-budget vs adaptive comparison, closed-loop
//! test-time updates, and one-axis ablations.

use std::collections::HashMap;

use rayon::prelude::*;
use rollout_sprt_core::allocate::{allocate, retain_for_update, VoteSource};
use rollout_sprt_core::rng::{stream_rng, StreamPurpose};
use rollout_sprt_core::synth::{
    gen_instances, CategoricalVoteSource, PolicyVoteSource, SyntheticInstance,
};
use rollout_sprt_core::trace::TraceInstance;
use rollout_sprt_core::update::{pg_update, rewarded_samples, sft_update};
use rollout_sprt_core::{AnswerId, SoftmaxAnswerPolicy, StopperConfig, VoteTally};

use crate::config::{AblationAxis, Corpus, ExperimentConfig, Mode};
use crate::error::{HarnessError, Result};
use crate::report::{ExperimentReport, Row};
use crate::trace::{load_labels, load_trace};

/// A loaded corpus, in instance order.
#[derive(Debug, Clone)]
pub enum PreparedCorpus {
    Synthetic(Vec<SyntheticInstance>),
    Trace {
        instances: Vec<TraceInstance>,
        labels: HashMap<String, String>,
    },
}

impl PreparedCorpus {
    pub fn len(&self) -> usize {
        match self {
            Self::Synthetic(v) => v.len(),
            Self::Trace { instances, .. } => instances.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn prepare_corpus(config: &ExperimentConfig) -> Result<PreparedCorpus> {
    match &config.corpus {
        Corpus::Synthetic {
            instances,
            m,
            p0,
            cost_per_vote,
        } => Ok(PreparedCorpus::Synthetic(gen_instances(
            *instances,
            *m,
            p0,
            *cost_per_vote,
            config.seed,
        )?)),
        Corpus::Trace { path, labels } => {
            let instances = load_trace(path)?.into_values().collect();
            let labels = match labels {
                Some(p) => load_labels(p)?,
                None => HashMap::new(),
            };
            Ok(PreparedCorpus::Trace { instances, labels })
        }
    }
}

fn attributed<T>(instance_id: &str, r: rollout_sprt_core::Result<T>) -> Result<T> {
    r.map_err(|source| HarnessError::Instance {
        instance_id: instance_id.to_string(),
        source,
    })
}

/// Maps instances in order, in parallel when enabled.
fn map_instances<T, R, F>(items: &[T], parallel: bool, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

/// Majority vote over the first `budget` votes (lowest id on ties).
fn fixed_budget_vote<S: VoteSource>(
    source: &mut S,
    budget: usize,
) -> rollout_sprt_core::Result<(AnswerId, u64, usize)> {
    let mut tally = VoteTally::new(source.m())?;
    let mut cost = 0;
    while (tally.total() as usize) < budget {
        match source.draw()? {
            Some(v) => {
                tally.ingest(v.answer)?;
                cost += v.cost;
            }
            None => break,
        }
    }
    let n = tally.total() as usize;
    Ok((tally.top_two()?.leader, cost, n))
}

fn savings(cost: u64, fixed_cost: u64) -> f64 {
    if fixed_cost == 0 {
        0.0
    } else {
        1.0 - cost as f64 / fixed_cost as f64
    }
}

fn blank_row(instance_id: &str) -> Row {
    Row {
        instance_id: instance_id.to_string(),
        p0_true: None,
        true_answer: None,
        tau: 0,
        pseudo_label: 0,
        pseudo_answer: None,
        pseudo_correct: None,
        cost: 0,
        fixed_cost: 0,
        fixed_label: None,
        fixed_correct: None,
        savings_fraction: 0.0,
        decision_kind: String::new(),
        truncated: false,
        pre_update_greedy_correct: None,
        post_update_greedy_correct: None,
        true_prob_before: None,
        true_prob_after: None,
        pseudo_nll_before: None,
        pseudo_nll_after: None,
        pseudo_nll_decreased: None,
    }
}

fn compare_synthetic(
    inst: &SyntheticInstance,
    stopper: &StopperConfig,
    fixed_budget: usize,
    seed: u64,
) -> Result<Row> {
    let id = &inst.instance_id;
    let mut fixed_src = CategoricalVoteSource::for_purpose(inst, seed, StreamPurpose::FixedArm);
    let (fixed_label, fixed_cost, _) =
        attributed(id, fixed_budget_vote(&mut fixed_src, fixed_budget))?;
    let mut src = CategoricalVoteSource::for_purpose(inst, seed, StreamPurpose::AdaptiveArm);
    let r = attributed(id, allocate(&mut src, stopper))?;
    Ok(Row {
        p0_true: Some(inst.p0_true),
        true_answer: Some(inst.true_answer.index()),
        tau: r.tau,
        pseudo_label: r.pseudo_label.index(),
        pseudo_correct: Some(r.pseudo_label == inst.true_answer),
        cost: r.total_cost,
        fixed_cost,
        fixed_label: Some(fixed_label.index()),
        fixed_correct: Some(fixed_label == inst.true_answer),
        savings_fraction: savings(r.total_cost, fixed_cost),
        decision_kind: r.decision_kind.as_str().to_string(),
        truncated: r.truncated,
        ..blank_row(id)
    })
}

fn compare_trace(
    inst: &TraceInstance,
    label: Option<&String>,
    stopper: &StopperConfig,
    fixed_budget: usize,
) -> Result<Row> {
    let id = &inst.instance_id;
    let (fixed_label, fixed_cost, _) =
        attributed(id, fixed_budget_vote(&mut inst.replay(), fixed_budget))?;
    let r = attributed(id, allocate(&mut inst.replay(), stopper))?;
    let answer = inst.answer_str(r.pseudo_label).map(str::to_string);
    let truth = label.map(|l| inst.answer_id(l));
    Ok(Row {
        true_answer: truth.flatten().map(AnswerId::index),
        tau: r.tau,
        pseudo_label: r.pseudo_label.index(),
        pseudo_correct: label.map(|l| answer.as_deref() == Some(l.as_str())),
        pseudo_answer: answer,
        cost: r.total_cost,
        fixed_cost,
        fixed_label: Some(fixed_label.index()),
        fixed_correct: label.map(|l| inst.answer_str(fixed_label) == Some(l.as_str())),
        savings_fraction: savings(r.total_cost, fixed_cost),
        decision_kind: r.decision_kind.as_str().to_string(),
        truncated: r.truncated,
        ..blank_row(id)
    })
}

/// Fixed-budget majority vote vs adaptive allocation on every instance.
pub fn run_compare(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let corpus = prepare_corpus(config)?;
    run_compare_on(config, &corpus)
}

/// [`run_compare`] over an already loaded corpus.
pub fn run_compare_on(
    config: &ExperimentConfig,
    corpus: &PreparedCorpus,
) -> Result<ExperimentReport> {
    let stopper = config.stopper()?;
    let rows = match corpus {
        PreparedCorpus::Synthetic(insts) => map_instances(insts, config.parallel, |inst| {
            compare_synthetic(inst, &stopper, config.fixed_budget, config.seed)
        })?,
        PreparedCorpus::Trace { instances, labels } => {
            map_instances(instances, config.parallel, |inst| {
                compare_trace(
                    inst,
                    labels.get(&inst.instance_id),
                    &stopper,
                    config.fixed_budget,
                )
            })?
        }
    };
    Ok(ExperimentReport::new(rows, config.seed, config.to_pairs()))
}

fn ttpo_instance(
    inst: &SyntheticInstance,
    config: &ExperimentConfig,
    stopper: &StopperConfig,
    sft: bool,
) -> Result<Row> {
    let id = &inst.instance_id;
    let truth = inst.true_answer;
    let reference = attributed(
        id,
        SoftmaxAnswerPolicy::with_accuracy(truth, inst.p0_true, inst.m),
    )?;
    let mut policy = reference.clone();
    let pre_greedy = policy.greedy() == truth;
    let prob_before = policy.probabilities()[truth.index()];

    let mut tau = 0;
    let mut cost = 0;
    let mut last = None;
    let mut nll_first = None;
    let mut nll_last = None;
    let mut nll_ok = true;
    for round in 0..config.rounds {
        let rng = stream_rng(config.seed, id, StreamPurpose::PolicyRound(round));
        let mut src = PolicyVoteSource::from_rng(&policy, rng, inst.cost_per_vote);
        let r = attributed(id, allocate(&mut src, stopper))?;
        let label = r.pseudo_label;
        let nll_before = -attributed(id, policy.log_prob(label))?;
        policy = if sft {
            attributed(id, sft_update(&policy, label, &config.update))?
        } else {
            let retained = attributed(id, retain_for_update(&r, stopper.n_min))?;
            let samples = attributed(id, rewarded_samples(retained, label, &config.update))?;
            attributed(id, pg_update(&policy, &samples, &reference, &config.update))?
        };
        let nll_after = -attributed(id, policy.log_prob(label))?;
        nll_ok &= nll_after < nll_before;
        nll_first.get_or_insert(nll_before);
        nll_last = Some(nll_after);
        tau += r.tau;
        cost += r.total_cost;
        last = Some(r);
    }
    let last = last.ok_or_else(|| HarnessError::Config("rounds must be >= 1".into()))?;
    let fixed_cost = u64::from(config.rounds) * config.fixed_budget as u64 * inst.cost_per_vote;
    Ok(Row {
        p0_true: Some(inst.p0_true),
        true_answer: Some(truth.index()),
        tau,
        pseudo_label: last.pseudo_label.index(),
        pseudo_correct: Some(last.pseudo_label == truth),
        cost,
        fixed_cost,
        savings_fraction: savings(cost, fixed_cost),
        decision_kind: last.decision_kind.as_str().to_string(),
        truncated: last.truncated,
        pre_update_greedy_correct: Some(pre_greedy),
        post_update_greedy_correct: Some(policy.greedy() == truth),
        true_prob_before: Some(prob_before),
        true_prob_after: Some(policy.probabilities()[truth.index()]),
        pseudo_nll_before: nll_first,
        pseudo_nll_after: nll_last,
        pseudo_nll_decreased: sft.then_some(nll_ok),
        ..blank_row(id)
    })
}

/// Closed loop per instance: sample from the policy, allocate, update.
pub fn run_ttpo(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let sft = match config.mode {
        Mode::TtpoRl => false,
        Mode::TtpoSft => true,
        other => {
            return Err(HarnessError::Config(format!(
                "run_ttpo needs mode ttpo_rl or ttpo_sft, got {}",
                other.as_str()
            )))
        }
    };
    if matches!(config.corpus, Corpus::Trace { .. }) {
        return Err(HarnessError::Config(
            "closed-loop modes need a synthetic corpus; trace replay cannot reflect updates".into(),
        ));
    }
    let PreparedCorpus::Synthetic(insts) = prepare_corpus(config)? else {
        unreachable!("synthetic corpus checked above");
    };
    let stopper = config.stopper()?;
    let rows = map_instances(&insts, config.parallel, |inst| {
        ttpo_instance(inst, config, &stopper, sft)
    })?;
    Ok(ExperimentReport::new(rows, config.seed, config.to_pairs()))
}

/// One comparison per value with the corpus and seeds held fixed.
pub fn run_ablation(
    config: &ExperimentConfig,
    axis: AblationAxis,
    values: &[f64],
) -> Result<Vec<(f64, ExperimentReport)>> {
    if values.is_empty() {
        return Err(HarnessError::Config(
            "ablation needs at least one value".into(),
        ));
    }
    let mut base = config.clone();
    base.mode = Mode::Compare;
    base.ablate_axis = None;
    base.ablate_values.clear();
    base.validate()?;
    let corpus = prepare_corpus(&base)?;

    values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            match axis {
                AblationAxis::AlphaBeta => {
                    cfg.alpha = v;
                    cfg.beta = v;
                }
                AblationAxis::NMin => {
                    if !(v >= 1.0 && v.fract() == 0.0) {
                        return Err(HarnessError::Config(format!(
                            "n_min ablation values must be positive integers, got {v}"
                        )));
                    }
                    cfg.n_min = v as usize;
                }
            }
            cfg.validate()?;
            Ok((v, run_compare_on(&cfg, &corpus)?))
        })
        .collect()
}

/// Result of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Single(Box<ExperimentReport>),
    Ablation {
        axis: AblationAxis,
        reports: Vec<(f64, ExperimentReport)>,
    },
}

/// Dispatches on `config.mode`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    match config.mode {
        Mode::Compare => Ok(RunOutput::Single(Box::new(run_compare(config)?))),
        Mode::TtpoRl | Mode::TtpoSft => Ok(RunOutput::Single(Box::new(run_ttpo(config)?))),
        Mode::Ablate => {
            config.validate()?;
            let axis = config
                .ablate_axis
                .ok_or_else(|| HarnessError::Config("ablate mode needs ablate_axis".into()))?;
            Ok(RunOutput::Ablation {
                axis,
                reports: run_ablation(config, axis, &config.ablate_values)?,
            })
        }
    }
}
