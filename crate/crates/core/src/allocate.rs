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
//! The sample-and-test loop: draw votes until the stopper reaches a terminal
//! decision, then hand back the pseudo-label and the retained rollouts.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::consensus::{AnswerId, VoteTally};
use crate::sprt::{SprtStopper, StopKind, StopperConfig, Thresholds};
use crate::{Error, Result};

/// One rollout reduced to its extracted answer and a cost proxy (tokens).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vote {
    pub answer: AnswerId,
    pub cost: u64,
}

/// Anything that yields votes over a fixed answer set of size `m`.
pub trait VoteSource {
    fn m(&self) -> usize;

    /// Next vote, or `Ok(None)` once a finite source is exhausted.
    fn draw(&mut self) -> Result<Option<Vote>>;
}

impl<S: VoteSource + ?Sized> VoteSource for &mut S {
    fn m(&self) -> usize {
        (**self).m()
    }

    fn draw(&mut self) -> Result<Option<Vote>> {
        (**self).draw()
    }
}

impl<S: VoteSource + ?Sized> VoteSource for Box<S> {
    fn m(&self) -> usize {
        (**self).m()
    }

    fn draw(&mut self) -> Result<Option<Vote>> {
        (**self).draw()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub pseudo_label: AnswerId,
    /// Votes consumed.
    pub tau: usize,
    /// Kind of the last decision; `Continue` only when `truncated`.
    pub decision_kind: StopKind,
    /// The source ran dry before a terminal decision.
    pub truncated: bool,
    pub votes: Vec<Vote>,
    /// Indices into `votes` kept for the update step.
    pub retained: Vec<usize>,
    pub total_cost: u64,
    pub final_tally: VoteTally,
    pub posterior_at_stop: Vec<f64>,
    /// Accuracy used by the test (frozen at warm-up end when reached).
    pub p0_used: f64,
    /// `None` when the source ran dry during warm-up.
    pub thresholds: Option<Thresholds>,
}

impl AllocationResult {
    pub fn retained_votes(&self) -> impl Iterator<Item = &Vote> + '_ {
        self.retained.iter().map(move |&i| &self.votes[i])
    }
}

/// Runs the sequential test over `source` until a terminal decision or
/// exhaustion.
pub fn allocate<S: VoteSource + ?Sized>(
    source: &mut S,
    config: &StopperConfig,
) -> Result<AllocationResult> {
    let m = source.m();
    let mut stopper = SprtStopper::new(*config, m)?;
    let mut votes = Vec::with_capacity(config.m_max.min(1 << 16));
    let mut truncated = false;

    while !stopper.is_finished() {
        match source.draw()? {
            Some(vote) => {
                stopper.step(vote.answer)?;
                votes.push(vote);
            }
            None => {
                truncated = true;
                break;
            }
        }
    }
    if votes.is_empty() {
        return Err(Error::Source(
            "source exhausted before the first vote".into(),
        ));
    }

    let last = stopper.last_decision();
    let pseudo_label = match last.chosen() {
        Some(a) => a,
        None => stopper.tally().top_two()?.leader,
    };
    let model = stopper.current_model()?;
    let posterior_at_stop = model.posterior(stopper.tally())?;
    let n_retained = config.n_min.min(votes.len());

    Ok(AllocationResult {
        pseudo_label,
        tau: votes.len(),
        decision_kind: last.kind(),
        truncated,
        retained: (0..n_retained).collect(),
        total_cost: votes.iter().map(|v| v.cost).sum(),
        votes,
        final_tally: stopper.tally().clone(),
        posterior_at_stop,
        p0_used: model.p0(),
        thresholds: stopper.calibration().map(|c| c.thresholds),
    })
}

/// The first `n` votes in draw order, or all of them for a truncated run
/// shorter than `n`.
pub fn retain_for_update(result: &AllocationResult, n: usize) -> Result<&[Vote]> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "retained rollout count must be >= 1".into(),
        ));
    }
    if n > result.tau && !result.truncated {
        return Err(Error::InvalidInput(alloc::format!(
            "cannot retain {n} rollouts from a run of {}",
            result.tau
        )));
    }
    Ok(&result.votes[..n.min(result.tau)])
}

/// Sequential driver over independent sources. A failing instance does not
/// abort its siblings.
pub fn batch_allocate<S, I>(sources: I, config: &StopperConfig) -> Vec<Result<AllocationResult>>
where
    S: VoteSource,
    I: IntoIterator<Item = S>,
{
    sources
        .into_iter()
        .map(|mut s| allocate(&mut s, config))
        .collect()
}
