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
//! Vote accounting and the categorical answer model.
//!
//! Under hypothesis `H_j` each vote equals `j` with probability `p0` and any
//! specific wrong answer with probability `(1 - p0) / (m - 1)`. The likelihood
//! ratio between the leader and the runner-up then collapses to `kappa^gap`
//! with `kappa = p0 (m - 1) / (1 - p0)`. Everything is kept in log space.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::{Error, Result};

/// Index into the answer set `{0, .., m-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AnswerId(pub usize);

impl AnswerId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for AnswerId {
    fn from(v: usize) -> Self {
        AnswerId(v)
    }
}

impl fmt::Display for AnswerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-answer vote counts over a fixed answer set of size `m`.
///
/// Classes that have not been voted for are present with count zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    counts: Vec<u64>,
    total: u64,
}

/// Leader and runner-up of a tally and their vote-count gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopTwo {
    pub leader: AnswerId,
    pub runner_up: AnswerId,
    pub gap: u64,
}

impl VoteTally {
    /// An empty tally over `m` answers.
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(alloc::format!(
                "answer set needs at least 2 classes, got {m}"
            )));
        }
        Ok(Self {
            counts: vec![0; m],
            total: 0,
        })
    }

    /// Folds a vote sequence into a fresh tally.
    pub fn from_votes<I>(m: usize, votes: I) -> Result<Self>
    where
        I: IntoIterator<Item = AnswerId>,
    {
        let mut tally = Self::new(m)?;
        for v in votes {
            tally.ingest(v)?;
        }
        Ok(tally)
    }

    pub fn m(&self) -> usize {
        self.counts.len()
    }

    /// Number of votes ingested so far.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, answer: AnswerId) -> u64 {
        self.counts.get(answer.0).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Adds one vote.
    pub fn ingest(&mut self, vote: AnswerId) -> Result<()> {
        let m = self.m();
        let slot = self
            .counts
            .get_mut(vote.0)
            .ok_or(Error::AnswerOutOfRange { answer: vote.0, m })?;
        *slot += 1;
        self.total += 1;
        Ok(())
    }

    /// Returns a copy with one more vote; `self` is left untouched.
    pub fn with_vote(&self, vote: AnswerId) -> Result<Self> {
        let mut next = self.clone();
        next.ingest(vote)?;
        Ok(next)
    }

    /// Leader, runner-up and gap. Ties go to the lowest answer id.
    pub fn top_two(&self) -> Result<TopTwo> {
        if self.total == 0 {
            return Err(Error::InvalidInput("top_two of an empty tally".into()));
        }
        let mut leader = 0;
        for (i, &c) in self.counts.iter().enumerate().skip(1) {
            if c > self.counts[leader] {
                leader = i;
            }
        }
        let mut runner_up = if leader == 0 { 1 } else { 0 };
        for (i, &c) in self.counts.iter().enumerate() {
            if i != leader && c > self.counts[runner_up] {
                runner_up = i;
            }
        }
        Ok(TopTwo {
            leader: AnswerId(leader),
            runner_up: AnswerId(runner_up),
            gap: self.counts[leader] - self.counts[runner_up],
        })
    }
}

/// Symmetric categorical vote model with `p0 > 1/m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerModel {
    p0: f64,
    m: usize,
}

impl AnswerModel {
    /// Rejects `m < 2`, `p0` outside `(0, 1)` and the `kappa <= 1` regime.
    pub fn new(p0: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config(alloc::format!("m must be >= 2, got {m}")));
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::Config(alloc::format!(
                "p0 must lie in (0, 1), got {p0}"
            )));
        }
        let model = Self { p0, m };
        if model.kappa().is_nan() || model.kappa() <= 1.0 {
            return Err(Error::Config(alloc::format!(
                "p0 = {p0} does not exceed 1/m for m = {m} (kappa <= 1)"
            )));
        }
        Ok(model)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Probability of any one specific wrong answer.
    pub fn wrong_mass(&self) -> f64 {
        (1.0 - self.p0) / (self.m - 1) as f64
    }

    pub fn kappa(&self) -> f64 {
        self.p0 * (self.m - 1) as f64 / (1.0 - self.p0)
    }

    pub fn ln_kappa(&self) -> f64 {
        math::ln(self.kappa())
    }

    fn check(&self, tally: &VoteTally) -> Result<()> {
        if tally.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: tally.m(),
            });
        }
        Ok(())
    }

    /// `ln P(votes | H_hypothesis)`.
    pub fn log_likelihood(&self, tally: &VoteTally, hypothesis: AnswerId) -> Result<f64> {
        self.check(tally)?;
        if hypothesis.0 >= self.m {
            return Err(Error::AnswerOutOfRange {
                answer: hypothesis.0,
                m: self.m,
            });
        }
        Ok(self.ll_unchecked(tally, hypothesis.0))
    }

    fn ll_unchecked(&self, tally: &VoteTally, j: usize) -> f64 {
        let hits = tally.counts[j];
        let misses = tally.total - hits;
        // skip zero-count terms so an empty tally is exactly 0.0
        let mut ll = 0.0;
        if hits > 0 {
            ll += hits as f64 * math::ln(self.p0);
        }
        if misses > 0 {
            ll += misses as f64 * math::ln(self.wrong_mass());
        }
        ll
    }

    /// Log Bayes factor via `gap * ln(kappa)`.
    pub fn log_bayes_factor_closed_form(&self, gap: u64) -> f64 {
        if gap == 0 {
            return 0.0;
        }
        gap as f64 * self.ln_kappa()
    }

    /// Log Bayes factor as the difference of the leader's and runner-up's
    /// full log-likelihoods.
    pub fn log_bayes_factor_full(&self, tally: &VoteTally) -> Result<f64> {
        self.check(tally)?;
        let top = tally.top_two()?;
        Ok(self.ll_unchecked(tally, top.leader.0) - self.ll_unchecked(tally, top.runner_up.0))
    }

    /// Posterior over the `m` hypotheses under a uniform prior.
    pub fn posterior(&self, tally: &VoteTally) -> Result<Vec<f64>> {
        self.check(tally)?;
        let lls: Vec<f64> = (0..self.m).map(|j| self.ll_unchecked(tally, j)).collect();
        Ok(math::softmax(&lls))
    }
}
