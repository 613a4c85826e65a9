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
//! Synthetic instances and seeded vote sources.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocate::{Vote, VoteSource};
use crate::consensus::AnswerId;
use crate::rng::{stream_rng, StreamPurpose};
use crate::update::SoftmaxAnswerPolicy;
use crate::{Error, Result};

/// One test question whose votes follow the symmetric categorical model.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub instance_id: String,
    pub true_answer: AnswerId,
    pub m: usize,
    /// Probability that a single vote is correct.
    pub p0_true: f64,
    pub cost_per_vote: u64,
}

impl SyntheticInstance {
    pub fn new(
        instance_id: impl Into<String>,
        true_answer: AnswerId,
        m: usize,
        p0_true: f64,
        cost_per_vote: u64,
    ) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config(format!("m must be >= 2, got {m}")));
        }
        if true_answer.index() >= m {
            return Err(Error::AnswerOutOfRange {
                answer: true_answer.index(),
                m,
            });
        }
        if !(p0_true > 0.0 && p0_true < 1.0) {
            return Err(Error::Config(format!(
                "p0_true must lie in (0, 1), got {p0_true}"
            )));
        }
        Ok(Self {
            instance_id: instance_id.into(),
            true_answer,
            m,
            p0_true,
            cost_per_vote,
        })
    }
}

/// How per-instance accuracies are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum P0Distribution {
    Constant(f64),
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Easy instances (`p_hi`) with probability `q`, hard ones (`p_lo`) otherwise.
    Mixture {
        q: f64,
        p_hi: f64,
        p_lo: f64,
    },
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl P0Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant(c) => open_unit("constant p0", c),
            Self::Uniform { lo, hi } => {
                open_unit("uniform lo", lo)?;
                open_unit("uniform hi", hi)?;
                if lo > hi {
                    return Err(Error::Config(format!(
                        "uniform bounds reversed: {lo} > {hi}"
                    )));
                }
                Ok(())
            }
            Self::Mixture { q, p_hi, p_lo } => {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::Config(format!(
                        "mixture weight must lie in [0, 1], got {q}"
                    )));
                }
                open_unit("mixture p_hi", p_hi)?;
                open_unit("mixture p_lo", p_lo)
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Constant(c) => c,
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            Self::Mixture { q, p_hi, p_lo } => {
                if rng.gen::<f64>() < q {
                    p_hi
                } else {
                    p_lo
                }
            }
        }
    }
}

pub fn instance_id(index: usize) -> String {
    format!("inst-{index:06}")
}

/// Deterministic corpus: instance `i` depends only on `(seed, i)`.
pub fn gen_instances(
    count: usize,
    m: usize,
    p0_distribution: &P0Distribution,
    cost_per_vote: u64,
    seed: u64,
) -> Result<Vec<SyntheticInstance>> {
    if count == 0 {
        return Err(Error::Config("instance count must be >= 1".into()));
    }
    if m < 2 {
        return Err(Error::Config(format!("m must be >= 2, got {m}")));
    }
    p0_distribution.validate()?;
    (0..count)
        .map(|i| {
            let id = instance_id(i);
            let mut rng = stream_rng(seed, &id, StreamPurpose::Instance);
            let true_answer = AnswerId(rng.gen_range(0..m));
            let p0 = p0_distribution.sample(&mut rng);
            SyntheticInstance::new(id, true_answer, m, p0, cost_per_vote)
        })
        .collect()
}

/// Votes drawn i.i.d. from the instance's categorical model.
#[derive(Debug, Clone)]
pub struct CategoricalVoteSource {
    true_answer: usize,
    m: usize,
    p0: f64,
    cost: u64,
    rng: ChaCha8Rng,
}

impl CategoricalVoteSource {
    pub fn new(instance: &SyntheticInstance, stream_seed: u64) -> Self {
        Self::from_rng(instance, ChaCha8Rng::seed_from_u64(stream_seed))
    }

    /// Source on the instance's own stream for `purpose`.
    pub fn for_purpose(
        instance: &SyntheticInstance,
        global_seed: u64,
        purpose: StreamPurpose,
    ) -> Self {
        Self::from_rng(
            instance,
            stream_rng(global_seed, &instance.instance_id, purpose),
        )
    }

    fn from_rng(instance: &SyntheticInstance, rng: ChaCha8Rng) -> Self {
        Self {
            true_answer: instance.true_answer.index(),
            m: instance.m,
            p0: instance.p0_true,
            cost: instance.cost_per_vote,
            rng,
        }
    }

    fn next_answer(&mut self) -> usize {
        if self.rng.gen::<f64>() < self.p0 {
            return self.true_answer;
        }
        let k = self.rng.gen_range(0..self.m - 1);
        if k >= self.true_answer {
            k + 1
        } else {
            k
        }
    }
}

impl VoteSource for CategoricalVoteSource {
    fn m(&self) -> usize {
        self.m
    }

    fn draw(&mut self) -> Result<Option<Vote>> {
        let a = self.next_answer();
        Ok(Some(Vote {
            answer: AnswerId(a),
            cost: self.cost,
        }))
    }
}

/// Votes sampled from a snapshot of a softmax policy. Rebuild the source
/// after updating the policy.
#[derive(Debug, Clone)]
pub struct PolicyVoteSource {
    cumulative: Vec<f64>,
    cost: u64,
    rng: ChaCha8Rng,
}

impl PolicyVoteSource {
    pub fn new(policy: &SoftmaxAnswerPolicy, stream_seed: u64, cost: u64) -> Self {
        Self::from_rng(policy, ChaCha8Rng::seed_from_u64(stream_seed), cost)
    }

    pub fn from_rng(policy: &SoftmaxAnswerPolicy, rng: ChaCha8Rng, cost: u64) -> Self {
        let mut acc = 0.0;
        let cumulative = policy
            .probabilities()
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            cumulative,
            cost,
            rng,
        }
    }
}

impl VoteSource for PolicyVoteSource {
    fn m(&self) -> usize {
        self.cumulative.len()
    }

    fn draw(&mut self) -> Result<Option<Vote>> {
        let u = self.rng.gen::<f64>();
        let last = self.cumulative.len() - 1;
        let a = self.cumulative.iter().position(|&c| u < c).unwrap_or(last);
        Ok(Some(Vote {
            answer: AnswerId(a),
            cost: self.cost,
        }))
    }
}
