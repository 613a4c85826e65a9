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
//! Label-free test-time updates on a softmax answer policy.
//!
//! Two rules share the same pseudo-label:
//! - policy gradient on the consensus-indicator reward with a batch-mean
//!   baseline (optionally std-normalized) and a KL penalty to a reference;
//! - one cross-entropy step toward the pseudo-label.
//!
//! Gradients are with respect to the raw logits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::allocate::Vote;
use crate::consensus::AnswerId;
use crate::math;
use crate::{Error, Result};

/// `pi(a) = softmax(logits / temperature)[a]` over a finite answer set.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxAnswerPolicy {
    logits: Vec<f64>,
    temperature: f64,
}

impl SoftmaxAnswerPolicy {
    pub fn new(logits: Vec<f64>) -> Result<Self> {
        Self::with_temperature(logits, 1.0)
    }

    pub fn with_temperature(logits: Vec<f64>, temperature: f64) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "policy needs at least 2 answers, got {}",
                logits.len()
            )));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidInput("policy logits must be finite".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self {
            logits,
            temperature,
        })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![0.0; m])
    }

    /// Policy whose probability of `true_answer` is exactly `p0`, with the
    /// rest spread evenly: true logit `ln(p0 (m-1) / (1-p0))`, others zero.
    pub fn with_accuracy(true_answer: AnswerId, p0: f64, m: usize) -> Result<Self> {
        if true_answer.index() >= m {
            return Err(Error::AnswerOutOfRange {
                answer: true_answer.index(),
                m,
            });
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "p0 must lie in (0, 1), got {p0}"
            )));
        }
        let mut logits = vec![0.0; m];
        logits[true_answer.index()] = math::ln(p0 * (m - 1) as f64 / (1.0 - p0));
        Self::new(logits)
    }

    pub fn m(&self) -> usize {
        self.logits.len()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    fn scaled(&self) -> Vec<f64> {
        self.logits.iter().map(|l| l / self.temperature).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        math::softmax(&self.scaled())
    }

    pub fn log_probabilities(&self) -> Vec<f64> {
        math::log_softmax(&self.scaled())
    }

    pub fn log_prob(&self, answer: AnswerId) -> Result<f64> {
        self.check_answer(answer)?;
        Ok(self.log_probabilities()[answer.index()])
    }

    /// Most likely answer, lowest id on ties.
    pub fn greedy(&self) -> AnswerId {
        AnswerId(math::argmax(&self.logits))
    }

    fn check_answer(&self, answer: AnswerId) -> Result<()> {
        if answer.index() >= self.m() {
            return Err(Error::AnswerOutOfRange {
                answer: answer.index(),
                m: self.m(),
            });
        }
        Ok(())
    }

    fn check_same_m(&self, other: &Self) -> Result<()> {
        if self.m() != other.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: other.m(),
            });
        }
        Ok(())
    }

    fn stepped(&self, direction: &[f64], scale: f64) -> Result<Self> {
        let logits = self
            .logits
            .iter()
            .zip(direction)
            .map(|(l, d)| l + scale * d)
            .collect();
        Self::with_temperature(logits, self.temperature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvantageMode {
    /// `A_i = r_i - mean(r)`.
    MeanBaseline,
    /// `A_i = (r_i - mean(r)) / (std(r) + eps)`, population std.
    GroupNormalized,
}

impl AdvantageMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AdvantageMode::MeanBaseline => "mean_baseline",
            AdvantageMode::GroupNormalized => "group_normalized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateConfig {
    pub learning_rate: f64,
    pub beta_kl: f64,
    pub advantage_mode: AdvantageMode,
    pub std_epsilon: f64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta_kl: 1e-3,
            advantage_mode: AdvantageMode::MeanBaseline,
            std_epsilon: 1e-8,
        }
    }
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.beta_kl >= 0.0 && self.beta_kl.is_finite()) {
            return Err(Error::Config(format!(
                "beta_kl must be >= 0, got {}",
                self.beta_kl
            )));
        }
        if !(self.std_epsilon > 0.0 && self.std_epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "std_epsilon must be positive, got {}",
                self.std_epsilon
            )));
        }
        Ok(())
    }
}

/// A retained rollout with its reward and advantage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardedSample {
    pub answer: AnswerId,
    pub reward: f64,
    pub advantage: f64,
}

/// Indicator reward: 1 when the rollout agrees with the pseudo-label.
pub fn consensus_reward(answer: AnswerId, pseudo_label: AnswerId) -> f64 {
    if answer == pseudo_label {
        1.0
    } else {
        0.0
    }
}

pub fn advantages(rewards: &[f64], mode: AdvantageMode, std_epsilon: f64) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::InvalidInput("advantages of an empty batch".into()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let centered = rewards.iter().map(|r| r - mean);
    Ok(match mode {
        AdvantageMode::MeanBaseline => centered.collect(),
        AdvantageMode::GroupNormalized => {
            let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
            let denom = math::sqrt(var) + std_epsilon;
            centered.map(|c| c / denom).collect()
        }
    })
}

/// Scores retained votes against the pseudo-label.
pub fn rewarded_samples(
    votes: &[Vote],
    pseudo_label: AnswerId,
    config: &UpdateConfig,
) -> Result<Vec<RewardedSample>> {
    let rewards: Vec<f64> = votes
        .iter()
        .map(|v| consensus_reward(v.answer, pseudo_label))
        .collect();
    let adv = advantages(&rewards, config.advantage_mode, config.std_epsilon)?;
    Ok(votes
        .iter()
        .zip(rewards)
        .zip(adv)
        .map(|((v, reward), advantage)| RewardedSample {
            answer: v.answer,
            reward,
            advantage,
        })
        .collect())
}

/// `KL(policy || reference)`.
pub fn kl_divergence(policy: &SoftmaxAnswerPolicy, reference: &SoftmaxAnswerPolicy) -> Result<f64> {
    policy.check_same_m(reference)?;
    let lp = policy.log_probabilities();
    let lr = reference.log_probabilities();
    let kl: f64 = lp
        .iter()
        .zip(&lr)
        .map(|(a, b)| math::exp(*a) * (a - b))
        .sum();
    Ok(kl.max(0.0))
}

fn check_samples(policy: &SoftmaxAnswerPolicy, samples: &[RewardedSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "policy update needs at least one sample".into(),
        ));
    }
    for s in samples {
        policy.check_answer(s.answer)?;
    }
    Ok(())
}

/// `(1/N) sum_i A_i ln pi(a_i) - beta_kl KL(pi || ref)`.
pub fn pg_objective(
    policy: &SoftmaxAnswerPolicy,
    samples: &[RewardedSample],
    reference: &SoftmaxAnswerPolicy,
    beta_kl: f64,
) -> Result<f64> {
    check_samples(policy, samples)?;
    let lp = policy.log_probabilities();
    let n = samples.len() as f64;
    let surrogate = samples
        .iter()
        .map(|s| s.advantage * lp[s.answer.index()])
        .sum::<f64>()
        / n;
    Ok(surrogate - beta_kl * kl_divergence(policy, reference)?)
}

/// Analytic gradient of [`pg_objective`] with respect to the logits.
pub fn pg_gradient(
    policy: &SoftmaxAnswerPolicy,
    samples: &[RewardedSample],
    reference: &SoftmaxAnswerPolicy,
    config: &UpdateConfig,
) -> Result<Vec<f64>> {
    check_samples(policy, samples)?;
    policy.check_same_m(reference)?;
    let m = policy.m();
    let n = samples.len() as f64;
    let inv_t = 1.0 / policy.temperature;
    let p = policy.probabilities();

    // d ln pi(a) / dz_j = [j == a] - pi_j, so the surrogate term is
    // (1/N) (sum_i A_i e_{a_i} - (sum_i A_i) pi)
    let adv_sum: f64 = samples.iter().map(|s| s.advantage).sum();
    let mut grad: Vec<f64> = p.iter().map(|pj| -adv_sum * pj).collect();
    for s in samples {
        grad[s.answer.index()] += s.advantage;
    }
    for g in &mut grad {
        *g /= n;
    }

    if config.beta_kl > 0.0 {
        // dKL/dz_k = pi_k (ln pi_k - ln ref_k - KL)
        let lp = policy.log_probabilities();
        let lr = reference.log_probabilities();
        let diff: Vec<f64> = lp.iter().zip(&lr).map(|(a, b)| a - b).collect();
        let kl: f64 = p.iter().zip(&diff).map(|(pk, d)| pk * d).sum();
        for k in 0..m {
            grad[k] -= config.beta_kl * p[k] * (diff[k] - kl);
        }
    }
    for g in &mut grad {
        *g *= inv_t;
    }
    Ok(grad)
}

/// One ascent step: `logits + learning_rate * pg_gradient`.
pub fn pg_update(
    policy: &SoftmaxAnswerPolicy,
    samples: &[RewardedSample],
    reference: &SoftmaxAnswerPolicy,
    config: &UpdateConfig,
) -> Result<SoftmaxAnswerPolicy> {
    config.validate()?;
    let grad = pg_gradient(policy, samples, reference, config)?;
    policy.stepped(&grad, config.learning_rate)
}

/// One descent step on `-ln pi(pseudo_label)`.
pub fn sft_update(
    policy: &SoftmaxAnswerPolicy,
    pseudo_label: AnswerId,
    config: &UpdateConfig,
) -> Result<SoftmaxAnswerPolicy> {
    config.validate()?;
    policy.check_answer(pseudo_label)?;
    let inv_t = 1.0 / policy.temperature;
    let mut dir: Vec<f64> = policy.probabilities().iter().map(|p| -p * inv_t).collect();
    dir[pseudo_label.index()] += inv_t;
    policy.stepped(&dir, config.learning_rate)
}
