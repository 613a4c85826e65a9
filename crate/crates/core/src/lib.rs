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

//! Adaptive rollout allocation for test-time policy optimization.
//!
//! Votes (canonical answers extracted from sampled rollouts) arrive one at a
//! time. A sequential probability ratio test between the leading and
//! runner-up answers decides when the consensus is confident enough to stop
//! sampling. The resulting pseudo-label then drives one of two label-free
//! update rules on a softmax answer policy: a policy-gradient step with a
//! consensus-indicator reward, or a cross-entropy step toward the label.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, reports and
//! the command line live in the companion `rollout-sprt` crate.
//!
//! Module map:
//! - [`consensus`]: vote tallies, the categorical noise model, Bayes factors.
//! - [`sprt`]: Wald and gap thresholds, p0 calibration, the stopping rule.
//! - [`allocate`]: the sample-test loop over a [`allocate::VoteSource`].
//! - [`update`]: rewards, advantages, policy-gradient and SFT updates.
//! - [`synth`]: synthetic instances and seeded vote sources.
//! - [`trace`]: in-memory replay of recorded rollout traces.

#![no_std]

extern crate alloc;

pub mod allocate;
pub mod consensus;
mod error;
pub mod math;
pub mod rng;
pub mod sprt;
pub mod synth;
pub mod trace;
pub mod update;

pub use allocate::{
    allocate, batch_allocate, retain_for_update, AllocationResult, Vote, VoteSource,
};
pub use consensus::{AnswerId, AnswerModel, TopTwo, VoteTally};
pub use error::Error;
pub use sprt::{
    ErrorBudget, P0Mode, SprtStopper, StopDecision, StopKind, StopperConfig, Thresholds,
};
pub use update::{AdvantageMode, RewardedSample, SoftmaxAnswerPolicy, UpdateConfig};

pub type Result<T, E = Error> = core::result::Result<T, E>;
