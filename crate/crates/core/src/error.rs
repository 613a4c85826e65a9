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

use alloc::string::String;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An answer index outside the declared answer set.
    AnswerOutOfRange { answer: usize, m: usize },
    /// A caller-supplied value violated an operation's precondition.
    InvalidInput(String),
    /// A configuration value is outside its admissible range.
    Config(String),
    /// The operation is not valid in the stopper's current state.
    State(&'static str),
    /// Two vectors or models disagree on the answer-set size.
    DimensionMismatch { expected: usize, found: usize },
    /// A vote source failed internally.
    Source(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AnswerOutOfRange { answer, m } => {
                write!(f, "answer {answer} out of range for answer set of size {m}")
            }
            Self::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Self::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Self::State(msg) => write!(f, "invalid state: {msg}"),
            Self::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Self::Source(msg) => write!(f, "vote source failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
