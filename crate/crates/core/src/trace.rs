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
//! Replay of recorded rollouts.
//!
//! A trace is a set of `(instance_id, rollout_index, answer, tokens)`
//! records. Answer strings are mapped to ids per instance in first-seen
//! order (by rollout index), and `m` is the number of distinct answers in
//! the whole instance trace, floored at 2. Parsing the on-disk format is the
//! caller's job.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::allocate::{Vote, VoteSource};
use crate::consensus::AnswerId;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub instance_id: String,
    pub rollout_index: u64,
    pub answer: String,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceError {
    /// A record is structurally valid but semantically unusable.
    InvalidRecord { line: usize, reason: String },
    Duplicate {
        line: usize,
        first_line: usize,
        instance_id: String,
        rollout_index: u64,
    },
    /// Rollout indices of an instance are not exactly `0..n`.
    NonDense {
        line: usize,
        instance_id: String,
        expected: u64,
        found: u64,
    },
}

impl fmt::Display for TraceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidRecord { line, reason } => write!(f, "line {line}: {reason}"),
            Self::Duplicate {
                line,
                first_line,
                instance_id,
                rollout_index,
            } => write!(
                f,
                "line {line}: duplicate rollout_index {rollout_index} for instance                  {instance_id:?} (first seen on line {first_line})"
            ),
            Self::NonDense {
                line,
                instance_id,
                expected,
                found,
            } => write!(
                f,
                "line {line}: instance {instance_id:?} skips rollout_index {expected}                  (next present index is {found})"
            ),
        }
    }
}

impl core::error::Error for TraceError {}

/// One instance's recorded votes in rollout order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceInstance {
    pub instance_id: String,
    dictionary: Vec<String>,
    votes: Vec<Vote>,
    m: usize,
}

impl TraceInstance {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    pub fn votes(&self) -> &[Vote] {
        &self.votes
    }

    /// Answer strings indexed by id.
    pub fn dictionary(&self) -> &[String] {
        &self.dictionary
    }

    pub fn answer_id(&self, answer: &str) -> Option<AnswerId> {
        self.dictionary
            .iter()
            .position(|a| a == answer)
            .map(AnswerId)
    }

    pub fn answer_str(&self, id: AnswerId) -> Option<&str> {
        self.dictionary.get(id.index()).map(String::as_str)
    }

    /// A fresh replay from the first rollout.
    pub fn replay(&self) -> ReplaySource<'_> {
        ReplaySource {
            votes: &self.votes,
            m: self.m,
            pos: 0,
        }
    }

    /// The first `count` votes turned back into records.
    pub fn to_records(&self, count: usize) -> Vec<TraceRecord> {
        self.votes
            .iter()
            .take(count)
            .enumerate()
            .map(|(i, v)| TraceRecord {
                instance_id: self.instance_id.clone(),
                rollout_index: i as u64,
                answer: self.dictionary[v.answer.index()].clone(),
                tokens: v.cost,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ReplaySource<'a> {
    votes: &'a [Vote],
    m: usize,
    pos: usize,
}

impl ReplaySource<'_> {
    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl VoteSource for ReplaySource<'_> {
    fn m(&self) -> usize {
        self.m
    }

    fn draw(&mut self) -> Result<Option<Vote>> {
        let v = self.votes.get(self.pos).copied();
        if v.is_some() {
            self.pos += 1;
        }
        Ok(v)
    }
}

/// Groups, validates and indexes records. `line` numbers are 1-based
/// positions in the source file and only used for error reporting.
pub fn assemble<I>(records: I) -> core::result::Result<BTreeMap<String, TraceInstance>, TraceError>
where
    I: IntoIterator<Item = (usize, TraceRecord)>,
{
    let mut grouped: BTreeMap<String, BTreeMap<u64, (usize, String, u64)>> = BTreeMap::new();
    for (line, rec) in records {
        if rec.tokens == 0 {
            return Err(TraceError::InvalidRecord {
                line,
                reason: "tokens must be a positive integer".into(),
            });
        }
        let slots = grouped.entry(rec.instance_id.clone()).or_default();
        if let Some((first_line, _, _)) = slots.get(&rec.rollout_index) {
            return Err(TraceError::Duplicate {
                line,
                first_line: *first_line,
                instance_id: rec.instance_id,
                rollout_index: rec.rollout_index,
            });
        }
        slots.insert(rec.rollout_index, (line, rec.answer, rec.tokens));
    }

    let mut out = BTreeMap::new();
    for (instance_id, slots) in grouped {
        let mut dictionary: Vec<String> = Vec::new();
        let mut votes = Vec::with_capacity(slots.len());
        for (expected, (index, (line, answer, tokens))) in slots.into_iter().enumerate() {
            let expected = expected as u64;
            if index != expected {
                return Err(TraceError::NonDense {
                    line,
                    instance_id,
                    expected,
                    found: index,
                });
            }
            let id = match dictionary.iter().position(|a| *a == answer) {
                Some(i) => i,
                None => {
                    dictionary.push(answer);
                    dictionary.len() - 1
                }
            };
            votes.push(Vote {
                answer: AnswerId(id),
                cost: tokens,
            });
        }
        let m = dictionary.len().max(2);
        out.insert(
            instance_id.clone(),
            TraceInstance {
                instance_id,
                dictionary,
                votes,
                m,
            },
        );
    }
    Ok(out)
}
