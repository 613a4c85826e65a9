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
//! Line-delimited JSON rollout traces and label sidecars.
//!
//! One object per line:
//! `{"instance_id": "q1", "rollout_index": 0, "answer": "42", "tokens": 311}`.
//! Unknown fields are ignored and blank lines skipped.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rollout_sprt_core::trace::{assemble, TraceInstance, TraceRecord};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Line {
    instance_id: String,
    rollout_index: u64,
    answer: String,
    tokens: u64,
}

impl From<Line> for TraceRecord {
    fn from(l: Line) -> Self {
        TraceRecord {
            instance_id: l.instance_id,
            rollout_index: l.rollout_index,
            answer: l.answer,
            tokens: l.tokens,
        }
    }
}

impl From<&TraceRecord> for Line {
    fn from(r: &TraceRecord) -> Self {
        Line {
            instance_id: r.instance_id.clone(),
            rollout_index: r.rollout_index,
            answer: r.answer.clone(),
            tokens: r.tokens,
        }
    }
}

fn corpus_err(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Corpus {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Parses trace text; `origin` only labels errors.
pub fn parse_trace(text: &str, origin: &Path) -> Result<BTreeMap<String, TraceInstance>> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw)
            .map_err(|e| corpus_err(origin, format!("line {lineno}: malformed record: {e}")))?;
        records.push((lineno, TraceRecord::from(line)));
    }
    assemble(records).map_err(|e| corpus_err(origin, e.to_string()))
}

/// Loads a trace file into per-instance replay data.
pub fn load_trace(path: &Path) -> Result<BTreeMap<String, TraceInstance>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        text.push_str(&line);
        text.push('\n');
    }
    parse_trace(&text, path)
}

/// Canonical serialization: one compact object per line, fixed field order.
pub fn write_records(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&Line::from(r)).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}

/// `instance_id,answer` per line.
pub fn load_labels(path: &Path) -> Result<HashMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| corpus_err(path, e.to_string()))?;
    let mut labels = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| corpus_err(path, e.to_string()))?;
        if row.len() != 2 {
            return Err(corpus_err(
                path,
                format!("record {}: expected instance_id,answer", i + 1),
            ));
        }
        if labels
            .insert(row[0].to_string(), row[1].to_string())
            .is_some()
        {
            return Err(corpus_err(
                path,
                format!("duplicate label for {:?}", &row[0]),
            ));
        }
    }
    Ok(labels)
}
