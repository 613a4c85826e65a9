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
//! Per-instance rows, aggregates recomputable from them, and the CSV / JSON
//! encodings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::{HarnessError, Result};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// One instance. Optional fields are empty when the mode or corpus has no
/// such quantity (e.g. no ground truth for unlabeled traces).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub instance_id: String,
    pub p0_true: Option<f64>,
    pub true_answer: Option<usize>,
    /// Votes consumed by the adaptive arm (summed over rounds).
    pub tau: usize,
    pub pseudo_label: usize,
    /// Answer string behind `pseudo_label`, for trace corpora.
    pub pseudo_answer: Option<String>,
    pub pseudo_correct: Option<bool>,
    pub cost: u64,
    /// Cost of the fixed-budget arm (run or notional).
    pub fixed_cost: u64,
    pub fixed_label: Option<usize>,
    pub fixed_correct: Option<bool>,
    /// `1 - cost / fixed_cost`.
    pub savings_fraction: f64,
    pub decision_kind: String,
    pub truncated: bool,
    pub pre_update_greedy_correct: Option<bool>,
    pub post_update_greedy_correct: Option<bool>,
    pub true_prob_before: Option<f64>,
    pub true_prob_after: Option<f64>,
    pub pseudo_nll_before: Option<f64>,
    pub pseudo_nll_after: Option<f64>,
    /// Every update step lowered `-ln pi(pseudo_label)`.
    pub pseudo_nll_decreased: Option<bool>,
}

pub const CSV_HEADER: [&str; 21] = [
    "instance_id",
    "p0_true",
    "true_answer",
    "tau",
    "pseudo_label",
    "pseudo_answer",
    "pseudo_correct",
    "cost",
    "fixed_cost",
    "fixed_label",
    "fixed_correct",
    "savings_fraction",
    "decision_kind",
    "truncated",
    "pre_update_greedy_correct",
    "post_update_greedy_correct",
    "true_prob_before",
    "true_prob_after",
    "pseudo_nll_before",
    "pseudo_nll_after",
    "pseudo_nll_decreased",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub instances: usize,
    pub mean_tau: Option<f64>,
    pub mean_cost: Option<f64>,
    pub mean_cost_fixed: Option<f64>,
    /// `1 - mean_cost / mean_cost_fixed`, as a fraction.
    pub savings_pct: Option<f64>,
    pub mean_savings_fraction: Option<f64>,
    pub pseudo_label_accuracy: Option<f64>,
    pub fixed_accuracy: Option<f64>,
    /// Boundary-crossing stops (leader or runner-up).
    pub stop_decisions: usize,
    /// Wrong answers among boundary-crossing stops with ground truth.
    pub empirical_stop_error_rate: Option<f64>,
    pub budget_exhausted: usize,
    pub truncated: usize,
    pub pre_update_accuracy: Option<f64>,
    pub post_update_accuracy: Option<f64>,
    pub mean_true_prob_before: Option<f64>,
    pub mean_true_prob_after: Option<f64>,
    pub sft_nll_violations: Option<usize>,
    pub seed: u64,
    pub tool_version: String,
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<Row>,
    pub aggregate: Aggregate,
}

fn mean<I: Iterator<Item = f64>>(values: I) -> Option<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn rate<I: Iterator<Item = bool>>(flags: I) -> Option<f64> {
    mean(flags.map(|b| if b { 1.0 } else { 0.0 }))
}

impl Aggregate {
    pub fn from_rows(rows: &[Row], seed: u64, config: BTreeMap<String, String>) -> Self {
        let mean_cost = mean(rows.iter().map(|r| r.cost as f64));
        let mean_cost_fixed = mean(rows.iter().map(|r| r.fixed_cost as f64));
        let is_stop =
            |r: &&Row| r.decision_kind == "stop_leader" || r.decision_kind == "stop_runner_up";
        let nll_flags: Vec<bool> = rows.iter().filter_map(|r| r.pseudo_nll_decreased).collect();
        Self {
            instances: rows.len(),
            mean_tau: mean(rows.iter().map(|r| r.tau as f64)),
            mean_cost,
            mean_cost_fixed,
            savings_pct: match (mean_cost, mean_cost_fixed) {
                (Some(a), Some(f)) if f > 0.0 => Some(1.0 - a / f),
                _ => None,
            },
            mean_savings_fraction: mean(rows.iter().map(|r| r.savings_fraction)),
            pseudo_label_accuracy: rate(rows.iter().filter_map(|r| r.pseudo_correct)),
            fixed_accuracy: rate(rows.iter().filter_map(|r| r.fixed_correct)),
            stop_decisions: rows.iter().filter(is_stop).count(),
            empirical_stop_error_rate: rate(
                rows.iter()
                    .filter(is_stop)
                    .filter_map(|r| r.pseudo_correct.map(|c| !c)),
            ),
            budget_exhausted: rows
                .iter()
                .filter(|r| r.decision_kind == "budget_exhausted")
                .count(),
            truncated: rows.iter().filter(|r| r.truncated).count(),
            pre_update_accuracy: rate(rows.iter().filter_map(|r| r.pre_update_greedy_correct)),
            post_update_accuracy: rate(rows.iter().filter_map(|r| r.post_update_greedy_correct)),
            mean_true_prob_before: mean(rows.iter().filter_map(|r| r.true_prob_before)),
            mean_true_prob_after: mean(rows.iter().filter_map(|r| r.true_prob_after)),
            sft_nll_violations: (!nll_flags.is_empty())
                .then(|| nll_flags.iter().filter(|ok| !**ok).count()),
            seed,
            tool_version: TOOL_VERSION.to_string(),
            config,
        }
    }
}

impl ExperimentReport {
    pub fn new(rows: Vec<Row>, seed: u64, config: BTreeMap<String, String>) -> Self {
        let aggregate = Aggregate::from_rows(&rows, seed, config);
        Self { rows, aggregate }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Invariant(format!("report json: {e}")))
    }

    /// Header, one line per row, then `# key=value` aggregate lines.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for row in &self.rows {
            w.serialize(row).expect("in-memory write");
        }
        let mut out = String::from_utf8(w.into_inner().expect("in-memory flush"))
            .expect("csv output is utf-8");
        out.push_str("# aggregate\n");
        for (key, value) in self.aggregate_lines() {
            out.push_str(&format!("# {key}={value}\n"));
        }
        out
    }

    /// Flattened aggregate block, `config.*` keys last.
    pub fn aggregate_lines(&self) -> Vec<(String, String)> {
        let value = serde_json::to_value(&self.aggregate).expect("aggregate serializes");
        let serde_json::Value::Object(map) = value else {
            unreachable!("aggregate is a struct")
        };
        let mut lines = Vec::new();
        for (k, v) in map {
            if k == "config" {
                continue;
            }
            lines.push((k, scalar(&v)));
        }
        for (k, v) in &self.aggregate.config {
            lines.push((format!("config.{k}"), v.clone()));
        }
        lines
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

fn scalar(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Null => String::new(),
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes a report to `path`.
pub fn emit_report(report: &ExperimentReport, path: &Path, format: OutputFormat) -> Result<()> {
    std::fs::write(path, report.render(format)).map_err(|e| HarnessError::io(path, e))
}

/// Reads back a JSON report.
pub fn read_json_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    ExperimentReport::from_json(&text)
}
