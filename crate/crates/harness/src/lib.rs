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
//! Experiment harness around `rollout-sprt-core`: trace files, flat-text
//! configuration, CSV/JSON reports, and the comparison, closed-loop and
//! ablation runners used by the `rollout-sprt` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod trace;

pub use config::{AblationAxis, Corpus, ExperimentConfig, Mode, OutputFormat};
pub use error::{HarnessError, Result};
pub use experiment::{run, run_ablation, run_compare, run_ttpo, RunOutput};
pub use report::{emit_report, read_json_report, ExperimentReport, Row};
