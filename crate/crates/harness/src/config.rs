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
//! Experiment configuration and its flat `key = value` text form.
//!
//! ```text
//! # comment
//! mode = compare
//! instances = 10000
//! p0 = mixture:0.5,0.95,0.5
//! alpha = 0.05
//! ```
//!
//! Every key has a default; files and `--set key=value` overrides use the
//! same parser. The resolved configuration is echoed back by
//! [`ExperimentConfig::to_pairs`] in the same syntax.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rollout_sprt_core::synth::P0Distribution;
use rollout_sprt_core::{AdvantageMode, ErrorBudget, P0Mode, StopperConfig, UpdateConfig};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Compare,
    TtpoRl,
    TtpoSft,
    Ablate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    NMin,
    AlphaBeta,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Corpus {
    Synthetic {
        instances: usize,
        m: usize,
        p0: P0Distribution,
        cost_per_vote: u64,
    },
    Trace {
        path: PathBuf,
        labels: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub corpus: Corpus,
    pub alpha: f64,
    pub beta: f64,
    pub n_min: usize,
    pub m_max: usize,
    pub streak_k: usize,
    pub degradation: f64,
    pub p0_floor_epsilon: f64,
    pub p0_mode: P0Mode,
    pub update: UpdateConfig,
    pub fixed_budget: usize,
    pub rounds: u32,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub ablate_axis: Option<AblationAxis>,
    pub ablate_values: Vec<f64>,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = StopperConfig::default();
        Self {
            mode: Mode::Compare,
            corpus: Corpus::Synthetic {
                instances: 1000,
                m: 4,
                p0: P0Distribution::Constant(0.8),
                cost_per_vote: 1,
            },
            alpha: s.budget.alpha(),
            beta: s.budget.beta(),
            n_min: s.n_min,
            m_max: s.m_max,
            streak_k: s.streak_k,
            degradation: s.degradation,
            p0_floor_epsilon: s.p0_floor_epsilon,
            p0_mode: s.p0_mode,
            update: UpdateConfig::default(),
            fixed_budget: 64,
            rounds: 1,
            seed: 0,
            output: None,
            format: OutputFormat::Json,
            ablate_axis: None,
            ablate_values: Vec::new(),
            parallel: true,
        }
    }
}

fn bad(key: &str, value: &str, why: impl fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{key} = {value:?}: {why}"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn floats(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| num::<f64>(key, v.trim()))
        .collect()
}

pub fn parse_p0_distribution(value: &str) -> Result<P0Distribution> {
    let (kind, args) = value.split_once(':').unwrap_or((value, ""));
    let args = floats("p0", args)?;
    let dist = match (kind.trim(), args.as_slice()) {
        ("constant", [c]) => P0Distribution::Constant(*c),
        ("uniform", [lo, hi]) => P0Distribution::Uniform { lo: *lo, hi: *hi },
        ("mixture", [q, p_hi, p_lo]) => P0Distribution::Mixture {
            q: *q,
            p_hi: *p_hi,
            p_lo: *p_lo,
        },
        _ => {
            return Err(bad(
                "p0",
                value,
                "expected constant:<c>, uniform:<lo>,<hi> or mixture:<q>,<p_hi>,<p_lo>",
            ))
        }
    };
    dist.validate().map_err(|e| bad("p0", value, e))?;
    Ok(dist)
}

pub fn format_p0_distribution(d: &P0Distribution) -> String {
    match *d {
        P0Distribution::Constant(c) => format!("constant:{c}"),
        P0Distribution::Uniform { lo, hi } => format!("uniform:{lo},{hi}"),
        P0Distribution::Mixture { q, p_hi, p_lo } => format!("mixture:{q},{p_hi},{p_lo}"),
    }
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Compare => "compare",
            Mode::TtpoRl => "ttpo_rl",
            Mode::TtpoSft => "ttpo_sft",
            Mode::Ablate => "ablate",
        }
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "compare" => Mode::Compare,
            "ttpo_rl" => Mode::TtpoRl,
            "ttpo_sft" => Mode::TtpoSft,
            "ablate" => Mode::Ablate,
            _ => {
                return Err(bad(
                    "mode",
                    s,
                    "expected compare, ttpo_rl, ttpo_sft or ablate",
                ))
            }
        })
    }
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(bad("format", s, "expected csv or json")),
        }
    }
}

impl AblationAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationAxis::NMin => "n_min",
            AblationAxis::AlphaBeta => "alpha_beta",
        }
    }
}

impl FromStr for AblationAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_min" => Ok(AblationAxis::NMin),
            "alpha_beta" => Ok(AblationAxis::AlphaBeta),
            _ => Err(bad("ablate_axis", s, "expected n_min or alpha_beta")),
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

impl ExperimentConfig {
    /// Parses a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => self.mode = value.parse()?,
            "corpus" => match value {
                "synthetic" => {
                    if !matches!(self.corpus, Corpus::Synthetic { .. }) {
                        self.corpus = Self::default().corpus;
                    }
                }
                "trace" => {
                    if !matches!(self.corpus, Corpus::Trace { .. }) {
                        self.corpus = Corpus::Trace {
                            path: PathBuf::new(),
                            labels: None,
                        };
                    }
                }
                _ => return Err(bad(key, value, "expected synthetic or trace")),
            },
            "trace" => {
                let labels = match &self.corpus {
                    Corpus::Trace { labels, .. } => labels.clone(),
                    Corpus::Synthetic { .. } => None,
                };
                self.corpus = Corpus::Trace {
                    path: PathBuf::from(value),
                    labels,
                };
            }
            "labels" => match &mut self.corpus {
                Corpus::Trace { labels, .. } => *labels = Some(PathBuf::from(value)),
                Corpus::Synthetic { .. } => {
                    return Err(bad(
                        key,
                        value,
                        "labels require a trace corpus (set trace first)",
                    ))
                }
            },
            "instances" | "m" | "p0" | "cost_per_vote" => {
                let Corpus::Synthetic {
                    instances,
                    m,
                    p0,
                    cost_per_vote,
                } = &mut self.corpus
                else {
                    return Err(bad(key, value, "only valid for a synthetic corpus"));
                };
                match key {
                    "instances" => *instances = num(key, value)?,
                    "m" => *m = num(key, value)?,
                    "p0" => *p0 = parse_p0_distribution(value)?,
                    _ => *cost_per_vote = num(key, value)?,
                }
            }
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "n_min" => self.n_min = num(key, value)?,
            "m_max" => self.m_max = num(key, value)?,
            "streak_k" => self.streak_k = num(key, value)?,
            "degradation" => self.degradation = num(key, value)?,
            "p0_floor_epsilon" => self.p0_floor_epsilon = num(key, value)?,
            "p0_mode" => {
                self.p0_mode = if value == "adaptive" {
                    P0Mode::Adaptive
                } else if let Some(v) = value.strip_prefix("fixed:") {
                    P0Mode::Fixed(num(key, v)?)
                } else {
                    return Err(bad(key, value, "expected adaptive or fixed:<p0>"));
                }
            }
            "learning_rate" => self.update.learning_rate = num(key, value)?,
            "beta_kl" => self.update.beta_kl = num(key, value)?,
            "advantage_mode" => {
                self.update.advantage_mode = match value {
                    "mean_baseline" => AdvantageMode::MeanBaseline,
                    "group_normalized" => AdvantageMode::GroupNormalized,
                    _ => {
                        return Err(bad(
                            key,
                            value,
                            "expected mean_baseline or group_normalized",
                        ))
                    }
                }
            }
            "std_epsilon" => self.update.std_epsilon = num(key, value)?,
            "fixed_budget" => self.fixed_budget = num(key, value)?,
            "rounds" => self.rounds = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "ablate_axis" => self.ablate_axis = Some(value.parse()?),
            "ablate_values" => {
                self.ablate_values = if value.is_empty() {
                    Vec::new()
                } else {
                    floats(key, value)?
                }
            }
            "parallel" => self.parallel = parse_bool(key, value)?,
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Stopper settings with the error budget validated.
    pub fn stopper(&self) -> Result<StopperConfig> {
        let cfg = StopperConfig {
            budget: ErrorBudget::new(self.alpha, self.beta)?,
            n_min: self.n_min,
            m_max: self.m_max,
            streak_k: self.streak_k,
            degradation: self.degradation,
            p0_floor_epsilon: self.p0_floor_epsilon,
            p0_mode: self.p0_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.stopper()?;
        self.update.validate()?;
        if self.rounds == 0 {
            return Err(HarnessError::Config("rounds must be >= 1".into()));
        }
        if self.fixed_budget == 0 {
            return Err(HarnessError::Config("fixed_budget must be >= 1".into()));
        }
        match &self.corpus {
            Corpus::Synthetic {
                instances,
                m,
                p0,
                cost_per_vote,
            } => {
                if *instances == 0 {
                    return Err(HarnessError::Config("instances must be >= 1".into()));
                }
                if *m < 2 {
                    return Err(HarnessError::Config(format!("m must be >= 2, got {m}")));
                }
                if *cost_per_vote == 0 {
                    return Err(HarnessError::Config("cost_per_vote must be >= 1".into()));
                }
                p0.validate()?;
            }
            Corpus::Trace { path, .. } => {
                if path.as_os_str().is_empty() {
                    return Err(HarnessError::Config(
                        "trace corpus needs a trace path".into(),
                    ));
                }
            }
        }
        if self.mode == Mode::Ablate {
            if self.ablate_axis.is_none() {
                return Err(HarnessError::Config("ablate mode needs ablate_axis".into()));
            }
            if self.ablate_values.is_empty() {
                return Err(HarnessError::Config(
                    "ablate mode needs ablate_values".into(),
                ));
            }
        }
        Ok(())
    }

    /// Resolved configuration as `key -> value` in the file syntax.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            out.insert(k.to_string(), v);
        };
        put("mode", self.mode.as_str().into());
        match &self.corpus {
            Corpus::Synthetic {
                instances,
                m,
                p0,
                cost_per_vote,
            } => {
                put("corpus", "synthetic".into());
                put("instances", instances.to_string());
                put("m", m.to_string());
                put("p0", format_p0_distribution(p0));
                put("cost_per_vote", cost_per_vote.to_string());
            }
            Corpus::Trace { path, labels } => {
                put("corpus", "trace".into());
                put("trace", path.display().to_string());
                if let Some(l) = labels {
                    put("labels", l.display().to_string());
                }
            }
        }
        put("alpha", self.alpha.to_string());
        put("beta", self.beta.to_string());
        put("n_min", self.n_min.to_string());
        put("m_max", self.m_max.to_string());
        put("streak_k", self.streak_k.to_string());
        put("degradation", self.degradation.to_string());
        put("p0_floor_epsilon", self.p0_floor_epsilon.to_string());
        put(
            "p0_mode",
            match self.p0_mode {
                P0Mode::Adaptive => "adaptive".into(),
                P0Mode::Fixed(p) => format!("fixed:{p}"),
            },
        );
        put("learning_rate", self.update.learning_rate.to_string());
        put("beta_kl", self.update.beta_kl.to_string());
        put("advantage_mode", self.update.advantage_mode.as_str().into());
        put("std_epsilon", self.update.std_epsilon.to_string());
        put("fixed_budget", self.fixed_budget.to_string());
        put("rounds", self.rounds.to_string());
        put("seed", self.seed.to_string());
        if let Some(axis) = self.ablate_axis {
            put("ablate_axis", axis.as_str().into());
        }
        if !self.ablate_values.is_empty() {
            let vals: Vec<String> = self.ablate_values.iter().map(f64::to_string).collect();
            put("ablate_values", vals.join(","));
        }
        out
    }

    /// Rebuilds a config from an echo produced by [`Self::to_pairs`].
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        // corpus kind and trace path must precede their dependants
        for key in ["corpus", "trace"] {
            if let Some(v) = pairs.get(key) {
                cfg.set(key, v)?;
            }
        }
        for (k, v) in pairs {
            if k != "corpus" && k != "trace" {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }
}
