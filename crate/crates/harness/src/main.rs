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
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rollout_sprt::config::{ExperimentConfig, OutputFormat};
use rollout_sprt::error::{HarnessError, Result};
use rollout_sprt::experiment::{run, RunOutput};
use rollout_sprt::report::ExperimentReport;
use rollout_sprt::AblationAxis;

/// Adaptive rollout allocation experiments.
#[derive(Debug, Parser)]
#[command(name = "rollout-sprt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fixed-budget majority vote vs adaptive stopping on every instance.
    Compare(Common),
    /// Closed-loop test-time updates driven by adaptive pseudo-labels.
    Ttpo {
        #[arg(long, value_enum, default_value_t = UpdateKind::Rl)]
        update: UpdateKind,
        #[arg(long)]
        rounds: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one stopper parameter, holding corpus and seeds fixed.
    Ablate {
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long)]
        values: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare on a recorded trace file instead of the synthetic generator.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Two-column CSV: instance_id,answer.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UpdateKind {
    Rl,
    Sft,
}

#[derive(Debug, Args)]
struct Common {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    streak: Option<usize>,
    #[arg(long)]
    fixed_budget: Option<usize>,
    /// Any configuration key, applied last. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Process instances on one thread.
    #[arg(long)]
    serial: bool,
}

impl Common {
    fn build(&self, mut pre: Vec<(&str, String)>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let opt = |k: &'static str, v: Option<String>| v.map(|v| (k, v));
        pre.extend(
            [
                opt("seed", self.seed.map(|v| v.to_string())),
                opt("format", self.format.clone()),
                opt("alpha", self.alpha.map(|v| v.to_string())),
                opt("beta", self.beta.map(|v| v.to_string())),
                opt("n_min", self.n_min.map(|v| v.to_string())),
                opt("m_max", self.m_max.map(|v| v.to_string())),
                opt("streak_k", self.streak.map(|v| v.to_string())),
                opt("fixed_budget", self.fixed_budget.map(|v| v.to_string())),
            ]
            .into_iter()
            .flatten(),
        );
        for (k, v) in pre {
            cfg.set(k, &v)?;
        }
        for pair in &self.set {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("--set expects KEY=VALUE, got {pair:?}"))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        if self.serial {
            cfg.parallel = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| HarnessError::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| HarnessError::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

/// `out.csv` with axis n_min and value 16 becomes `out-n_min-16.csv`.
fn ablation_path(base: &Path, axis: AblationAxis, value: f64) -> PathBuf {
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("ablation");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-{}-{value}.{ext}", axis.as_str()),
        None => format!("{stem}-{}-{value}", axis.as_str()),
    };
    base.with_file_name(name)
}

fn emit(cfg: &ExperimentConfig, output: RunOutput) -> Result<()> {
    let out = cfg.output.as_deref();
    match output {
        RunOutput::Single(report) => write_out(out, &report.render(cfg.format)),
        RunOutput::Ablation { axis, reports } => match cfg.format {
            OutputFormat::Json => {
                let doc = serde_json::json!({
                    "axis": axis.as_str(),
                    "values": reports.iter().map(|(v, _)| *v).collect::<Vec<_>>(),
                    "reports": reports.iter().map(|(_, r)| r).collect::<Vec<&ExperimentReport>>(),
                });
                let mut text = serde_json::to_string_pretty(&doc)
                    .map_err(|e| HarnessError::Invariant(format!("report serialization: {e}")))?;
                text.push('\n');
                write_out(out, &text)
            }
            OutputFormat::Csv => match out {
                Some(base) => reports.iter().try_for_each(|(v, r)| {
                    write_out(Some(&ablation_path(base, axis, *v)), &r.to_csv())
                }),
                None => {
                    let mut text = String::new();
                    for (v, r) in &reports {
                        text.push_str(&format!("# ablation {}={v}\n", axis.as_str()));
                        text.push_str(&r.to_csv());
                    }
                    write_out(None, &text)
                }
            },
        },
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.command {
        Command::Compare(common) => common.build(vec![("mode", "compare".into())])?,
        Command::Ttpo {
            update,
            rounds,
            common,
        } => {
            let mode = match update {
                UpdateKind::Rl => "ttpo_rl",
                UpdateKind::Sft => "ttpo_sft",
            };
            let mut pre = vec![("mode", mode.to_string())];
            if let Some(r) = rounds {
                pre.push(("rounds", r.to_string()));
            }
            common.build(pre)?
        }
        Command::Ablate {
            axis,
            values,
            common,
        } => {
            let mut pre = vec![("mode", "ablate".to_string())];
            if let Some(a) = axis {
                pre.push(("ablate_axis", a.clone()));
            }
            if let Some(v) = values {
                pre.push(("ablate_values", v.clone()));
            }
            common.build(pre)?
        }
        Command::Replay {
            trace,
            labels,
            common,
        } => {
            let mut pre = vec![
                ("mode", "compare".to_string()),
                ("trace", trace.display().to_string()),
            ];
            if let Some(l) = labels {
                pre.push(("labels", l.display().to_string()));
            }
            common.build(pre)?
        }
    };
    let output = run(&cfg)?;
    emit(&cfg, output)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rollout-sprt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
