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
//! Top-two sequential probability ratio test with integer gap thresholds.

use alloc::format;

use crate::consensus::{AnswerId, AnswerModel, VoteTally};
use crate::math;
use crate::{Error, Result};

/// Type-I / type-II error budgets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    alpha: f64,
    beta: f64,
}

impl ErrorBudget {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!(
                "alpha and beta must lie in (0, 1), got alpha={alpha}, beta={beta}"
            )));
        }
        if alpha + beta >= 1.0 {
            return Err(Error::Config(format!(
                "alpha + beta must be < 1, got {}",
                alpha + beta
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `(ln A, ln B)` with `A = (1-beta)/alpha` and `B = beta/(1-alpha)`.
    pub fn wald_thresholds(&self) -> (f64, f64) {
        (
            math::ln((1.0 - self.beta) / self.alpha),
            math::ln(self.beta / (1.0 - self.alpha)),
        )
    }
}

impl Default for ErrorBudget {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.05,
        }
    }
}

/// Validating wrapper: `(ln A, ln B)` for raw budgets.
pub fn wald_thresholds(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    Ok(ErrorBudget::new(alpha, beta)?.wald_thresholds())
}

/// Relative slack under which a threshold ratio counts as an exact integer.
///
/// Inputs such as `alpha = beta = 0.1, kappa = 9` give `ln A / ln kappa = 1`
/// exactly, but binary rounding of the decimal inputs can land a few ulps on
/// either side of the integer.
const INTEGER_SNAP: f64 = 1e-9;

fn snapped(r: f64) -> Option<f64> {
    let n = libm::round(r);
    if (r - n).abs() <= INTEGER_SNAP * r.abs().max(1.0) {
        Some(n)
    } else {
        None
    }
}

fn ceil_snapped(r: f64) -> i64 {
    snapped(r).unwrap_or_else(|| libm::ceil(r)) as i64
}

fn floor_snapped(r: f64) -> i64 {
    snapped(r).unwrap_or_else(|| libm::floor(r)) as i64
}

/// Integer gap thresholds `(ceil(ln A / ln kappa), floor(ln B / ln kappa))`.
pub fn gap_thresholds(log_a: f64, log_b: f64, model: &AnswerModel) -> Result<(i64, i64)> {
    let ln_kappa = model.ln_kappa();
    if ln_kappa.is_nan() || ln_kappa <= 0.0 {
        return Err(Error::Config(format!(
            "gap thresholds need kappa > 1, got {}",
            model.kappa()
        )));
    }
    if !(log_a > 0.0 && log_b < 0.0) {
        return Err(Error::Config(format!(
            "Wald bounds must satisfy ln A > 0 > ln B, got {log_a}, {log_b}"
        )));
    }
    let delta_a = ceil_snapped(log_a / ln_kappa).max(1);
    let delta_b = floor_snapped(log_b / ln_kappa).min(-1);
    Ok((delta_a, delta_b))
}

/// Wald bounds and their integer gap equivalents for one answer model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub log_a: f64,
    pub log_b: f64,
    pub delta_a: i64,
    pub delta_b: i64,
}

impl Thresholds {
    pub fn new(budget: &ErrorBudget, model: &AnswerModel) -> Result<Self> {
        let (log_a, log_b) = budget.wald_thresholds();
        let (delta_a, delta_b) = gap_thresholds(log_a, log_b, model)?;
        Ok(Self {
            log_a,
            log_b,
            delta_a,
            delta_b,
        })
    }
}

/// Where the vote accuracy `p0` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum P0Mode {
    /// A known value, as in controlled simulations.
    Fixed(f64),
    /// Majority share among the first `n_min` votes times `degradation`.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopperConfig {
    pub budget: ErrorBudget,
    /// Warm-up length and minimum number of retained rollouts.
    pub n_min: usize,
    /// Hard cap on rollouts per instance.
    pub m_max: usize,
    /// Consecutive confirming steps needed before stopping.
    pub streak_k: usize,
    pub degradation: f64,
    pub p0_floor_epsilon: f64,
    pub p0_mode: P0Mode,
}

impl Default for StopperConfig {
    fn default() -> Self {
        Self {
            budget: ErrorBudget::default(),
            n_min: 32,
            m_max: 64,
            streak_k: 5,
            degradation: 0.6,
            p0_floor_epsilon: 1e-3,
            p0_mode: P0Mode::Adaptive,
        }
    }
}

impl StopperConfig {
    pub fn validate(&self) -> Result<()> {
        ErrorBudget::new(self.budget.alpha, self.budget.beta)?;
        if self.n_min == 0 {
            return Err(Error::Config("n_min must be >= 1".into()));
        }
        if self.m_max < self.n_min {
            return Err(Error::Config(format!(
                "m_max ({}) must be >= n_min ({})",
                self.m_max, self.n_min
            )));
        }
        if self.streak_k == 0 {
            return Err(Error::Config("streak_k must be >= 1".into()));
        }
        if !(self.degradation > 0.0 && self.degradation <= 1.0) {
            return Err(Error::Config(format!(
                "degradation must lie in (0, 1], got {}",
                self.degradation
            )));
        }
        // the clamp interval (1/m + eps, 1 - eps) must be non-empty for m = 2
        if !(self.p0_floor_epsilon > 0.0 && self.p0_floor_epsilon < 0.25) {
            return Err(Error::Config(format!(
                "p0_floor_epsilon must lie in (0, 0.25), got {}",
                self.p0_floor_epsilon
            )));
        }
        if let P0Mode::Fixed(p) = self.p0_mode {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!(
                    "fixed p0 must lie in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Clamps a raw accuracy into `[1/m + eps, 1 - eps]` so that `kappa > 1`.
pub fn clamp_p0(raw: f64, m: usize, eps: f64) -> f64 {
    let lo = 1.0 / m as f64 + eps;
    let hi = 1.0 - eps;
    raw.max(lo).min(hi)
}

/// Calibrated `p0` from the tally of the first `n_min` votes.
pub fn estimate_p0(tally_at_n_min: &VoteTally, config: &StopperConfig, m: usize) -> Result<f64> {
    if tally_at_n_min.total() != config.n_min as u64 {
        return Err(Error::InvalidInput(format!(
            "p0 estimation needs exactly n_min = {} votes, got {}",
            config.n_min,
            tally_at_n_min.total()
        )));
    }
    Ok(estimate_p0_unchecked(tally_at_n_min, config, m))
}

/// Same rule over whatever the tally holds; used for truncated traces.
pub(crate) fn estimate_p0_unchecked(tally: &VoteTally, config: &StopperConfig, m: usize) -> f64 {
    let majority = tally.counts().iter().copied().max().unwrap_or(0);
    let raw = if tally.total() == 0 {
        0.0
    } else {
        config.degradation * majority as f64 / tally.total() as f64
    };
    clamp_p0(raw, m, config.p0_floor_epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopKind {
    Continue,
    StopLeader,
    StopRunnerUp,
    BudgetExhausted,
}

impl StopKind {
    pub fn is_terminal(self) -> bool {
        !matches!(self, StopKind::Continue)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StopKind::Continue => "continue",
            StopKind::StopLeader => "stop_leader",
            StopKind::StopRunnerUp => "stop_runner_up",
            StopKind::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// Outcome of one step. Terminal kinds always carry the chosen answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    kind: StopKind,
    chosen: Option<AnswerId>,
}

impl StopDecision {
    pub const CONTINUE: StopDecision = StopDecision {
        kind: StopKind::Continue,
        chosen: None,
    };

    fn terminal(kind: StopKind, chosen: AnswerId) -> Self {
        Self {
            kind,
            chosen: Some(chosen),
        }
    }

    pub fn kind(&self) -> StopKind {
        self.kind
    }

    pub fn chosen(&self) -> Option<AnswerId> {
        self.chosen
    }

    pub fn is_terminal(&self) -> bool {
        self.kind.is_terminal()
    }
}

/// Model and thresholds frozen at the end of warm-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub model: AnswerModel,
    pub thresholds: Thresholds,
}

/// Per-instance sequential test state. Strictly single-owner.
#[derive(Debug, Clone)]
pub struct SprtStopper {
    config: StopperConfig,
    tally: VoteTally,
    calibration: Option<Calibration>,
    streak: usize,
    last: StopDecision,
}

impl SprtStopper {
    pub fn new(config: StopperConfig, m: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            tally: VoteTally::new(m)?,
            calibration: None,
            streak: 0,
            last: StopDecision::CONTINUE,
        })
    }

    pub fn config(&self) -> &StopperConfig {
        &self.config
    }

    pub fn m(&self) -> usize {
        self.tally.m()
    }

    pub fn tally(&self) -> &VoteTally {
        &self.tally
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.calibration.as_ref()
    }

    pub fn streak(&self) -> usize {
        self.streak
    }

    pub fn last_decision(&self) -> StopDecision {
        self.last
    }

    pub fn is_finished(&self) -> bool {
        self.last.is_terminal()
    }

    fn calibrate(&self) -> Result<Calibration> {
        let m = self.m();
        let p0 = match self.config.p0_mode {
            P0Mode::Fixed(p) => clamp_p0(p, m, self.config.p0_floor_epsilon),
            P0Mode::Adaptive => estimate_p0(&self.tally, &self.config, m)?,
        };
        let model = AnswerModel::new(p0, m)?;
        let thresholds = Thresholds::new(&self.config.budget, &model)?;
        Ok(Calibration { model, thresholds })
    }

    /// Model that would be in force if the test ended now: the frozen one,
    /// or one built from the partial tally before warm-up completes.
    pub fn current_model(&self) -> Result<AnswerModel> {
        if let Some(c) = &self.calibration {
            return Ok(c.model);
        }
        let m = self.m();
        let p0 = match self.config.p0_mode {
            P0Mode::Fixed(p) => clamp_p0(p, m, self.config.p0_floor_epsilon),
            P0Mode::Adaptive => estimate_p0_unchecked(&self.tally, &self.config, m),
        };
        AnswerModel::new(p0, m)
    }

    /// Ingests one vote and returns the decision at the new time step.
    pub fn step(&mut self, vote: AnswerId) -> Result<StopDecision> {
        if self.last.is_terminal() {
            return Err(Error::State("step after a terminal decision"));
        }
        if self.tally.total() >= self.config.m_max as u64 {
            return Err(Error::State("rollout budget already consumed"));
        }
        self.tally.ingest(vote)?;
        let t = self.tally.total() as usize;

        if t < self.config.n_min {
            return Ok(StopDecision::CONTINUE);
        }
        if t == self.config.n_min {
            self.calibration = Some(self.calibrate()?);
        }
        let thresholds = match &self.calibration {
            Some(c) => c.thresholds,
            None => return Err(Error::State("calibration missing after warm-up")),
        };

        let top = self.tally.top_two()?;
        let gap = top.gap as i64;
        if gap >= thresholds.delta_a {
            self.streak += 1;
        } else {
            self.streak = 0;
        }

        let decision = if self.streak >= self.config.streak_k {
            StopDecision::terminal(StopKind::StopLeader, top.leader)
        } else if gap <= thresholds.delta_b {
            // unreachable while the gap is measured leader-minus-runner-up
            StopDecision::terminal(StopKind::StopRunnerUp, top.runner_up)
        } else if t == self.config.m_max {
            StopDecision::terminal(StopKind::BudgetExhausted, top.leader)
        } else {
            StopDecision::CONTINUE
        };
        self.last = decision;
        Ok(decision)
    }

    /// The pseudo-label chosen by the terminal decision.
    pub fn finalize(&self) -> Result<AnswerId> {
        self.last
            .chosen
            .ok_or(Error::State("finalize before a terminal decision"))
    }
}
