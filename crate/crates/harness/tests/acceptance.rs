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
//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p rollout-sprt --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::One;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rollout_sprt::config::{AblationAxis, ExperimentConfig, Mode, OutputFormat};
use rollout_sprt::experiment::{run_ablation, run_compare, run_ttpo};
use rollout_sprt::report::ExperimentReport;
use rollout_sprt_core::allocate::allocate;
use rollout_sprt_core::rng::{stream_rng, StreamPurpose};
use rollout_sprt_core::sprt::{gap_thresholds, wald_thresholds};
use rollout_sprt_core::synth::{gen_instances, CategoricalVoteSource, P0Distribution};
use rollout_sprt_core::update::{
    pg_gradient, pg_objective, pg_update, rewarded_samples, sft_update,
};
use rollout_sprt_core::{
    AdvantageMode, AnswerId, AnswerModel, ErrorBudget, P0Mode, RewardedSample, SoftmaxAnswerPolicy,
    StopKind, StopperConfig, UpdateConfig, Vote, VoteTally,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng_for(label: &str) -> ChaCha8Rng {
    stream_rng(0x00AC_CE97, label, StreamPurpose::Instance)
}

fn within(elapsed: Duration, limit_s: u64) -> Outcome {
    if elapsed <= Duration::from_secs(limit_s) {
        Ok(String::new())
    } else {
        Err(format!(
            "runtime {:.1}s exceeds {limit_s}s",
            elapsed.as_secs_f64()
        ))
    }
}

fn closed_form_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_for("closed-form");
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let m = rng.gen_range(2..=10usize);
        let lo = 1.0 / m as f64 + 0.01;
        let p0 = rng.gen_range(lo..0.99);
        let model = AnswerModel::new(p0, m).map_err(|e| e.to_string())?;
        let n = rng.gen_range(1..=200usize);
        let votes = (0..n).map(|_| AnswerId(rng.gen_range(0..m)));
        let tally = VoteTally::from_votes(m, votes).map_err(|e| e.to_string())?;
        let gap = tally.top_two().map_err(|e| e.to_string())?.gap;
        let full = model
            .log_bayes_factor_full(&tally)
            .map_err(|e| e.to_string())?;
        worst = worst.max((full - model.log_bayes_factor_closed_form(gap)).abs());
    }
    within(start.elapsed(), 5)?;
    if worst <= 1e-9 {
        Ok(format!("max |full - closed| = {worst:.2e}"))
    } else {
        Err(format!("max |full - closed| = {worst:.2e} > 1e-9"))
    }
}

fn dec(s: &str) -> BigRational {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits: BigInt = format!("{int}{frac}").parse().unwrap();
    BigRational::new(digits, num::pow(BigInt::from(10), frac.len()))
}

/// Smallest `d >= 1` with `base^d >= target`, in exact arithmetic.
fn smallest_power_at_least(base: &BigRational, target: &BigRational) -> i64 {
    let mut acc = base.clone();
    let mut d = 1;
    while acc < *target {
        acc *= base;
        d += 1;
    }
    d
}

fn rational_thresholds(alpha: &str, beta: &str, p0: &str, m: u32) -> (i64, i64) {
    let one = BigRational::one();
    let (a, b, p) = (dec(alpha), dec(beta), dec(p0));
    let kappa = &p * BigRational::from_integer(BigInt::from(m - 1)) / (&one - &p);
    (
        smallest_power_at_least(&kappa, &((&one - &b) / &a)),
        -smallest_power_at_least(&kappa, &((&one - &a) / &b)),
    )
}

fn float_thresholds(alpha: &str, beta: &str, p0: &str, m: u32) -> Result<(i64, i64), String> {
    let (la, lb) = wald_thresholds(alpha.parse().unwrap(), beta.parse().unwrap())
        .map_err(|e| e.to_string())?;
    let model = AnswerModel::new(p0.parse().unwrap(), m as usize).map_err(|e| e.to_string())?;
    gap_thresholds(la, lb, &model).map_err(|e| e.to_string())
}

fn threshold_grid() -> Outcome {
    const BUDGETS: [&str; 5] = ["0.01", "0.03", "0.05", "0.07", "0.1"];
    let mut checked = 0;
    for alpha in BUDGETS {
        for beta in BUDGETS {
            for p0 in ["0.55", "0.7", "0.8", "0.9"] {
                for m in [2, 4, 8] {
                    let want = rational_thresholds(alpha, beta, p0, m);
                    let got = float_thresholds(alpha, beta, p0, m)?;
                    if got != want {
                        return Err(format!(
                            "alpha={alpha} beta={beta} p0={p0} m={m}: {got:?} != {want:?}"
                        ));
                    }
                    checked += 1;
                }
            }
        }
    }
    let spot = float_thresholds("0.05", "0.05", "0.9", 2)?;
    if spot.0 != 2 {
        return Err(format!(
            "spot alpha=beta=0.05 p0=0.9 m=2: delta_A={} != 2",
            spot.0
        ));
    }
    Ok(format!("{checked} grid points exact, spot delta_A=2"))
}

fn wald_bound() -> Outcome {
    let start = Instant::now();
    let (alpha, beta) = (0.05, 0.05);
    let cfg = StopperConfig {
        budget: ErrorBudget::new(alpha, beta).map_err(|e| e.to_string())?,
        n_min: 1,
        m_max: 10_000,
        streak_k: 1,
        p0_mode: P0Mode::Fixed(0.7),
        ..StopperConfig::default()
    };
    let insts = gen_instances(20_000, 4, &P0Distribution::Constant(0.7), 1, 31)
        .map_err(|e| e.to_string())?;
    let (mut terminal, mut wrong) = (0u64, 0u64);
    for inst in &insts {
        let mut src = CategoricalVoteSource::for_purpose(inst, 31, StreamPurpose::AdaptiveArm);
        let r = allocate(&mut src, &cfg).map_err(|e| e.to_string())?;
        if r.decision_kind == StopKind::StopLeader {
            terminal += 1;
            wrong += u64::from(r.pseudo_label != inst.true_answer);
        }
    }
    within(start.elapsed(), 60)?;
    let rate = wrong as f64 / terminal as f64;
    let bound = alpha / (1.0 - beta) + 0.01;
    let detail = format!("wrong-stop rate {rate:.4} over {terminal} stops (bound {bound:.4})");
    if terminal > 0 && rate <= bound {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mixture_config() -> ExperimentConfig {
    let mut c = ExperimentConfig {
        mode: Mode::Compare,
        ..ExperimentConfig::default()
    };
    c.set("instances", "10000").unwrap();
    c.set("m", "4").unwrap();
    c.set("p0", "mixture:0.5,0.95,0.5").unwrap();
    c.set("seed", "2026").unwrap();
    c
}

/// Savings band frozen from the first validated run of `mixture_config`
/// (0.32898), widened by one percentage point each side.
const SAVINGS_BAND: (f64, f64) = (0.319, 0.339);

fn efficiency() -> Outcome {
    let start = Instant::now();
    let report = run_compare(&mixture_config()).map_err(|e| e.to_string())?;
    within(start.elapsed(), 120)?;
    let a = &report.aggregate;
    let acc = a.pseudo_label_accuracy.unwrap_or(f64::NAN);
    let fixed = a.fixed_accuracy.unwrap_or(f64::NAN);
    let mean_tau = a.mean_tau.unwrap_or(f64::NAN);
    let savings = a.savings_pct.unwrap_or(f64::NAN);
    let detail = format!(
        "adaptive acc {acc:.4}, fixed-64 acc {fixed:.4}, mean tau {mean_tau:.3}, savings {savings:.5} (band {SAVINGS_BAND:?})"
    );
    let ok = acc >= fixed - 0.01
        && mean_tau < 64.0
        && (SAVINGS_BAND.0..=SAVINGS_BAND.1).contains(&savings);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_policy(rng: &mut ChaCha8Rng, m: usize) -> SoftmaxAnswerPolicy {
    SoftmaxAnswerPolicy::new((0..m).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap()
}

fn random_votes(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Vote> {
    (0..n)
        .map(|_| Vote {
            answer: AnswerId(rng.gen_range(0..m)),
            cost: 1,
        })
        .collect()
}

fn central_difference(
    policy: &SoftmaxAnswerPolicy,
    samples: &[RewardedSample],
    reference: &SoftmaxAnswerPolicy,
    beta_kl: f64,
) -> Vec<f64> {
    let h = 1e-5;
    (0..policy.m())
        .map(|j| {
            let shifted = |d: f64| {
                let mut z = policy.logits().to_vec();
                z[j] += d;
                let p = SoftmaxAnswerPolicy::with_temperature(z, policy.temperature()).unwrap();
                pg_objective(&p, samples, reference, beta_kl).unwrap()
            };
            (shifted(h) - shifted(-h)) / (2.0 * h)
        })
        .collect()
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_for("gradient");
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let m = rng.gen_range(2..=10);
        let policy = random_policy(&mut rng, m);
        let reference = random_policy(&mut rng, m);
        let n = rng.gen_range(1..=32);
        let votes = random_votes(&mut rng, m, n);
        let label = AnswerId(rng.gen_range(0..m));
        let mode = [AdvantageMode::MeanBaseline, AdvantageMode::GroupNormalized][trial % 2];
        let beta_kl = [0.0, 1e-3, 1.0][(trial / 2) % 3];
        let cfg = UpdateConfig {
            beta_kl,
            advantage_mode: mode,
            ..UpdateConfig::default()
        };
        let samples = rewarded_samples(&votes, label, &cfg).map_err(|e| e.to_string())?;
        let analytic =
            pg_gradient(&policy, &samples, &reference, &cfg).map_err(|e| e.to_string())?;
        let numeric = central_difference(&policy, &samples, &reference, beta_kl);
        let diff = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = analytic
            .iter()
            .chain(&numeric)
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        worst = worst.max(if scale < 1e-12 { diff } else { diff / scale });
    }
    within(start.elapsed(), 30)?;
    if worst <= 1e-5 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e} > 1e-5"))
    }
}

fn update_sanity() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_for("sft");
    let cfg = UpdateConfig {
        learning_rate: 0.1,
        ..UpdateConfig::default()
    };
    for start_i in 0..500 {
        let m = rng.gen_range(2..=10);
        let mut policy = random_policy(&mut rng, m);
        let g = AnswerId(rng.gen_range(0..m));
        let mut nll = -policy.log_prob(g).map_err(|e| e.to_string())?;
        for step in 0..100 {
            policy = sft_update(&policy, g, &cfg).map_err(|e| e.to_string())?;
            let next = -policy.log_prob(g).map_err(|e| e.to_string())?;
            if next >= nll {
                return Err(format!(
                    "(a) start {start_i} step {step}: nll {next} did not drop below {nll}"
                ));
            }
            nll = next;
        }
    }

    // d E_pi[R] = pi_G (e_G - pi) / T for the indicator reward on G
    let mut rng = rng_for("pg-direction");
    let mut batches = 0;
    let mut min_dir = f64::INFINITY;
    for trial in 0..2000 {
        let m = rng.gen_range(2..=10);
        let policy = random_policy(&mut rng, m);
        let n = rng.gen_range(2..=32);
        let votes = random_votes(&mut rng, m, n);
        let label = votes[rng.gen_range(0..n)].answer;
        let mode = [AdvantageMode::MeanBaseline, AdvantageMode::GroupNormalized][trial % 2];
        let cfg = UpdateConfig {
            beta_kl: 0.0,
            advantage_mode: mode,
            ..UpdateConfig::default()
        };
        let samples = rewarded_samples(&votes, label, &cfg).map_err(|e| e.to_string())?;
        if samples.iter().all(|s| s.reward == samples[0].reward) {
            continue;
        }
        batches += 1;
        let updated = pg_update(&policy, &samples, &policy, &cfg).map_err(|e| e.to_string())?;
        let p = policy.probabilities();
        let pg = p[label.index()];
        let dir: f64 = (0..m)
            .map(|j| {
                let grad_r =
                    pg * (f64::from(u8::from(j == label.index())) - p[j]) / policy.temperature();
                (updated.logits()[j] - policy.logits()[j]) * grad_r
            })
            .sum();
        min_dir = min_dir.min(dir);
    }
    within(start.elapsed(), 30)?;
    // exact zero can round to a tiny negative
    if min_dir >= -1e-15 {
        Ok(format!("(a) 500x100 strict decreases; (b) min directional derivative {min_dir:.2e} over {batches} batches"))
    } else {
        Err(format!("(b) directional derivative {min_dir:.2e} < 0"))
    }
}

fn ttpo_config() -> ExperimentConfig {
    let mut c = ExperimentConfig {
        mode: Mode::TtpoRl,
        ..ExperimentConfig::default()
    };
    c.set("instances", "2000").unwrap();
    c.set("m", "4").unwrap();
    c.set("p0", "constant:0.7").unwrap();
    c.set("advantage_mode", "mean_baseline").unwrap();
    c.set("rounds", "1").unwrap();
    c.set("seed", "7").unwrap();
    c
}

/// Frozen from the first validated run of `ttpo_config`. At p0 = 0.7 the
/// greedy answer is already correct everywhere, so the accuracy margin is 0;
/// the mean true-answer probability gain (5.660e-4) carries the signal.
const GREEDY_MARGIN_BAND: (f64, f64) = (0.0, 0.005);
const TRUE_PROB_GAIN_BAND: (f64, f64) = (5.1e-4, 6.2e-4);

fn closed_loop() -> Outcome {
    let start = Instant::now();
    let report = run_ttpo(&ttpo_config()).map_err(|e| e.to_string())?;
    within(start.elapsed(), 120)?;
    let a = &report.aggregate;
    let pre = a.pre_update_accuracy.unwrap_or(f64::NAN);
    let post = a.post_update_accuracy.unwrap_or(f64::NAN);
    let gain =
        a.mean_true_prob_after.unwrap_or(f64::NAN) - a.mean_true_prob_before.unwrap_or(f64::NAN);
    let margin = post - pre;
    let detail = format!(
        "greedy acc {pre:.4} -> {post:.4} (margin band {GREEDY_MARGIN_BAND:?}), true-answer prob gain {gain:.7} (band {TRUE_PROB_GAIN_BAND:?})"
    );
    let ok = post >= pre
        && (GREEDY_MARGIN_BAND.0..=GREEDY_MARGIN_BAND.1).contains(&margin)
        && (TRUE_PROB_GAIN_BAND.0..=TRUE_PROB_GAIN_BAND.1).contains(&gain);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn renderings(r: &ExperimentReport) -> (String, String) {
    (r.render(OutputFormat::Json), r.render(OutputFormat::Csv))
}

fn determinism() -> Outcome {
    let mut compare = mixture_config();
    compare.set("instances", "2000").unwrap();
    let mut ttpo = ttpo_config();
    ttpo.set("instances", "500").unwrap();
    ttpo.rounds = 2;
    let mut sft = ttpo.clone();
    sft.mode = Mode::TtpoSft;

    let mut checked = 0;
    for cfg in [&compare, &ttpo, &sft] {
        let run = |parallel: bool| {
            let c = ExperimentConfig {
                parallel,
                ..cfg.clone()
            };
            match c.mode {
                Mode::Compare => run_compare(&c),
                _ => run_ttpo(&c),
            }
            .map(|r| renderings(&r))
            .map_err(|e| e.to_string())
        };
        let first = run(true)?;
        if run(true)? != first {
            return Err(format!("{} re-run differs", cfg.mode.as_str()));
        }
        if run(false)? != first {
            return Err(format!(
                "{} serial differs from parallel",
                cfg.mode.as_str()
            ));
        }
        checked += 1;
    }
    let sweep = |parallel: bool| -> Result<Vec<(String, String)>, String> {
        let c = ExperimentConfig {
            parallel,
            ..compare.clone()
        };
        Ok(run_ablation(&c, AblationAxis::NMin, &[8.0, 32.0])
            .map_err(|e| e.to_string())?
            .iter()
            .map(|(_, r)| renderings(r))
            .collect())
    };
    if sweep(true)? != sweep(false)? || sweep(true)? != sweep(true)? {
        return Err("ablation output differs".into());
    }
    Ok(format!(
        "{checked} modes plus ablation byte-identical across re-runs and parallel/serial"
    ))
}

fn ablation_direction() -> Outcome {
    let values = [0.01, 0.05, 0.1];
    let reports = run_ablation(&mixture_config(), AblationAxis::AlphaBeta, &values)
        .map_err(|e| e.to_string())?;
    let savings: Vec<f64> = reports
        .iter()
        .map(|(_, r)| r.aggregate.savings_pct.unwrap_or(f64::NAN))
        .collect();
    let detail = format!("savings_pct at alpha=beta {values:?}: {savings:.4?}");
    if savings.windows(2).all(|w| w[1] >= w[0]) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "closed-form vs full log Bayes factor",
            closed_form_equivalence,
        ),
        ("integer gap thresholds vs rational oracle", threshold_grid),
        ("Wald error bound", wald_bound),
        ("adaptive vs fixed-64 efficiency", efficiency),
        ("policy-gradient finite differences", gradient_check),
        ("update-rule sanity", update_sanity),
        ("closed-loop improvement", closed_loop),
        ("determinism", determinism),
        ("alpha_beta ablation direction", ablation_direction),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
