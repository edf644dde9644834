//! Deterministic Monte-Carlo experiment runner.
//!
//! Trial `i` uses the random stream seeded with `seed + i`, and results are
//! collected in trial order, so output does not depend on the worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clip::clip_in_place;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::noise::{NoiseModel, NoiseSpec};
use crate::oracle::stochastic_gradient_into;
use crate::problem::ProblemInstance;
use crate::problems::{make_noise, make_problem, ProblemSpec};
use crate::record::{RecordPolicy, RunRecord, TrajectoryPoint};
use crate::schedules::{
    restart_plan_sgd, restart_plan_sstm, sgd_params, GammaTerm, sstm_params, ParamMode, ParamOverrides,
    RestartPlan, ScheduleInputs, SgdConfig, SstmConfig,
};
use crate::sgd::{run_clipped_sgd, run_restarted_sgd, ClipMode, SgdOptions};
use crate::sstm::{run_restarted_sstm, run_sstm, RestartOutcome, StageRecord};
use crate::stats::{binomial_gate, clopper_pearson_lower, quantile_sorted, BinomialGate};
use crate::trial_rng;

/// Level of the binomial acceptance gate.
pub const GATE_LEVEL: f64 = 0.01;
/// One-sided Clopper–Pearson error rate.
pub const CP_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClippedSstm,
    RClippedSstm,
    ClippedSgd,
    RClippedSgd,
    /// Unclipped SGD with the clipped-SGD stepsize, batch size and horizon.
    SgdBaseline,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ClippedSstm => "clipped_sstm",
            Method::RClippedSstm => "r_clipped_sstm",
            Method::ClippedSgd => "clipped_sgd",
            Method::RClippedSgd => "r_clipped_sgd",
            Method::SgdBaseline => "sgd_baseline",
        }
    }

    pub fn is_restarted(&self) -> bool {
        matches!(self, Method::RClippedSstm | Method::RClippedSgd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    pub eps: f64,
    pub beta: f64,
    /// Strong-convexity modulus assumed by restart plans; defaults to the
    /// problem's certified value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default)]
    pub mode: ParamMode,
    #[serde(default, skip_serializing_if = "ParamOverrides::is_empty")]
    pub overrides: ParamOverrides,
    #[serde(default)]
    pub sgd: SgdOptions,
}

/// Starting point: `x0` explicitly, or `x* + r0·e₁`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Bound `R₀ ≥ ‖x0 − x*‖`; defaults to the actual distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub noise: NoiseSpec,
    pub method: Method,
    pub targets: Targets,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default)]
    pub record: RecordPolicy,
}

/// Derived parameters for any method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerivedParams {
    Sstm(SstmConfig),
    Sgd(SgdConfig),
    RestartSstm(RestartPlan<SstmConfig>),
    RestartSgd(RestartPlan<SgdConfig>),
}

impl DerivedParams {
    pub fn warnings(&self) -> Vec<String> {
        match self {
            DerivedParams::Sstm(c) => c.warnings.clone(),
            DerivedParams::RestartSstm(p) => p
                .stages
                .iter()
                .flat_map(|s| s.config.warnings.iter().map(move |w| format!("stage {}: {w}", s.t)))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Oracle calls per trial implied by the schedule.
    pub fn total_oracle_calls(&self) -> u64 {
        match self {
            DerivedParams::Sstm(c) => c.total_oracle_calls(),
            DerivedParams::Sgd(c) => c.total_oracle_calls(),
            DerivedParams::RestartSstm(p) => p.total_oracle_calls(),
            DerivedParams::RestartSgd(p) => p.total_oracle_calls(),
        }
    }

    /// Theorem bound on the final gap (convex methods only).
    pub fn gap_bound(&self) -> Option<f64> {
        match self {
            DerivedParams::Sstm(c) => Some(c.gap_bound()),
            DerivedParams::Sgd(c) => Some(c.gap_bound()),
            _ => None,
        }
    }
}

/// Iteration count with its logarithmic factors divided out, for rate
/// regressions in `ε`.
///
/// clipped-SSTM divides `N` by `a^{(1+ν)/(1+3ν)}`; clipped-SGD divides by the
/// power of `ln(4N/β)` carried by the active stepsize term.
pub fn log_free_iterations(params: &DerivedParams) -> Option<f64> {
    match params {
        DerivedParams::Sstm(c) => {
            let p = (1.0 + c.nu) / (1.0 + 3.0 * c.nu);
            Some(c.n as f64 / c.a.powf(p))
        }
        DerivedParams::Sgd(c) => {
            let l = c.log_factor;
            let d = match c.active_term {
                GammaTerm::Log => l,
                GammaTerm::UnitBatch => l.sqrt(),
                _ => 1.0,
            };
            Some(c.n as f64 / d)
        }
        _ => None,
    }
}

/// Problem, noise, start point and parameters resolved from a spec.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: ProblemInstance,
    pub noise: NoiseModel,
    pub x0: Vector,
    pub r0: f64,
    pub params: DerivedParams,
    pub warnings: Vec<String>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        Ok(())
    }

    pub fn schedule_inputs(&self, p: &ProblemInstance, r0: f64) -> ScheduleInputs {
        ScheduleInputs {
            nu: p.smoothness.nu,
            m_nu: p.smoothness.m_nu,
            eps: self.targets.eps,
            beta: self.targets.beta,
            r0,
            sigma: self.noise.sigma(),
        }
    }

    /// Build the problem and derive all method parameters.
    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let problem = make_problem(&self.problem)?;
        let noise = make_noise(&self.noise, problem.dim())?;
        let n = problem.dim();
        let xs = problem.x_star.clone().unwrap_or_else(|| Vector::zeros(n));
        let mut warnings = Vec::new();
        let (x0, r0) = match (&self.start.x0, self.start.r0) {
            (Some(x0), r0) => {
                let x0 = Vector::from_slice(x0)?;
                x0.check_dim(n)?;
                let d = x0.dist(&xs);
                let r0 = r0.unwrap_or(d);
                if d > r0 * (1.0 + 1e-12) {
                    warnings.push(format!("start distance {d:.6e} exceeds r0 = {r0:.6e}"));
                }
                (x0, r0)
            }
            (None, Some(r0)) => {
                let mut x0 = xs.clone();
                x0[0] += r0;
                (x0, r0)
            }
            (None, None) => {
                return Err(Error::param("start", "give `x0`, `r0`, or both"));
            }
        };
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::param("r0", format!("must be positive, got {r0}")));
        }
        let inp = self.schedule_inputs(&problem, r0);
        let mode = self.params.mode;
        let ov = &self.params.overrides;
        if mode != ParamMode::Manual && !ov.is_empty() {
            return Err(Error::param("overrides", "overrides require mode = \"manual\""));
        }
        let mu = || -> Result<f64> {
            let mu = self.targets.mu.unwrap_or(problem.mu);
            if !(mu > 0.0) {
                return Err(Error::param("mu", "restarted methods need a strongly convex problem (mu > 0)"));
            }
            Ok(mu)
        };
        let params = match self.method {
            Method::ClippedSstm => DerivedParams::Sstm(sstm_params(&inp, mode)?.with_overrides(ov)?),
            Method::ClippedSgd | Method::SgdBaseline => {
                DerivedParams::Sgd(sgd_params(&inp, mode)?.with_overrides(ov)?)
            }
            Method::RClippedSstm => DerivedParams::RestartSstm(
                restart_plan_sstm(mu()?, &inp, mode)?.map_configs(|c| c.with_overrides(ov))?,
            ),
            Method::RClippedSgd => DerivedParams::RestartSgd(
                restart_plan_sgd(mu()?, &inp, mode)?.map_configs(|c| c.with_overrides(ov))?,
            ),
        };
        warnings.extend(params.warnings());
        Ok(Resolved {
            problem,
            noise,
            x0,
            r0,
            params,
            warnings,
        })
    }

    fn sgd_options(&self) -> SgdOptions {
        let mut o = self.params.sgd;
        if self.method == Method::SgdBaseline {
            o.clip = ClipMode::None;
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_id: u64,
    pub seed: u64,
    /// `f(output) − f*`; `+∞` for diverged trials.
    pub final_gap: f64,
    pub final_dist_sq: f64,
    pub total_oracle_calls: u64,
    pub diverged: bool,
    pub success: bool,
    pub max_dist_from_xstar: f64,
    /// Every restart stage met `‖x̂^t − x*‖² ≤ R₀²/2^t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_halving_ok: Option<bool>,
    pub left_certified_ball: bool,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub summary: TrialSummary,
    /// Trajectory with iteration and oracle counts cumulative over stages.
    pub trajectory: Vec<TrajectoryPoint>,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q50: f64,
    pub q90: f64,
    pub q95: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        Quantiles {
            q50: quantile_sorted(&v, 0.5),
            q90: quantile_sorted(&v, 0.9),
            q95: quantile_sorted(&v, 0.95),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetQuantiles {
    pub oracle_calls: u64,
    pub gap: Quantiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub method: Method,
    pub trials: u64,
    pub eps: f64,
    pub beta: f64,
    pub successes: u64,
    pub success_rate: f64,
    pub clopper_pearson_lower: f64,
    pub gate: BinomialGate,
    pub divergences: u64,
    pub gap_quantiles: Quantiles,
    pub oracle_call_quantiles: Quantiles,
    pub budget_gap_quantiles: Vec<BudgetQuantiles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halving_successes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halving_gate: Option<BinomialGate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_bound: Option<f64>,
    pub scheduled_oracle_calls: u64,
    pub left_certified_ball: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub params: DerivedParams,
    pub trials: Vec<TrialResult>,
    pub summary: ExperimentSummary,
}

fn flatten(outcome_stages: &[StageRecord]) -> Vec<TrajectoryPoint> {
    let mut out = Vec::new();
    let (mut it0, mut oc0) = (0u64, 0u64);
    for (i, s) in outcome_stages.iter().enumerate() {
        for p in &s.record.points {
            if i > 0 && p.iter == 0 {
                continue; // duplicates the previous stage's final point
            }
            out.push(TrajectoryPoint {
                iter: p.iter + it0,
                oracle_calls: p.oracle_calls + oc0,
                ..*p
            });
        }
        it0 += s.record.iterations;
        oc0 += s.record.oracle_calls;
    }
    out
}

fn diverged_summary(id: u64, seed: u64, calls: u64) -> TrialSummary {
    TrialSummary {
        trial_id: id,
        seed,
        final_gap: f64::INFINITY,
        final_dist_sq: f64::INFINITY,
        total_oracle_calls: calls,
        diverged: true,
        success: false,
        max_dist_from_xstar: f64::INFINITY,
        stage_halving_ok: None,
        left_certified_ball: true,
    }
}

fn run_trial(spec: &ExperimentSpec, r: &Resolved, id: u64) -> Result<TrialResult> {
    let seed = spec.seed.wrapping_add(id);
    let mut rng = trial_rng(seed);
    let (p, noise, x0) = (&r.problem, &r.noise, &r.x0);
    let eps = spec.targets.eps;
    let policy = spec.record;
    let finish = |output: &Vector, rec: &RunRecord, stages: Vec<StageRecord>, halving: Option<bool>| {
        let gap = p.gap(output).unwrap_or(f64::NAN);
        let diverged = rec.diverged || !output.is_finite();
        let summary = if diverged {
            let mut s = diverged_summary(id, seed, rec.oracle_calls);
            s.stage_halving_ok = halving.map(|_| false);
            s
        } else {
            TrialSummary {
                trial_id: id,
                seed,
                final_gap: gap,
                final_dist_sq: p.dist_sq(output).unwrap_or(f64::NAN),
                total_oracle_calls: rec.oracle_calls,
                diverged: false,
                success: gap <= eps,
                max_dist_from_xstar: rec.max_dist.unwrap_or(f64::NAN),
                stage_halving_ok: halving,
                left_certified_ball: rec.left_certified_ball,
            }
        };
        let trajectory = if stages.is_empty() {
            rec.points.clone()
        } else {
            flatten(&stages)
        };
        TrialResult {
            summary,
            trajectory,
            stages,
        }
    };
    let restart_finish = |out: RestartOutcome, tau: usize| {
        let mut merged = RunRecord::default();
        for s in &out.stages {
            merged.oracle_calls += s.record.oracle_calls;
            merged.iterations += s.record.iterations;
            merged.diverged |= s.record.diverged;
            merged.left_certified_ball |= s.record.left_certified_ball;
            if let Some(d) = s.record.max_dist {
                merged.max_dist = Some(merged.max_dist.map_or(d, |m: f64| m.max(d)));
            }
        }
        let halving = out.stages.len() == tau
            && out.stages.iter().all(|s| s.halving_ok().unwrap_or(false));
        finish(&out.output, &merged, out.stages, Some(halving))
    };
    let res = match &r.params {
        DerivedParams::Sstm(cfg) => match run_sstm(cfg, p, noise, x0, &mut rng, policy) {
            Ok(o) => finish(&o.output, &o.record, Vec::new(), None),
            Err(Error::NonFinite { .. }) => TrialResult {
                summary: diverged_summary(id, seed, 0),
                trajectory: Vec::new(),
                stages: Vec::new(),
            },
            Err(e) => return Err(e),
        },
        DerivedParams::Sgd(cfg) => {
            let o = run_clipped_sgd(cfg, &spec.sgd_options(), p, noise, x0, &mut rng, policy)?;
            finish(&o.output, &o.record, Vec::new(), None)
        }
        DerivedParams::RestartSstm(plan) => {
            match run_restarted_sstm(plan, p, noise, x0, &mut rng, policy) {
                Ok(o) => restart_finish(o, plan.tau),
                Err(Error::NonFinite { .. }) => {
                    let mut s = diverged_summary(id, seed, 0);
                    s.stage_halving_ok = Some(false);
                    TrialResult {
                        summary: s,
                        trajectory: Vec::new(),
                        stages: Vec::new(),
                    }
                }
                Err(e) => return Err(e),
            }
        }
        DerivedParams::RestartSgd(plan) => {
            let o = run_restarted_sgd(plan, &spec.sgd_options(), p, noise, x0, &mut rng, policy)?;
            restart_finish(o, plan.tau)
        }
    };
    Ok(res)
}

/// Run every trial of `spec` on `workers` threads.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentResult> {
    let resolved = spec.resolve()?;
    run_resolved(spec, &resolved, workers)
}

pub fn run_resolved(spec: &ExperimentSpec, resolved: &Resolved, workers: usize) -> Result<ExperimentResult> {
    let workers = workers.max(1);
    let run = || -> Result<Vec<TrialResult>> {
        (0..spec.trials)
            .into_par_iter()
            .map(|i| run_trial(spec, resolved, i))
            .collect()
    };
    let trials = if workers == 1 {
        (0..spec.trials)
            .map(|i| run_trial(spec, resolved, i))
            .collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::param("workers", e.to_string()))?
            .install(run)?
    };
    let summary = summarize(spec, resolved, &trials)?;
    Ok(ExperimentResult {
        params: resolved.params.clone(),
        trials,
        summary,
    })
}

fn summarize(spec: &ExperimentSpec, r: &Resolved, trials: &[TrialResult]) -> Result<ExperimentSummary> {
    let t = trials.len() as u64;
    let s: Vec<&TrialSummary> = trials.iter().map(|x| &x.summary).collect();
    let successes = s.iter().filter(|x| x.success).count() as u64;
    let p0 = 1.0 - spec.targets.beta;
    let gaps: Vec<f64> = s.iter().map(|x| x.final_gap).collect();
    let calls: Vec<f64> = s.iter().map(|x| x.total_oracle_calls as f64).collect();
    let scheduled = r.params.total_oracle_calls();
    let budget_gap_quantiles = [4u64, 2, 1]
        .iter()
        .filter(|_| trials.iter().all(|x| !x.trajectory.is_empty()))
        .map(|&d| {
            let budget = scheduled / d;
            let g: Vec<f64> = trials
                .iter()
                .map(|x| {
                    if x.summary.diverged {
                        return f64::INFINITY;
                    }
                    x.trajectory
                        .iter()
                        .take_while(|pt| pt.oracle_calls <= budget)
                        .last()
                        .and_then(|pt| pt.f_gap)
                        .unwrap_or(f64::NAN)
                })
                .collect();
            BudgetQuantiles {
                oracle_calls: budget,
                gap: Quantiles::of(&g),
            }
        })
        .collect();
    let (halving_successes, halving_gate) = if spec.method.is_restarted() {
        let h = s.iter().filter(|x| x.stage_halving_ok == Some(true)).count() as u64;
        (Some(h), Some(binomial_gate(h, t, p0, GATE_LEVEL)?))
    } else {
        (None, None)
    };
    Ok(ExperimentSummary {
        method: spec.method,
        trials: t,
        eps: spec.targets.eps,
        beta: spec.targets.beta,
        successes,
        success_rate: successes as f64 / t as f64,
        clopper_pearson_lower: clopper_pearson_lower(successes, t, CP_ALPHA),
        gate: binomial_gate(successes, t, p0, GATE_LEVEL)?,
        divergences: s.iter().filter(|x| x.diverged).count() as u64,
        gap_quantiles: Quantiles::of(&gaps),
        oracle_call_quantiles: Quantiles::of(&calls),
        budget_gap_quantiles,
        halving_successes,
        halving_gate,
        gap_bound: r.params.gap_bound(),
        scheduled_oracle_calls: scheduled,
        left_certified_ball: s.iter().filter(|x| x.left_certified_ball).count() as u64,
        warnings: r.warnings.clone(),
    })
}

/// Monte-Carlo estimates of the clipped mini-batch estimator's bias,
/// distortion and variance at a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipBiasEstimate {
    pub m: u64,
    pub lambda: f64,
    pub draws: u64,
    /// The point violates `‖∇f(x)‖ ≤ λ/2`; nothing was estimated.
    pub skipped: bool,
    /// `‖E g̃ − ∇f(x)‖`
    pub bias: f64,
    pub bias_se: f64,
    pub bias_bound: f64,
    /// `E‖g̃ − ∇f(x)‖²`
    pub distortion: f64,
    pub distortion_se: f64,
    pub distortion_bound: f64,
    /// `E‖g̃ − E g̃‖²`
    pub variance: f64,
    pub variance_se: f64,
    pub variance_bound: f64,
    /// `max ‖g̃ − E g̃‖` over draws, against the bound `2λ`.
    pub max_deviation: f64,
}

impl ClipBiasEstimate {
    pub fn bias_ok(&self) -> bool {
        self.bias <= self.bias_bound + 3.0 * self.bias_se
    }
    pub fn distortion_ok(&self) -> bool {
        self.distortion <= self.distortion_bound + 3.0 * self.distortion_se
    }
    pub fn variance_ok(&self) -> bool {
        self.variance <= self.variance_bound + 3.0 * self.variance_se
    }
    pub fn magnitude_ok(&self) -> bool {
        self.max_deviation <= 2.0 * self.lambda * (1.0 + 1e-12)
    }
    pub fn ok(&self) -> bool {
        self.skipped || (self.bias_ok() && self.distortion_ok() && self.variance_ok() && self.magnitude_ok())
    }
}

/// Estimate the clipping bias, distortion and variance at `x` from `draws`
/// clipped mini-batches of size `m`.
pub fn clip_bias_monte_carlo<R: Rng + Clone>(
    p: &ProblemInstance,
    noise: &NoiseModel,
    x: &Vector,
    lambda: f64,
    m: u64,
    draws: u64,
    rng: &mut R,
) -> Result<ClipBiasEstimate> {
    if m == 0 || draws < 2 {
        return Err(Error::param("draws", "need m ≥ 1 and at least 2 draws"));
    }
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive"));
    }
    x.check_dim(p.dim())?;
    let sigma2 = noise.sigma() * noise.sigma();
    let grad = p.gradient(x);
    let mut est = ClipBiasEstimate {
        m,
        lambda,
        draws,
        skipped: false,
        bias: 0.0,
        bias_se: 0.0,
        bias_bound: 4.0 * sigma2 / (m as f64 * lambda),
        distortion: 0.0,
        distortion_se: 0.0,
        distortion_bound: 18.0 * sigma2 / m as f64,
        variance: 0.0,
        variance_se: 0.0,
        variance_bound: 18.0 * sigma2 / m as f64,
        max_deviation: 0.0,
    };
    if grad.norm() > lambda / 2.0 {
        est.skipped = true;
        return Ok(est);
    }
    let n = p.dim();
    let mut g = Vector::zeros(n);
    if noise.is_deterministic() {
        stochastic_gradient_into(p, noise, x, m, rng, &mut g);
        clip_in_place(&mut g, lambda);
        est.bias = g.dist(&grad);
        est.distortion = est.bias * est.bias;
        return Ok(est);
    }
    let draw = |rng: &mut R, g: &mut Vector| {
        stochastic_gradient_into(p, noise, x, m, rng, g);
        clip_in_place(g, lambda);
    };

    // Pass 1: mean of the clipped estimator.
    let mut replay = rng.clone();
    let mut mean = Vector::zeros(n);
    for _ in 0..draws {
        draw(rng, &mut g);
        mean.axpy(1.0, &g);
    }
    mean.scale(1.0 / draws as f64);

    // Pass 2: replay the same draws for the second moments.
    let (mut d_sum, mut d_sq) = (0.0, 0.0);
    let (mut v_sum, mut v_sq) = (0.0, 0.0);
    let mut max_dev = 0.0_f64;
    for _ in 0..draws {
        draw(&mut replay, &mut g);
        let d = g.dist_sq(&grad);
        let v = g.dist_sq(&mean);
        d_sum += d;
        d_sq += d * d;
        v_sum += v;
        v_sq += v * v;
        max_dev = max_dev.max(v.sqrt());
    }
    let k = draws as f64;
    let se = |s: f64, s2: f64| ((s2 / k - (s / k).powi(2)).max(0.0) / (k - 1.0)).sqrt();
    est.bias = mean.dist(&grad);
    est.distortion = d_sum / k;
    est.distortion_se = se(d_sum, d_sq);
    est.variance = v_sum / k;
    est.variance_se = se(v_sum, v_sq);
    est.bias_se = (est.variance / k).sqrt();
    est.max_deviation = max_dev;
    Ok(est)
}
