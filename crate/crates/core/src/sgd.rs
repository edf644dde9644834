//! Clipped SGD with averaged output, its restarted wrapper, and unclipped
//! or momentum baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clip::{clip_coordinatewise_in_place, clip_in_place};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::noise::NoiseModel;
use crate::oracle::stochastic_gradient_into;
use crate::problem::ProblemInstance;
use crate::record::{Cadence, RecordPolicy, RunRecord, TrajectoryPoint};
use crate::schedules::{RestartPlan, SgdConfig};
use crate::sstm::{check_restart_problem, RestartOutcome, StageRecord, DIVERGENCE_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Clip the mini-batched gradient to Euclidean norm λ.
    #[default]
    Norm,
    /// Clip every coordinate to `[−λ, λ]`.
    Coordinate,
    /// No clipping (vanilla SGD).
    None,
}

/// Step options beyond the theorem parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SgdOptions {
    #[serde(default)]
    pub clip: ClipMode,
    /// Heavy-ball coefficient; `None` for plain SGD.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SgdState {
    pub k: u64,
    pub x: Vector,
    /// `Σ_{j<k} x^j`.
    pub x_sum: Vector,
    pub oracle_calls: u64,
    pub momentum_buf: Option<Vector>,
    grad: Vector,
}

impl SgdState {
    pub fn new(x0: &Vector, opts: &SgdOptions) -> Self {
        SgdState {
            k: 0,
            x: x0.clone(),
            x_sum: Vector::zeros(x0.dim()),
            oracle_calls: 0,
            momentum_buf: opts.momentum.map(|_| Vector::zeros(x0.dim())),
            grad: Vector::zeros(x0.dim()),
        }
    }

    /// `x̄^k = x_sum / k`; `x^0` before the first step.
    pub fn average(&self) -> Vector {
        if self.k == 0 {
            self.x.clone()
        } else {
            self.x_sum.scaled(1.0 / self.k as f64)
        }
    }
}

/// One step `x^{k+1} = x^k − γ clip(∇̃f(x^k), λ)`.
pub fn sgd_step<R: Rng + ?Sized>(
    state: &mut SgdState,
    cfg: &SgdConfig,
    opts: &SgdOptions,
    p: &ProblemInstance,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<()> {
    if !(cfg.gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    if !(cfg.lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive"));
    }
    state.x_sum.axpy(1.0, &state.x);
    stochastic_gradient_into(p, noise, &state.x, cfg.m, rng, &mut state.grad);
    match opts.clip {
        ClipMode::Norm => {
            clip_in_place(&mut state.grad, cfg.lambda);
        }
        ClipMode::Coordinate => clip_coordinatewise_in_place(&mut state.grad, cfg.lambda),
        ClipMode::None => {}
    }
    match (&mut state.momentum_buf, opts.momentum) {
        (Some(buf), Some(beta)) => {
            buf.scale(beta);
            buf.axpy(1.0, &state.grad);
            state.x.axpy(-cfg.gamma, buf);
        }
        _ => state.x.axpy(-cfg.gamma, &state.grad),
    }
    state.k += 1;
    state.oracle_calls += cfg.m;
    if !state.x.is_finite() {
        return Err(Error::NonFinite {
            k: state.k,
            what: "SGD iterate",
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SgdOutcome {
    /// `x̄^N`; meaningless when the run diverged.
    pub output: Vector,
    pub record: RunRecord,
}

fn record_point(p: &ProblemInstance, st: &SgdState, rec: &mut RunRecord) {
    let avg = st.average();
    let f = p.value(&avg);
    rec.points.push(TrajectoryPoint {
        iter: st.k,
        oracle_calls: st.oracle_calls,
        f_value: f,
        f_gap: p.f_star.map(|fs| f - fs),
        dist_sq: p.dist_sq(&st.x),
    });
}

/// Run `cfg.n` steps and return the average of `x^0, …, x^{N−1}`.
///
/// Divergence (a non-finite iterate or norm above 10³⁰) ends the run early
/// with `record.diverged = true`.
pub fn run_clipped_sgd<R: Rng + ?Sized>(
    cfg: &SgdConfig,
    opts: &SgdOptions,
    p: &ProblemInstance,
    noise: &NoiseModel,
    x0: &Vector,
    rng: &mut R,
    policy: RecordPolicy,
) -> Result<SgdOutcome> {
    x0.check_dim(p.dim())?;
    let mut st = SgdState::new(x0, opts);
    let mut rec = RunRecord::default();
    let mut cadence = Cadence::new(policy, cfg.n);
    let radius = p.smoothness.radius;
    let track = |st: &SgdState, rec: &mut RunRecord| {
        let d = p.dist_sq(&st.x);
        rec.observe_dist(d);
        if let Some(d) = d {
            if d.sqrt() > radius {
                rec.left_certified_ball = true;
            }
        }
    };
    track(&st, &mut rec);
    if cadence.hit(0) {
        record_point(p, &st, &mut rec);
    }
    for _ in 0..cfg.n {
        match sgd_step(&mut st, cfg, opts, p, noise, rng) {
            Ok(()) => {}
            Err(Error::NonFinite { .. }) => {
                rec.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
        if st.x.norm() > DIVERGENCE_NORM {
            rec.diverged = true;
            break;
        }
        track(&st, &mut rec);
        if cadence.hit(st.k) {
            record_point(p, &st, &mut rec);
        }
    }
    rec.oracle_calls = st.oracle_calls;
    rec.iterations = st.k;
    Ok(SgdOutcome {
        output: st.average(),
        record: rec,
    })
}

/// R-clipped-SGD: each stage restarts from the previous stage's average.
pub fn run_restarted_sgd<R: Rng + ?Sized>(
    plan: &RestartPlan<SgdConfig>,
    opts: &SgdOptions,
    p: &ProblemInstance,
    noise: &NoiseModel,
    x0: &Vector,
    rng: &mut R,
    policy: RecordPolicy,
) -> Result<RestartOutcome> {
    check_restart_problem(plan.mu, p)?;
    let mut x = x0.clone();
    let mut stages = Vec::with_capacity(plan.stages.len());
    for stage in &plan.stages {
        let out = run_clipped_sgd(&stage.config, opts, p, noise, &x, rng, policy)?;
        x = out.output;
        let diverged = out.record.diverged;
        stages.push(StageRecord {
            t: stage.t,
            final_gap: p.gap(&x),
            final_dist_sq: p.dist_sq(&x),
            halving_target: plan.r0 * plan.r0 / 2f64.powi(stage.t as i32),
            record: out.record,
        });
        if diverged {
            break;
        }
    }
    Ok(RestartOutcome { output: x, stages })
}
