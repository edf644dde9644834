//! Clipped Stochastic Similar Triangles Method and its restarted wrapper.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clip::clip_in_place;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::noise::NoiseModel;
use crate::oracle::stochastic_gradient_into;
use crate::problem::ProblemInstance;
use crate::record::{Cadence, RecordPolicy, RunRecord, TrajectoryPoint};
use crate::schedules::{sstm_schedule, RestartPlan, ScheduleEntry, SstmConfig};

/// Iterates whose norm exceeds this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e30;

#[derive(Debug, Clone)]
pub struct SstmState {
    pub k: u64,
    /// Extrapolation point `x^k`.
    pub x: Vector,
    /// Output sequence `y^k`.
    pub y: Vector,
    /// Mirror sequence `z^k`.
    pub z: Vector,
    /// Cumulative weight `A_k`.
    pub a: f64,
    pub oracle_calls: u64,
    grad: Vector,
}

impl SstmState {
    pub fn new(x0: &Vector) -> Self {
        SstmState {
            k: 0,
            x: x0.clone(),
            y: x0.clone(),
            z: x0.clone(),
            a: 0.0,
            oracle_calls: 0,
            grad: Vector::zeros(x0.dim()),
        }
    }

    /// Stochastic gradient used in the most recent step, after clipping.
    pub fn last_clipped_gradient(&self) -> &Vector {
        &self.grad
    }
}

/// One clipped-SSTM step from `k` to `k + 1`.
///
/// With `ak_ratio_cap = Some(c)` the weight `A_k/A_{k+1}` in both convex
/// combinations is replaced by `min(A_k/A_{k+1}, c)`.
pub fn sstm_step<R: Rng + ?Sized>(
    state: &mut SstmState,
    entry: &ScheduleEntry,
    p: &ProblemInstance,
    noise: &NoiseModel,
    rng: &mut R,
    ak_ratio_cap: Option<f64>,
) -> Result<()> {
    if entry.k != state.k + 1 {
        return Err(Error::param(
            "entry",
            format!("schedule entry {} does not follow state {}", entry.k, state.k),
        ));
    }
    if !(entry.alpha_k > 0.0) {
        return Err(Error::param("alpha_k", format!("must be positive at k = {}", entry.k)));
    }
    let mut w = state.a / entry.a_k;
    if let Some(cap) = ak_ratio_cap {
        w = w.min(cap);
    }
    Vector::combine_into(&mut state.x, w, &state.y, 1.0 - w, &state.z);
    stochastic_gradient_into(p, noise, &state.x, entry.m_k, rng, &mut state.grad);
    clip_in_place(&mut state.grad, entry.lambda_k);
    state.z.axpy(-entry.alpha_k, &state.grad);
    state.y.scale(w);
    state.y.axpy(1.0 - w, &state.z);
    state.a = entry.a_k;
    state.k = entry.k;
    state.oracle_calls += entry.m_k;
    if !state.z.is_finite() || !state.y.is_finite() {
        return Err(Error::NonFinite {
            k: state.k,
            what: "clipped-SSTM iterate",
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SstmOutcome {
    /// `y^N`.
    pub output: Vector,
    pub record: RunRecord,
}

fn record_point(p: &ProblemInstance, st: &SstmState, rec: &mut RunRecord) {
    let f = p.value(&st.y);
    rec.points.push(TrajectoryPoint {
        iter: st.k,
        oracle_calls: st.oracle_calls,
        f_value: f,
        f_gap: p.f_star.map(|fs| f - fs),
        dist_sq: p.dist_sq(&st.z),
    });
}

/// Run `cfg.n` steps of clipped-SSTM from `x0` and return `y^N`.
pub fn run_sstm<R: Rng + ?Sized>(
    cfg: &SstmConfig,
    p: &ProblemInstance,
    noise: &NoiseModel,
    x0: &Vector,
    rng: &mut R,
    policy: RecordPolicy,
) -> Result<SstmOutcome> {
    x0.check_dim(p.dim())?;
    let mut st = SstmState::new(x0);
    let mut rec = RunRecord::default();
    let mut cadence = Cadence::new(policy, cfg.n);
    let radius = p.smoothness.radius;
    let track = |st: &SstmState, rec: &mut RunRecord| {
        let d = p.dist_sq(&st.z);
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
    for entry in sstm_schedule(cfg, cfg.n).skip(1) {
        sstm_step(&mut st, &entry, p, noise, rng, cfg.ak_ratio_cap)?;
        if st.z.norm() > DIVERGENCE_NORM {
            return Err(Error::NonFinite {
                k: st.k,
                what: "clipped-SSTM iterate (norm above 1e30)",
            });
        }
        track(&st, &mut rec);
        if cadence.hit(st.k) {
            record_point(p, &st, &mut rec);
        }
    }
    rec.oracle_calls = st.oracle_calls;
    rec.iterations = st.k;
    Ok(SstmOutcome {
        output: st.y,
        record: rec,
    })
}

/// Summary of one restart stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub t: usize,
    pub final_gap: Option<f64>,
    pub final_dist_sq: Option<f64>,
    /// `R₀²/2^t`.
    pub halving_target: f64,
    pub record: RunRecord,
}

impl StageRecord {
    pub fn halving_ok(&self) -> Option<bool> {
        self.final_dist_sq.map(|d| d <= self.halving_target)
    }
}

#[derive(Debug, Clone)]
pub struct RestartOutcome {
    /// `x̂^τ`.
    pub output: Vector,
    pub stages: Vec<StageRecord>,
}

impl RestartOutcome {
    pub fn oracle_calls(&self) -> u64 {
        self.stages.iter().map(|s| s.record.oracle_calls).sum()
    }
}

pub(crate) fn check_restart_problem(mu_plan: f64, p: &ProblemInstance) -> Result<()> {
    if !(mu_plan > 0.0) {
        return Err(Error::param("mu", "restart plans need mu > 0"));
    }
    if p.mu < mu_plan {
        return Err(Error::param(
            "mu",
            format!("plan assumes mu = {mu_plan} but the problem certifies only {}", p.mu),
        ));
    }
    Ok(())
}

/// R-clipped-SSTM: run each stage from the previous stage's output.
pub fn run_restarted_sstm<R: Rng + ?Sized>(
    plan: &RestartPlan<SstmConfig>,
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
        let out = run_sstm(&stage.config, p, noise, &x, rng, policy)?;
        x = out.output;
        stages.push(StageRecord {
            t: stage.t,
            final_gap: p.gap(&x),
            final_dist_sq: p.dist_sq(&x),
            halving_target: plan.r0 * plan.r0 / 2f64.powi(stage.t as i32),
            record: out.record,
        });
    }
    Ok(RestartOutcome { output: x, stages })
}
