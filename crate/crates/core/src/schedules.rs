//! Parameter schedules for clipped-SSTM and clipped-SGD.
//!
//! Every formula works in the log domain where fractional powers are
//! involved; see [`crate::num::fpow`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{fln, fpow, CompensatedSum};

/// Constant `C` in the clipped-SSTM analysis.
pub const C_SSTM: f64 = 2.645_751_311_064_590_6; // √7
/// Constant `C` in the clipped-SGD analysis.
pub const C_SGD: f64 = 7.0;

const A_CONST: f64 = 16384.0;
const SSTM_BATCH_CONST: f64 = 20736.0;
const SGD_BATCH_CONST: f64 = 81.0;
const MAX_FIXED_POINT_ROUNDS: usize = 50;
/// Iteration counts above this are rejected (exact integer range of f64).
pub const MAX_ITERATIONS: f64 = 9_007_199_254_740_992.0;

/// Problem and target constants shared by every schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleInputs {
    pub nu: f64,
    pub m_nu: f64,
    pub eps: f64,
    pub beta: f64,
    pub r0: f64,
    pub sigma: f64,
}

impl ScheduleInputs {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::param("nu", format!("must lie in [0, 1], got {}", self.nu)));
        }
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        pos("m_nu", self.m_nu)?;
        pos("eps", self.eps)?;
        pos("r0", self.r0)?;
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param(
                "beta",
                format!("must lie in the open interval (0, 1), got {}", self.beta),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(
                "sigma",
                format!("must be finite and ≥ 0, got {}", self.sigma),
            ));
        }
        Ok(())
    }
}

/// How the stepsize parameters were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    /// Large-batch theorem parameters.
    #[default]
    Theorem,
    /// Stepsize chosen so that every batch has size one.
    UnitBatch,
    /// Theorem parameters with user overrides applied.
    Manual,
}

/// Parameters that can be overridden in manual mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Fixed batch size for every step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ak_ratio_cap: Option<f64>,
}

impl ParamOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// `ceil(x)` that does not bump values which are integral up to rounding error.
pub fn ceil_batch(x: f64) -> u64 {
    let x = x.max(1.0);
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r {
        r as u64
    } else {
        x.ceil() as u64
    }
}

fn check_log_condition(n: u64, beta: f64, stage: Option<usize>) -> Result<f64> {
    let l = (4.0 * n as f64 / beta).ln();
    if l < 2.0 {
        return Err(Error::LogCondition {
            value: l,
            n,
            beta,
            stage,
        });
    }
    Ok(l)
}

// ---------------------------------------------------------------------------
// clipped-SSTM
// ---------------------------------------------------------------------------

/// Parameter bundle for one clipped-SSTM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SstmConfig {
    pub nu: f64,
    pub m_nu: f64,
    pub eps: f64,
    /// Confidence level entering `ln(4N/β)`; `β/τ` for a restart stage.
    pub beta: f64,
    pub r0: f64,
    pub sigma: f64,
    pub a: f64,
    /// Base stepsize; `α_{k+1} = α (k+1)^{2ν/(1+ν)}`.
    pub alpha: f64,
    /// Clipping scale; `λ_k = B/α_k`.
    pub b: f64,
    pub n: u64,
    pub c: f64,
    /// `ln(4N/β)`.
    pub log_factor: f64,
    pub mode: ParamMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_batch: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ak_ratio_cap: Option<f64>,
    /// Conditions on ε that do not hold for this configuration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Un-ceiled iteration count `X(a)` with `N = ⌈X⌉ + 1`.
pub fn sstm_x(nu: f64, m_nu: f64, eps: f64, r0: f64, a: f64) -> f64 {
    let d = 1.0 + 3.0 * nu;
    let p = (1.0 + nu) / d;
    let ln_x = p * 2f64.ln()
        + p * fln(a)
        + 2.0 * p * C_SSTM.ln()
        + 2.0 * p * fln(r0)
        + 2.0 / d * fln(m_nu)
        - 2.0 / d * fln(eps);
    ln_x.exp()
}

fn sstm_n_from_a(inp: &ScheduleInputs, a: f64) -> Result<u64> {
    let x = sstm_x(inp.nu, inp.m_nu, inp.eps, inp.r0, a);
    if !(x.is_finite() && x < MAX_ITERATIONS) {
        return Err(Error::Overflow(format!(
            "clipped-SSTM iteration count {x:.3e} exceeds 2^53"
        )));
    }
    Ok(x.ceil() as u64 + 1)
}

/// `α = (ε/2)^{(1−ν)/(1+ν)} / (2^{2ν/(1+ν)} a M_ν^{2/(1+ν)})`.
pub fn sstm_alpha(nu: f64, m_nu: f64, eps: f64, a: f64) -> f64 {
    let q = 1.0 + nu;
    let ln_alpha = (1.0 - nu) / q * fln(eps / 2.0)
        - 2.0 * nu / q * 2f64.ln()
        - fln(a)
        - 2.0 / q * fln(m_nu);
    ln_alpha.exp()
}

/// Second term of the unit-batch stepsize parameter, without the log factor.
fn unit_batch_coeff(inp: &ScheduleInputs) -> f64 {
    if inp.sigma == 0.0 {
        return 0.0;
    }
    let nu = inp.nu;
    let q = 1.0 + nu;
    let d = 1.0 + 3.0 * nu;
    let ln_k = d / q * 5184f64.ln()
        + 2.0 * (1.0 + 5.0 * nu) * (1.0 + 2.0 * nu) / (q * q) * 2f64.ln()
        + 2.0 * d / q * inp.sigma.ln()
        + 4.0 * nu / q * (C_SSTM.ln() + inp.r0.ln())
        - 2.0 / q * inp.m_nu.ln()
        - 6.0 * nu / q * inp.eps.ln();
    ln_k.exp()
}

/// Stepsize parameter making every clipped-SSTM batch size equal to one:
/// `a = max{16384 ln²(4N/β), K σ^{2(1+3ν)/(1+ν)} ln^{(1+3ν)/(1+ν)}(4N/β) / …}`.
pub fn sstm_unit_batch_a(
    nu: f64,
    m_nu: f64,
    eps: f64,
    beta: f64,
    r0: f64,
    sigma: f64,
    n: u64,
) -> f64 {
    let inp = ScheduleInputs {
        nu,
        m_nu,
        eps,
        beta,
        r0,
        sigma,
    };
    let l = (4.0 * n as f64 / beta).ln();
    let first = A_CONST * l * l;
    let second = unit_batch_coeff(&inp) * fpow(l, (1.0 + 3.0 * nu) / (1.0 + nu));
    first.max(second)
}

fn sstm_a_of_n(inp: &ScheduleInputs, n: u64, mode: ParamMode) -> f64 {
    match mode {
        ParamMode::UnitBatch => {
            sstm_unit_batch_a(inp.nu, inp.m_nu, inp.eps, inp.beta, inp.r0, inp.sigma, n)
        }
        _ => {
            let l = (4.0 * n as f64 / inp.beta).ln();
            A_CONST * l * l
        }
    }
}

/// Solve the coupled definitions of `N` and `a` by fixed-point iteration.
fn sstm_fixed_point(inp: &ScheduleInputs, mode: ParamMode) -> Result<(u64, f64)> {
    let mut n = 1u64;
    for _ in 0..MAX_FIXED_POINT_ROUNDS {
        let a = sstm_a_of_n(inp, n, mode);
        let next = sstm_n_from_a(inp, a)?;
        if next == n {
            return Ok((n, a));
        }
        n = next;
    }
    Err(Error::NoFixedPoint(MAX_FIXED_POINT_ROUNDS))
}

/// Conditions on ε (as log-domain inequalities `lhs ≤ rhs`) for a given
/// `(a, ln(4N/β))`. Returns the names of the conditions that fail.
pub fn sstm_epsilon_conditions(inp: &ScheduleInputs, a: f64, log_factor: f64) -> Vec<String> {
    let nu = inp.nu;
    let q = 1.0 + nu;
    let d = 1.0 + 3.0 * nu;
    let (le, la, lc, lr, lm, ll, l2) = (
        inp.eps.ln(),
        a.ln(),
        C_SSTM.ln(),
        inp.r0.ln(),
        inp.m_nu.ln(),
        log_factor.ln(),
        2f64.ln(),
    );
    let mut failed = Vec::new();
    let slack = 1e-12;

    let lhs1 = (1.0 - nu) / q * le;
    let rhs1 = la + lc + (1.0 - nu) / q * lm + (1.0 - nu) * lr - 16f64.ln() - ll;
    if lhs1 > rhs1 + slack {
        failed.push("eps^((1-nu)/(1+nu)) <= a C M^((1-nu)/(1+nu)) R0^(1-nu) / (16 ln(4N/beta))".into());
    }

    let rhs2 = q / 2.0 * l2 + q / 2.0 * la + q * lc + q * lr + lm - d / 2.0 * 100f64.ln();
    if le > rhs2 + slack {
        failed.push("eps <= 2^((1+nu)/2) a^((1+nu)/2) C^(1+nu) R0^(1+nu) M / 100^((1+3nu)/2)".into());
    }

    let lhs3 = (1.0 - nu) / d * le;
    let e1 = 2.0 + 4.0 * nu + (3.0 + 8.0 * nu - 5.0 * nu * nu - 6.0 * nu.powi(3)) / (q * d);
    let e2 = 4.0 + 7.0 * nu + (2.0 + 7.0 * nu + 2.0 * nu * nu - 3.0 * nu.powi(3)) / (q * d);
    let t1 = (2.0 + 3.0 * nu - nu * nu) / (2.0 * d) * la - e1 * l2 - ll;
    let t2 = q * q / d * la - e2 * l2 - q * ll;
    let rhs3 = t1.min(t2) + (1.0 - nu * nu) / d * (lc + lr) + (1.0 - nu) / d * lm;
    if lhs3 > rhs3 + slack {
        failed.push("eps^((1-nu)/(1+3nu)) <= min{...} C^((1-nu^2)/(1+3nu)) R0^((1-nu^2)/(1+3nu)) M^((1-nu)/(1+3nu))".into());
    }
    failed
}

fn sstm_build(inp: &ScheduleInputs, n: u64, a: f64, mode: ParamMode, stage: Option<usize>) -> Result<SstmConfig> {
    let log_factor = check_log_condition(n, inp.beta, stage)?;
    let alpha = sstm_alpha(inp.nu, inp.m_nu, inp.eps, a);
    let b = C_SSTM * inp.r0 / (16.0 * log_factor);
    let warnings = sstm_epsilon_conditions(inp, a, log_factor);
    // α_N must stay representable.
    let alpha_n = alpha * fpow(n as f64, 2.0 * inp.nu / (1.0 + inp.nu));
    if !(alpha.is_finite() && alpha > 0.0 && alpha_n.is_finite()) {
        return Err(Error::Overflow(format!("stepsize α = {alpha:e} is not representable")));
    }
    Ok(SstmConfig {
        nu: inp.nu,
        m_nu: inp.m_nu,
        eps: inp.eps,
        beta: inp.beta,
        r0: inp.r0,
        sigma: inp.sigma,
        a,
        alpha,
        b,
        n,
        c: C_SSTM,
        log_factor,
        mode,
        fixed_batch: None,
        ak_ratio_cap: None,
        warnings,
    })
}

/// Theorem-mode clipped-SSTM parameters: `a = 16384 ln²(4N/β)` with `N`
/// from the iteration-count formula, solved jointly.
pub fn sstm_theorem_params(
    nu: f64,
    m_nu: f64,
    eps: f64,
    beta: f64,
    r0: f64,
    sigma: f64,
) -> Result<SstmConfig> {
    sstm_params(
        &ScheduleInputs {
            nu,
            m_nu,
            eps,
            beta,
            r0,
            sigma,
        },
        ParamMode::Theorem,
    )
}

/// Unit-batch clipped-SSTM parameters.
pub fn sstm_unit_batch_params(
    nu: f64,
    m_nu: f64,
    eps: f64,
    beta: f64,
    r0: f64,
    sigma: f64,
) -> Result<SstmConfig> {
    sstm_params(
        &ScheduleInputs {
            nu,
            m_nu,
            eps,
            beta,
            r0,
            sigma,
        },
        ParamMode::UnitBatch,
    )
}

pub fn sstm_params(inp: &ScheduleInputs, mode: ParamMode) -> Result<SstmConfig> {
    sstm_params_stage(inp, mode, None)
}

fn sstm_params_stage(inp: &ScheduleInputs, mode: ParamMode, stage: Option<usize>) -> Result<SstmConfig> {
    inp.validate()?;
    let fp_mode = if mode == ParamMode::Manual {
        ParamMode::Theorem
    } else {
        mode
    };
    let (n, a) = sstm_fixed_point(inp, fp_mode)?;
    sstm_build(inp, n, a, mode, stage)
}

impl SstmConfig {
    pub fn inputs(&self) -> ScheduleInputs {
        ScheduleInputs {
            nu: self.nu,
            m_nu: self.m_nu,
            eps: self.eps,
            beta: self.beta,
            r0: self.r0,
            sigma: self.sigma,
        }
    }

    /// Apply manual overrides. `a` re-derives α and B unless those are
    /// overridden too; `n` re-derives `ln(4N/β)` and B.
    pub fn with_overrides(mut self, o: &ParamOverrides) -> Result<Self> {
        if o.is_empty() {
            return Ok(self);
        }
        if o.gamma.is_some() || o.lambda.is_some() {
            return Err(Error::param("gamma", "gamma/lambda overrides apply to clipped-SGD only"));
        }
        self.mode = ParamMode::Manual;
        if let Some(n) = o.n {
            self.n = n;
            self.log_factor = (4.0 * n as f64 / self.beta).ln();
            self.b = C_SSTM * self.r0 / (16.0 * self.log_factor);
        }
        if let Some(a) = o.a {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::param("a", format!("must be positive, got {a}")));
            }
            self.a = a;
            self.alpha = sstm_alpha(self.nu, self.m_nu, self.eps, a);
        }
        if let Some(alpha) = o.alpha {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
            }
            self.alpha = alpha;
        }
        if let Some(b) = o.b {
            if !(b > 0.0) {
                return Err(Error::param("b", format!("must be positive, got {b}")));
            }
            self.b = b;
        }
        if let Some(m) = o.m {
            if m == 0 {
                return Err(Error::param("m", "batch size must be at least 1"));
            }
            self.fixed_batch = Some(m);
        }
        if let Some(cap) = o.ak_ratio_cap {
            if !(cap > 0.0 && cap <= 1.0) {
                return Err(Error::param("ak_ratio_cap", format!("must lie in (0, 1], got {cap}")));
            }
            self.ak_ratio_cap = Some(cap);
        }
        Ok(self)
    }

    /// `α_k = α k^{2ν/(1+ν)}`, with `α_0 = 0`.
    #[inline]
    pub fn alpha_k(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.alpha * fpow(k as f64, 2.0 * self.nu / (1.0 + self.nu))
        }
    }

    /// Batch size for the step that uses stepsize `α_k`.
    #[inline]
    pub fn batch_for_alpha(&self, alpha_k: f64) -> u64 {
        if let Some(m) = self.fixed_batch {
            return m;
        }
        let x = SSTM_BATCH_CONST * self.n as f64 * self.sigma * self.sigma * alpha_k * alpha_k
            * self.log_factor
            / (self.c * self.c * self.r0 * self.r0);
        ceil_batch(x)
    }

    /// Real-valued batch formula before rounding, for the step using `α_k`.
    pub fn batch_formula(&self, alpha_k: f64) -> f64 {
        SSTM_BATCH_CONST * self.n as f64 * self.sigma * self.sigma * alpha_k * alpha_k * self.log_factor
            / (self.c * self.c * self.r0 * self.r0)
    }

    /// High-probability bound `4aC²R₀²M^{2/(1+ν)} / (N^{(1+3ν)/(1+ν)} ε^{(1−ν)/(1+ν)})`.
    pub fn gap_bound(&self) -> f64 {
        let q = 1.0 + self.nu;
        let ln_b = 4f64.ln() + self.a.ln() + 2.0 * self.c.ln() + 2.0 * self.r0.ln()
            + 2.0 / q * self.m_nu.ln()
            - (1.0 + 3.0 * self.nu) / q * (self.n as f64).ln()
            - (1.0 - self.nu) / q * self.eps.ln();
        ln_b.exp()
    }

    /// Total oracle calls `Σ_{k<N} m_k`.
    pub fn total_oracle_calls(&self) -> u64 {
        sstm_schedule(self, self.n).map(|e| e.m_k).sum()
    }
}

/// One row of the clipped-SSTM schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub k: u64,
    pub alpha_k: f64,
    pub a_k: f64,
    /// `B/α_k`; infinite at `k = 0`.
    pub lambda_k: f64,
    /// Batch drawn in the step that produces iterate `k`; 0 at `k = 0`.
    pub m_k: u64,
    pub l_k: f64,
}

/// Lazy iterator over schedule entries `k = 0..=k_max`.
#[derive(Debug, Clone)]
pub struct SstmSchedule<'a> {
    cfg: &'a SstmConfig,
    k: u64,
    k_max: u64,
    sum: CompensatedSum,
}

impl Iterator for SstmSchedule<'_> {
    type Item = ScheduleEntry;

    fn next(&mut self) -> Option<ScheduleEntry> {
        if self.k > self.k_max {
            return None;
        }
        let k = self.k;
        self.k += 1;
        if k == 0 {
            return Some(ScheduleEntry {
                k: 0,
                alpha_k: 0.0,
                a_k: 0.0,
                lambda_k: f64::INFINITY,
                m_k: 0,
                l_k: 0.0,
            });
        }
        let cfg = self.cfg;
        let alpha_k = cfg.alpha_k(k);
        self.sum.add(alpha_k);
        let a_k = self.sum.value();
        Some(ScheduleEntry {
            k,
            alpha_k,
            a_k,
            lambda_k: cfg.b / alpha_k,
            m_k: cfg.batch_for_alpha(alpha_k),
            l_k: l_k(cfg.nu, cfg.m_nu, cfg.eps, a_k, alpha_k),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = (self.k_max + 1).saturating_sub(self.k) as usize;
        (r, Some(r))
    }
}

/// Schedule entries `0..=k_max` (`k_max` is clamped to `N`).
pub fn sstm_schedule(cfg: &SstmConfig, k_max: u64) -> SstmSchedule<'_> {
    SstmSchedule {
        cfg,
        k: 0,
        k_max: k_max.min(cfg.n),
        sum: CompensatedSum::new(),
    }
}

/// Smoothness surrogate `L_k = (2A_k/(α_k ε))^{(1−ν)/(1+ν)} M_ν^{2/(1+ν)}`, `L_0 = 0`.
pub fn l_k(nu: f64, m_nu: f64, eps: f64, a_k: f64, alpha_k: f64) -> f64 {
    if alpha_k == 0.0 {
        return 0.0;
    }
    let q = 1.0 + nu;
    fpow(2.0 * a_k / (alpha_k * eps), (1.0 - nu) / q) * fpow(m_nu, 2.0 / q)
}

/// Which of the three schedule inequalities failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleInequality {
    /// `A_k ≥ a L_k α_k²`
    Curvature,
    /// `A_k ≥ k^{(1+3ν)/(1+ν)} (ε/2)^{(1−ν)/(1+ν)} / (2^{(1+3ν)/(1+ν)} a M^{2/(1+ν)})`
    Lower,
    /// `A_k ≤ k^{(1+3ν)/(1+ν)} (ε/2)^{(1−ν)/(1+ν)} / (2^{2ν/(1+ν)} a M^{2/(1+ν)})`
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleViolation {
    pub k: u64,
    pub inequality: ScheduleInequality,
    pub a_k: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCheckReport {
    pub k_max: u64,
    pub first_violation: Option<ScheduleViolation>,
    /// `max_k |A_k − a L_k α_k²| / A_k`.
    pub max_curvature_gap: f64,
}

impl ScheduleCheckReport {
    pub fn ok(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Relative slack of the schedule inequalities.
pub const SCHEDULE_REL_TOL: f64 = 1e-9;

/// Check the three schedule inequalities for every `k ≤ k_max`, with the
/// stepsize taken from `cfg.alpha` and the constant `a` from `cfg.a`.
pub fn schedule_inequality_check(cfg: &SstmConfig, k_max: u64) -> ScheduleCheckReport {
    let nu = cfg.nu;
    let q = 1.0 + nu;
    let p = (1.0 + 3.0 * nu) / q;
    let base = fpow(cfg.eps / 2.0, (1.0 - nu) / q) / (cfg.a * fpow(cfg.m_nu, 2.0 / q));
    let lo_c = base / fpow(2.0, p);
    let hi_c = base / fpow(2.0, 2.0 * nu / q);
    let mut sum = CompensatedSum::new();
    let mut max_gap = 0.0_f64;
    for k in 1..=k_max {
        let alpha_k = cfg.alpha * fpow(k as f64, 2.0 * nu / q);
        sum.add(alpha_k);
        let a_k = sum.value();
        let lk = l_k(nu, cfg.m_nu, cfg.eps, a_k, alpha_k);
        let curv = cfg.a * lk * alpha_k * alpha_k;
        max_gap = max_gap.max((a_k - curv).abs() / a_k);
        let kp = fpow(k as f64, p);
        let checks = [
            (ScheduleInequality::Curvature, a_k >= curv * (1.0 - SCHEDULE_REL_TOL), curv),
            (ScheduleInequality::Lower, a_k >= lo_c * kp * (1.0 - SCHEDULE_REL_TOL), lo_c * kp),
            (ScheduleInequality::Upper, a_k <= hi_c * kp * (1.0 + SCHEDULE_REL_TOL), hi_c * kp),
        ];
        for (which, ok, bound) in checks {
            if !ok {
                return ScheduleCheckReport {
                    k_max,
                    first_violation: Some(ScheduleViolation {
                        k,
                        inequality: which,
                        a_k,
                        bound,
                    }),
                    max_curvature_gap: max_gap,
                };
            }
        }
    }
    ScheduleCheckReport {
        k_max,
        first_violation: None,
        max_curvature_gap: max_gap,
    }
}

// ---------------------------------------------------------------------------
// clipped-SGD
// ---------------------------------------------------------------------------

/// Which candidate stepsize attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaTerm {
    /// `ε^{(1−ν)/(1+ν)} / (8 M^{2/(1+ν)})`
    Smoothness,
    /// `R₀ / (√(2N) ε^{ν/(1+ν)} M^{1/(1+ν)})`
    Horizon,
    /// `R₀^{1−ν} / (2 C^ν M ln(4N/β))`
    Log,
    /// `R₀ / (9σ √(N ln(4N/β)))`
    UnitBatch,
    /// User override.
    Manual,
}

/// Parameter bundle for one clipped-SGD run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub nu: f64,
    pub m_nu: f64,
    pub eps: f64,
    pub beta: f64,
    pub r0: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub m: u64,
    pub n: u64,
    pub c: f64,
    pub log_factor: f64,
    pub mode: ParamMode,
    pub active_term: GammaTerm,
}

/// Candidate stepsizes for a given `N`.
pub fn sgd_gamma_terms(inp: &ScheduleInputs, n: u64, unit_batch: bool) -> [(GammaTerm, f64); 4] {
    let nu = inp.nu;
    let q = 1.0 + nu;
    let nf = n as f64;
    let l = (4.0 * nf / inp.beta).ln();
    let g1 = fpow(inp.eps, (1.0 - nu) / q) / (8.0 * fpow(inp.m_nu, 2.0 / q));
    let g2 = inp.r0 / ((2.0 * nf).sqrt() * fpow(inp.eps, nu / q) * fpow(inp.m_nu, 1.0 / q));
    let g3 = fpow(inp.r0, 1.0 - nu) / (2.0 * fpow(C_SGD, nu) * inp.m_nu * l);
    let g4 = if unit_batch && inp.sigma > 0.0 {
        inp.r0 / (9.0 * inp.sigma * (nf * l).sqrt())
    } else {
        f64::INFINITY
    };
    [
        (GammaTerm::Smoothness, g1),
        (GammaTerm::Horizon, g2),
        (GammaTerm::Log, g3),
        (GammaTerm::UnitBatch, g4),
    ]
}

fn sgd_gamma(inp: &ScheduleInputs, n: u64, unit_batch: bool) -> (GammaTerm, f64) {
    sgd_gamma_terms(inp, n, unit_batch)
        .into_iter()
        .fold((GammaTerm::Smoothness, f64::INFINITY), |best, t| {
            if t.1 < best.1 {
                t
            } else {
                best
            }
        })
}

fn sgd_bound_ok(inp: &ScheduleInputs, n: u64, unit_batch: bool) -> bool {
    let (_, g) = sgd_gamma(inp, n, unit_batch);
    C_SGD * C_SGD * inp.r0 * inp.r0 / (g * n as f64) <= inp.eps
}

/// Smallest `N` with `C²R₀²/(γ(N) N) ≤ ε`; `γ(N)N` is nondecreasing in `N`.
fn sgd_min_n(inp: &ScheduleInputs, unit_batch: bool) -> Result<u64> {
    let limit = MAX_ITERATIONS as u64;
    let mut hi = 1u64;
    while !sgd_bound_ok(inp, hi, unit_batch) {
        if hi >= limit {
            return Err(Error::Overflow(
                "clipped-SGD iteration count exceeds 2^53".into(),
            ));
        }
        hi = (hi * 2).min(limit);
    }
    let mut lo = hi / 2; // bound fails at lo (or lo = 0)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if sgd_bound_ok(inp, mid, unit_batch) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn sgd_params(inp: &ScheduleInputs, mode: ParamMode) -> Result<SgdConfig> {
    sgd_params_stage(inp, mode, None)
}

fn sgd_params_stage(inp: &ScheduleInputs, mode: ParamMode, stage: Option<usize>) -> Result<SgdConfig> {
    inp.validate()?;
    let unit = mode == ParamMode::UnitBatch;
    let n = sgd_min_n(inp, unit)?;
    let log_factor = check_log_condition(n, inp.beta, stage)?;
    let (term, gamma) = sgd_gamma(inp, n, unit);
    let lambda = inp.r0 / (gamma * log_factor);
    let m = ceil_batch(SGD_BATCH_CONST * n as f64 * inp.sigma * inp.sigma / (lambda * lambda * log_factor));
    Ok(SgdConfig {
        nu: inp.nu,
        m_nu: inp.m_nu,
        eps: inp.eps,
        beta: inp.beta,
        r0: inp.r0,
        sigma: inp.sigma,
        gamma,
        lambda,
        m,
        n,
        c: C_SGD,
        log_factor,
        mode,
        active_term: term,
    })
}

/// Theorem-mode clipped-SGD parameters.
pub fn sgd_theorem_params(
    nu: f64,
    m_nu: f64,
    eps: f64,
    beta: f64,
    r0: f64,
    sigma: f64,
) -> Result<SgdConfig> {
    sgd_params(
        &ScheduleInputs {
            nu,
            m_nu,
            eps,
            beta,
            r0,
            sigma,
        },
        ParamMode::Theorem,
    )
}

impl SgdConfig {
    pub fn inputs(&self) -> ScheduleInputs {
        ScheduleInputs {
            nu: self.nu,
            m_nu: self.m_nu,
            eps: self.eps,
            beta: self.beta,
            r0: self.r0,
            sigma: self.sigma,
        }
    }

    /// Apply manual overrides. `gamma` or `n` re-derive λ and m unless those
    /// are overridden too.
    pub fn with_overrides(mut self, o: &ParamOverrides) -> Result<Self> {
        if o.is_empty() {
            return Ok(self);
        }
        if o.a.is_some() || o.alpha.is_some() || o.b.is_some() || o.ak_ratio_cap.is_some() {
            return Err(Error::param("a", "a/alpha/b/ak_ratio_cap overrides apply to clipped-SSTM only"));
        }
        self.mode = ParamMode::Manual;
        if let Some(n) = o.n {
            if n == 0 {
                return Err(Error::param("n", "must be at least 1"));
            }
            self.n = n;
            self.log_factor = (4.0 * n as f64 / self.beta).ln();
        }
        if let Some(g) = o.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::param("gamma", format!("must be positive, got {g}")));
            }
            self.gamma = g;
            self.active_term = GammaTerm::Manual;
        }
        self.lambda = self.r0 / (self.gamma * self.log_factor);
        if let Some(l) = o.lambda {
            if !(l > 0.0) {
                return Err(Error::param("lambda", format!("must be positive, got {l}")));
            }
            self.lambda = l;
        }
        self.m = ceil_batch(
            SGD_BATCH_CONST * self.n as f64 * self.sigma * self.sigma
                / (self.lambda * self.lambda * self.log_factor),
        );
        if let Some(m) = o.m {
            if m == 0 {
                return Err(Error::param("m", "batch size must be at least 1"));
            }
            self.m = m;
        }
        Ok(self)
    }

    /// High-probability bound `C²R₀²/(γN)`.
    pub fn gap_bound(&self) -> f64 {
        self.c * self.c * self.r0 * self.r0 / (self.gamma * self.n as f64)
    }

    pub fn total_oracle_calls(&self) -> u64 {
        self.n * self.m
    }
}

// ---------------------------------------------------------------------------
// Restarts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartStage<C> {
    /// Stage index, starting at 1.
    pub t: usize,
    pub eps_t: f64,
    /// Effective initial radius `R₀/2^{(t−1)/2}`.
    pub r_t: f64,
    pub config: C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartPlan<C> {
    pub tau: usize,
    pub mu: f64,
    pub eps: f64,
    pub beta: f64,
    pub r0: f64,
    pub stages: Vec<RestartStage<C>>,
}

/// Number of restarts `τ = max{1, ⌈log₂(μR₀²/ε)⌉ − 1}`.
pub fn restart_count(mu: f64, r0: f64, eps: f64) -> usize {
    let t = (mu * r0 * r0 / eps).log2().ceil() - 1.0;
    if t < 1.0 {
        1
    } else {
        t as usize
    }
}

fn restart_stages<C>(
    mu: f64,
    inp: &ScheduleInputs,
    mut build: impl FnMut(&ScheduleInputs, usize) -> Result<C>,
) -> Result<RestartPlan<C>> {
    inp.validate()?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", format!("restarts need mu > 0, got {mu}")));
    }
    let tau = restart_count(mu, inp.r0, inp.eps);
    if tau > 200 {
        return Err(Error::param("eps", format!("needs {tau} restarts; refusing more than 200")));
    }
    let beta_t = inp.beta / tau as f64;
    let mut stages = Vec::with_capacity(tau);
    for t in 1..=tau {
        let eps_t = mu * inp.r0 * inp.r0 / 2f64.powi(t as i32 + 1);
        let r_t = inp.r0 / 2f64.powf((t as f64 - 1.0) / 2.0);
        let stage_inp = ScheduleInputs {
            eps: eps_t,
            beta: beta_t,
            r0: r_t,
            ..*inp
        };
        stages.push(RestartStage {
            t,
            eps_t,
            r_t,
            config: build(&stage_inp, t)?,
        });
    }
    Ok(RestartPlan {
        tau,
        mu,
        eps: inp.eps,
        beta: inp.beta,
        r0: inp.r0,
        stages,
    })
}

/// Restart plan for R-clipped-SSTM.
pub fn restart_plan_sstm(mu: f64, inp: &ScheduleInputs, mode: ParamMode) -> Result<RestartPlan<SstmConfig>> {
    restart_stages(mu, inp, |s, t| sstm_params_stage(s, mode, Some(t)))
}

/// Restart plan for R-clipped-SGD.
pub fn restart_plan_sgd(mu: f64, inp: &ScheduleInputs, mode: ParamMode) -> Result<RestartPlan<SgdConfig>> {
    restart_stages(mu, inp, |s, t| sgd_params_stage(s, mode, Some(t)))
}

impl RestartPlan<SstmConfig> {
    pub fn total_oracle_calls(&self) -> u64 {
        self.stages.iter().map(|s| s.config.total_oracle_calls()).sum()
    }

    pub fn total_iterations(&self) -> u64 {
        self.stages.iter().map(|s| s.config.n).sum()
    }
}

impl RestartPlan<SgdConfig> {
    pub fn total_oracle_calls(&self) -> u64 {
        self.stages.iter().map(|s| s.config.total_oracle_calls()).sum()
    }

    pub fn total_iterations(&self) -> u64 {
        self.stages.iter().map(|s| s.config.n).sum()
    }
}

impl<C> RestartPlan<C> {
    pub fn map_configs<D>(self, mut f: impl FnMut(C) -> Result<D>) -> Result<RestartPlan<D>> {
        let stages = self
            .stages
            .into_iter()
            .map(|s| {
                Ok(RestartStage {
                    t: s.t,
                    eps_t: s.eps_t,
                    r_t: s.r_t,
                    config: f(s.config)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RestartPlan {
            tau: self.tau,
            mu: self.mu,
            eps: self.eps,
            beta: self.beta,
            r0: self.r0,
            stages,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inp(nu: f64, m: f64, eps: f64, beta: f64, r0: f64, sigma: f64) -> ScheduleInputs {
        ScheduleInputs {
            nu,
            m_nu: m,
            eps,
            beta,
            r0,
            sigma,
        }
    }

    #[test]
    fn sqrt7_constant() {
        assert_eq!(C_SSTM, 7f64.sqrt());
    }

    #[test]
    fn rejects_bad_beta() {
        let e = sstm_theorem_params(1.0, 1.0, 0.01, 1.5, 1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::InvalidParameter { name: "beta", .. }));
    }

    #[test]
    fn theorem_fixed_point_is_consistent() {
        let cfg = sstm_theorem_params(0.5, 2.0, 1e-2, 0.05, 1.0, 1.0).unwrap();
        let l = (4.0 * cfg.n as f64 / cfg.beta).ln();
        assert_eq!(cfg.a, 16384.0 * l * l);
        assert_eq!(cfg.n, sstm_x(0.5, 2.0, 1e-2, 1.0, cfg.a).ceil() as u64 + 1);
        assert!((cfg.b - C_SSTM / (16.0 * l)).abs() < 1e-15);
    }

    #[test]
    fn alpha_series_at_nu_one() {
        let mut cfg = sstm_theorem_params(1.0, 1.0, 1e-2, 0.05, 1.0, 0.0).unwrap();
        cfg.alpha = 0.1;
        let e: Vec<_> = sstm_schedule(&cfg, 5).collect();
        assert!((e[5].alpha_k - 0.5).abs() < 1e-15);
        assert!((e[5].a_k - 1.5).abs() < 1e-14);
        assert_eq!(e[0].alpha_k, 0.0);
        assert_eq!(e[0].a_k, 0.0);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(restart_count(1.0, 1.0, 0.25), 1);
        assert_eq!(restart_count(1.0, 1.0, 2f64.powi(-11)), 10);
        assert_eq!(restart_count(1.0, 1.0, 2f64.powi(-6)), 5);
    }

    #[test]
    fn sgd_zero_noise_unit_batch() {
        let cfg = sgd_params(&inp(1.0, 1.0, 1e-2, 0.05, 1.0, 0.0), ParamMode::Theorem).unwrap();
        assert_eq!(cfg.m, 1);
        assert!((cfg.lambda * cfg.gamma * cfg.log_factor - cfg.r0).abs() < 1e-12);
        assert!(cfg.gap_bound() <= cfg.eps);
    }

    #[test]
    fn sgd_n_is_minimal() {
        let i = inp(0.0, 1.0, 1e-2, 0.05, 1.0, 1.0);
        let cfg = sgd_params(&i, ParamMode::Theorem).unwrap();
        assert!(sgd_bound_ok(&i, cfg.n, false));
        assert!(!sgd_bound_ok(&i, cfg.n - 1, false));
    }

    #[test]
    fn ceil_batch_rounding() {
        assert_eq!(ceil_batch(0.3), 1);
        assert_eq!(ceil_batch(1.0 + 1e-14), 1);
        assert_eq!(ceil_batch(1.01), 2);
        assert_eq!(ceil_batch(7.0), 7);
    }
}
