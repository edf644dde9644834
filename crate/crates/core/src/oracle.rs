//! Mini-batched stochastic gradients and smoothness diagnostics.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::noise::NoiseModel;
use crate::num::fpow;
use crate::problem::{HolderSmoothness, ProblemInstance};

/// Relative slack used by certificate checks.
pub const CERT_REL_TOL: f64 = 1e-9;
/// Absolute floor used by certificate checks.
pub const CERT_ABS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticGradientSample {
    pub value: Vector,
    pub batch_size: u64,
    pub oracle_calls_consumed: u64,
}

/// Average of `m` i.i.d. draws `∇f(x) + ξ_i`.
pub fn batched_stochastic_gradient<R: Rng + ?Sized>(
    p: &ProblemInstance,
    noise: &NoiseModel,
    x: &Vector,
    m: u64,
    rng: &mut R,
) -> Result<StochasticGradientSample> {
    if m == 0 {
        return Err(Error::param("m", "batch size must be at least 1"));
    }
    x.check_dim(p.dim())?;
    if noise.dim() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: noise.dim(),
        });
    }
    let mut value = Vector::zeros(p.dim());
    stochastic_gradient_into(p, noise, x, m, rng, &mut value);
    Ok(StochasticGradientSample {
        value,
        batch_size: m,
        oracle_calls_consumed: m,
    })
}

/// Unchecked in-place form of [`batched_stochastic_gradient`] used by the solvers.
#[inline]
pub fn stochastic_gradient_into<R: Rng + ?Sized>(
    p: &ProblemInstance,
    noise: &NoiseModel,
    x: &Vector,
    m: u64,
    rng: &mut R,
    out: &mut Vector,
) {
    p.gradient_into(x, out);
    noise.add_batch_mean(rng, m, out);
}

/// Worst ratio `‖∇f(x) − ∇f(y)‖ / ‖x − y‖^ν` over random pairs in the
/// certified ball around x* (the origin when x* is unknown).
///
/// Global certificates are probed on a ball of radius 10.
pub fn holder_certificate_check<R: Rng + ?Sized>(
    p: &ProblemInstance,
    pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    holder_certificate_check_in(p, pairs, p.smoothness.radius.min(10.0), rng)
}

pub fn holder_certificate_check_in<R: Rng + ?Sized>(
    p: &ProblemInstance,
    pairs: usize,
    radius: f64,
    rng: &mut R,
) -> Result<f64> {
    if pairs == 0 {
        return Err(Error::param("pairs", "must be at least 1"));
    }
    let n = p.dim();
    let center = p.x_star.clone().unwrap_or_else(|| Vector::zeros(n));
    let HolderSmoothness { nu, m_nu, .. } = p.smoothness;
    let bound = m_nu * (1.0 + CERT_REL_TOL) + CERT_ABS_TOL;
    let mut worst = 0.0_f64;
    let mut gx = Vector::zeros(n);
    let mut gy = Vector::zeros(n);
    for i in 0..pairs {
        let x = uniform_in_ball(rng, &center, radius);
        let y = if i % 2 == 0 {
            uniform_in_ball(rng, &center, radius)
        } else {
            // Close pairs probe the local behaviour near kinks.
            let scale = radius * 10f64.powf(-6.0 * rng.random::<f64>());
            let mut y = uniform_in_ball(rng, &x, scale);
            project_to_ball(&mut y, &center, radius);
            y
        };
        let d = x.dist(&y);
        if d == 0.0 {
            continue;
        }
        p.gradient_into(&x, &mut gx);
        p.gradient_into(&y, &mut gy);
        let ratio = gx.dist(&gy) / fpow(d, nu);
        if ratio > bound {
            return Err(Error::CertificateViolation {
                ratio,
                bound: m_nu,
                x: x.into_vec(),
                y: y.into_vec(),
            });
        }
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Uniform sample from the Euclidean ball of radius `r` around `c`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, c: &Vector, r: f64) -> Vector {
    let n = c.dim();
    let mut u = Vector::zeros(n);
    loop {
        for v in u.as_mut_slice() {
            *v = StandardNormal.sample(rng);
        }
        let norm = u.norm();
        if norm > 1e-300 {
            let rad = r * rng.random::<f64>().powf(1.0 / n as f64);
            u.scale(rad / norm);
            break;
        }
    }
    u.axpy(1.0, c);
    u
}

fn project_to_ball(y: &mut Vector, c: &Vector, r: f64) {
    let d = y.dist(c);
    if d > r {
        let mut off = y.sub(c);
        off.scale(r / d);
        *y = c.add(&off);
    }
}

/// Gradient-norm bound `‖∇f(x)‖ ≤ ((1+ν)/ν)^{ν/(1+ν)} M_ν^{1/(1+ν)} (f(x)−f*)^{ν/(1+ν)}`.
///
/// The leading factor is 1 at ν = 0.
pub fn gradient_norm_bound(nu: f64, m_nu: f64, gap: f64) -> f64 {
    if nu == 0.0 {
        return m_nu;
    }
    let e = nu / (1.0 + nu);
    fpow((1.0 + nu) / nu, e) * fpow(m_nu, 1.0 / (1.0 + nu)) * fpow(gap.max(0.0), e)
}

/// Squared-gradient bound
/// `‖∇f(x)‖² ≤ 2δ^{−(1−ν)/(1+ν)} M_ν^{2/(1+ν)} (f(x)−f*) + δ^{2ν/(1+ν)} M_ν^{2/(1+ν)}`.
pub fn gradient_sq_bound(nu: f64, m_nu: f64, gap: f64, delta: f64) -> f64 {
    let m2 = fpow(m_nu, 2.0 / (1.0 + nu));
    2.0 * fpow(delta, -(1.0 - nu) / (1.0 + nu)) * m2 * gap.max(0.0)
        + fpow(delta, 2.0 * nu / (1.0 + nu)) * m2
}
