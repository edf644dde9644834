//! Problem abstraction: an objective with exact (sub)gradient and a
//! certified Hölder-smoothness description.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Deterministic objective `f: ℝⁿ → ℝ` with a (sub)gradient selection.
pub trait Objective: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    /// Write ∇f(x) into `out`. At kinks, implementations return the
    /// minimal-norm subgradient.
    fn gradient_into(&self, x: &Vector, out: &mut Vector);

    fn gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim());
        self.gradient_into(x, &mut g);
        g
    }

    /// Whether `f` is differentiable everywhere.
    fn differentiable(&self) -> bool {
        true
    }
}

/// `‖∇f(x) − ∇f(y)‖ ≤ m_nu ‖x − y‖^nu` for x, y within `radius` of x*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderSmoothness {
    pub nu: f64,
    pub m_nu: f64,
    /// `f64::INFINITY` for a global certificate.
    pub radius: f64,
}

impl HolderSmoothness {
    pub fn new(nu: f64, m_nu: f64, radius: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::param("nu", format!("must lie in [0, 1], got {nu}")));
        }
        if !(m_nu > 0.0 && m_nu.is_finite()) {
            return Err(Error::param("m_nu", format!("must be positive, got {m_nu}")));
        }
        if !(radius > 0.0) {
            return Err(Error::param("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self { nu, m_nu, radius })
    }
}

/// An objective together with its minimiser, optimal value and certificates.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub objective: Arc<dyn Objective>,
    pub x_star: Option<Vector>,
    pub f_star: Option<f64>,
    pub smoothness: HolderSmoothness,
    /// Strong-convexity modulus; exactly 0 for merely convex instances.
    pub mu: f64,
}

impl ProblemInstance {
    pub fn new(
        objective: Arc<dyn Objective>,
        x_star: Option<Vector>,
        f_star: Option<f64>,
        smoothness: HolderSmoothness,
        mu: f64,
    ) -> Result<Self> {
        if let Some(xs) = &x_star {
            xs.check_dim(objective.dim())?;
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::param("mu", format!("must be finite and ≥ 0, got {mu}")));
        }
        Ok(Self {
            objective,
            x_star,
            f_star,
            smoothness,
            mu,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    #[inline]
    pub fn value(&self, x: &Vector) -> f64 {
        self.objective.value(x)
    }

    #[inline]
    pub fn gradient(&self, x: &Vector) -> Vector {
        self.objective.gradient(x)
    }

    #[inline]
    pub fn gradient_into(&self, x: &Vector, out: &mut Vector) {
        self.objective.gradient_into(x, out)
    }

    /// `f(x) − f*`, or `None` when f* is unknown.
    pub fn gap(&self, x: &Vector) -> Option<f64> {
        self.f_star.map(|fs| self.value(x) - fs)
    }

    /// `‖x − x*‖²`, or `None` when x* is unknown.
    pub fn dist_sq(&self, x: &Vector) -> Option<f64> {
        self.x_star.as_ref().map(|xs| x.dist_sq(xs))
    }

    pub fn nu(&self) -> f64 {
        self.smoothness.nu
    }

    pub fn m_nu(&self) -> f64 {
        self.smoothness.m_nu
    }
}
