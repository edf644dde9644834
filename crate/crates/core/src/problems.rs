//! Synthetic objectives with exact minimisers and analytic certificates.
//!
//! | kind                   | f(x)                                   | ν      | M_ν                      | μ          |
//! |------------------------|----------------------------------------|--------|--------------------------|------------|
//! | `quadratic`            | ½(x−s)ᵀH(x−s)                          | 1      | λ_max(H)                 | λ_min(H)   |
//! | `power_norm`           | ‖x−s‖^{1+ν}/(1+ν)                      | ν      | 2^{1−ν}                  | 1 if ν = 1 |
//! | `huberized_norm`       | c·huber_δ(‖x−s‖)                       | any    | (2c)^{1−ν}(c/δ)^ν        | 0          |
//! | `piecewise_linear_max` | max_i \|⟨a_i, x−s⟩\|                   | 0      | 2·max_i‖a_i‖             | 0          |
//! | `quad_plus_norm`       | μ/2‖x−s‖² + c‖x−s‖                     | 0      | 2μR + 2c on B_R(s)       | μ          |
//!
//! Every kind has minimiser `s` and optimal value 0.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::noise::{NoiseModel, NoiseSpec};
use crate::num::fpow;
use crate::problem::{HolderSmoothness, Objective, ProblemInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Give either `eigenvalues` (diagonal Hessian) or a dense symmetric `hessian`.
    Quadratic {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eigenvalues: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hessian: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
    },
    PowerNorm {
        dim: usize,
        nu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
    },
    HuberizedNorm {
        dim: usize,
        c: f64,
        delta: f64,
        /// Exponent of the reported certificate.
        nu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
    },
    PiecewiseLinearMax {
        dim: usize,
        slopes: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
    },
    QuadPlusNorm {
        dim: usize,
        mu: f64,
        c: f64,
        /// Radius of the ball on which the certificate is stated.
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<Vec<f64>>,
    },
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        match self {
            ProblemSpec::Quadratic { dim, .. }
            | ProblemSpec::PowerNorm { dim, .. }
            | ProblemSpec::HuberizedNorm { dim, .. }
            | ProblemSpec::PiecewiseLinearMax { dim, .. }
            | ProblemSpec::QuadPlusNorm { dim, .. } => *dim,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::PowerNorm { .. } => "power_norm",
            ProblemSpec::HuberizedNorm { .. } => "huberized_norm",
            ProblemSpec::PiecewiseLinearMax { .. } => "piecewise_linear_max",
            ProblemSpec::QuadPlusNorm { .. } => "quad_plus_norm",
        }
    }

    /// Same problem family with smoothness exponent `nu`, where the family allows it.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            ProblemSpec::PowerNorm { nu: v, .. } | ProblemSpec::HuberizedNorm { nu: v, .. } => {
                *v = nu;
            }
            ProblemSpec::Quadratic { .. } if nu == 1.0 => {}
            ProblemSpec::PiecewiseLinearMax { .. } | ProblemSpec::QuadPlusNorm { .. }
                if nu == 0.0 => {}
            other => {
                return Err(Error::param(
                    "nu",
                    format!("problem kind `{}` does not support nu = {nu}", other.kind_name()),
                ))
            }
        }
        Ok(out)
    }

    /// Quadratic `½(x−s)ᵀH(x−s)` with diagonal Hessian and `s = 0`.
    pub fn diagonal_quadratic(eigenvalues: Vec<f64>) -> Self {
        ProblemSpec::Quadratic {
            dim: eigenvalues.len(),
            eigenvalues: Some(eigenvalues),
            hessian: None,
            shift: None,
        }
    }
}

fn shift_vector(dim: usize, shift: &Option<Vec<f64>>) -> Result<Vector> {
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    match shift {
        None => Ok(Vector::zeros(dim)),
        Some(s) => {
            if s.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: s.len(),
                });
            }
            Vector::from_slice(s)
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::param("nu", format!("must lie in [0, 1], got {nu}")));
    }
    Ok(())
}

fn check_pos(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::param(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Instantiate a problem with its certificates.
pub fn make_problem(spec: &ProblemSpec) -> Result<ProblemInstance> {
    match spec {
        ProblemSpec::Quadratic {
            dim,
            eigenvalues,
            hessian,
            shift,
        } => {
            let s = shift_vector(*dim, shift)?;
            let (h, lmin, lmax) = match (eigenvalues, hessian) {
                (Some(ev), None) => {
                    if ev.len() != *dim {
                        return Err(Error::Dimension {
                            expected: *dim,
                            got: ev.len(),
                        });
                    }
                    if ev.iter().any(|v| !v.is_finite()) {
                        return Err(Error::param("eigenvalues", "entries must be finite"));
                    }
                    let lmin = ev.iter().cloned().fold(f64::INFINITY, f64::min);
                    let lmax = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (Hessian::Diagonal(ev.clone()), lmin, lmax)
                }
                (None, Some(rows)) => {
                    if rows.len() != *dim || rows.iter().any(|r| r.len() != *dim) {
                        return Err(Error::param("hessian", format!("must be {dim}×{dim}")));
                    }
                    let m = DMatrix::from_fn(*dim, *dim, |i, j| rows[i][j]);
                    if m.iter().any(|v| !v.is_finite()) {
                        return Err(Error::param("hessian", "entries must be finite"));
                    }
                    let asym = (&m - m.transpose()).amax();
                    if asym > 1e-12 * m.amax().max(1.0) {
                        return Err(Error::param("hessian", "must be symmetric"));
                    }
                    let eig = SymmetricEigen::new(m.clone());
                    let lmin = eig.eigenvalues.min();
                    let lmax = eig.eigenvalues.max();
                    (Hessian::Dense(m), lmin, lmax)
                }
                _ => {
                    return Err(Error::param(
                        "hessian",
                        "quadratic needs exactly one of `eigenvalues` or `hessian`",
                    ))
                }
            };
            if lmin < -1e-12 * lmax.abs().max(1.0) {
                return Err(Error::param(
                    "hessian",
                    format!("must be positive semidefinite, smallest eigenvalue {lmin}"),
                ));
            }
            if !(lmax > 0.0) {
                return Err(Error::param("hessian", "must have a positive eigenvalue"));
            }
            let mu = lmin.max(0.0);
            ProblemInstance::new(
                Arc::new(Quadratic { h, s: s.clone() }),
                Some(s),
                Some(0.0),
                HolderSmoothness::new(1.0, lmax, f64::INFINITY)?,
                mu,
            )
        }
        ProblemSpec::PowerNorm { dim, nu, shift } => {
            check_nu(*nu)?;
            let s = shift_vector(*dim, shift)?;
            ProblemInstance::new(
                Arc::new(PowerNorm { nu: *nu, s: s.clone() }),
                Some(s),
                Some(0.0),
                HolderSmoothness::new(*nu, fpow(2.0, 1.0 - nu), f64::INFINITY)?,
                if *nu == 1.0 { 1.0 } else { 0.0 },
            )
        }
        ProblemSpec::HuberizedNorm {
            dim,
            c,
            delta,
            nu,
            shift,
        } => {
            check_nu(*nu)?;
            check_pos("c", *c)?;
            check_pos("delta", *delta)?;
            let s = shift_vector(*dim, shift)?;
            let m = fpow(2.0 * c, 1.0 - nu) * fpow(c / delta, *nu);
            ProblemInstance::new(
                Arc::new(Huberized {
                    c: *c,
                    delta: *delta,
                    s: s.clone(),
                }),
                Some(s),
                Some(0.0),
                HolderSmoothness::new(*nu, m, f64::INFINITY)?,
                0.0,
            )
        }
        ProblemSpec::PiecewiseLinearMax { dim, slopes, shift } => {
            let s = shift_vector(*dim, shift)?;
            if slopes.is_empty() {
                return Err(Error::param("slopes", "need at least one slope vector"));
            }
            let slopes = slopes
                .iter()
                .map(|a| {
                    if a.len() != *dim {
                        return Err(Error::Dimension {
                            expected: *dim,
                            got: a.len(),
                        });
                    }
                    Vector::from_slice(a)
                })
                .collect::<Result<Vec<_>>>()?;
            let amax = slopes.iter().map(Vector::norm).fold(0.0, f64::max);
            check_pos("slopes", amax)?;
            ProblemInstance::new(
                Arc::new(PiecewiseLinearMax { slopes, s: s.clone() }),
                Some(s),
                Some(0.0),
                HolderSmoothness::new(0.0, 2.0 * amax, f64::INFINITY)?,
                0.0,
            )
        }
        ProblemSpec::QuadPlusNorm {
            dim,
            mu,
            c,
            radius,
            shift,
        } => {
            check_pos("mu", *mu)?;
            check_pos("radius", *radius)?;
            if !(*c >= 0.0 && c.is_finite()) {
                return Err(Error::param("c", format!("must be finite and ≥ 0, got {c}")));
            }
            let s = shift_vector(*dim, shift)?;
            ProblemInstance::new(
                Arc::new(QuadPlusNorm {
                    mu: *mu,
                    c: *c,
                    s: s.clone(),
                }),
                Some(s),
                Some(0.0),
                HolderSmoothness::new(0.0, 2.0 * mu * radius + 2.0 * c, *radius)?,
                *mu,
            )
        }
    }
}

/// Noise model for a problem of dimension `dim`.
pub fn make_noise(spec: &NoiseSpec, dim: usize) -> Result<NoiseModel> {
    NoiseModel::new(*spec, dim)
}

#[derive(Debug, Clone)]
enum Hessian {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

#[derive(Debug)]
struct Quadratic {
    h: Hessian,
    s: Vector,
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.s.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        let mut g = Vector::zeros(self.dim());
        self.gradient_into(x, &mut g);
        let d = x.sub(&self.s);
        0.5 * d.dot(&g)
    }

    fn gradient_into(&self, x: &Vector, out: &mut Vector) {
        let (xs, ss) = (x.as_slice(), self.s.as_slice());
        match &self.h {
            Hessian::Diagonal(ev) => {
                for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
                    *o = ev[i] * (xs[i] - ss[i]);
                }
            }
            Hessian::Dense(m) => {
                let n = xs.len();
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += m[(i, j)] * (xs[j] - ss[j]);
                    }
                    out[i] = acc;
                }
            }
        }
    }
}

#[derive(Debug)]
struct PowerNorm {
    nu: f64,
    s: Vector,
}

impl Objective for PowerNorm {
    fn dim(&self) -> usize {
        self.s.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        fpow(x.dist(&self.s), 1.0 + self.nu) / (1.0 + self.nu)
    }

    fn gradient_into(&self, x: &Vector, out: &mut Vector) {
        Vector::combine_into(out, 1.0, x, -1.0, &self.s);
        let r = out.norm();
        if r == 0.0 {
            return;
        }
        out.scale(fpow(r, self.nu - 1.0));
    }

    fn differentiable(&self) -> bool {
        self.nu > 0.0
    }
}

#[derive(Debug)]
struct Huberized {
    c: f64,
    delta: f64,
    s: Vector,
}

impl Objective for Huberized {
    fn dim(&self) -> usize {
        self.s.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        let r = x.dist(&self.s);
        if r <= self.delta {
            self.c * r * r / (2.0 * self.delta)
        } else {
            self.c * (r - 0.5 * self.delta)
        }
    }

    fn gradient_into(&self, x: &Vector, out: &mut Vector) {
        Vector::combine_into(out, 1.0, x, -1.0, &self.s);
        let r = out.norm();
        let f = if r <= self.delta {
            self.c / self.delta
        } else {
            self.c / r
        };
        out.scale(f);
    }
}

#[derive(Debug)]
struct PiecewiseLinearMax {
    slopes: Vec<Vector>,
    s: Vector,
}

impl PiecewiseLinearMax {
    fn argmax(&self, x: &Vector) -> (usize, f64) {
        let d = x.sub(&self.s);
        let mut best = (0, f64::NEG_INFINITY);
        for (i, a) in self.slopes.iter().enumerate() {
            let v = a.dot(&d);
            if v.abs() > best.1.abs() || best.1 == f64::NEG_INFINITY {
                best = (i, v);
            }
        }
        best
    }
}

impl Objective for PiecewiseLinearMax {
    fn dim(&self) -> usize {
        self.s.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.argmax(x).1.abs()
    }

    fn gradient_into(&self, x: &Vector, out: &mut Vector) {
        let (i, v) = self.argmax(x);
        if v == 0.0 {
            out.fill(0.0);
        } else {
            out.copy_from(&self.slopes[i]);
            out.scale(v.signum());
        }
    }

    fn differentiable(&self) -> bool {
        false
    }
}

#[derive(Debug)]
struct QuadPlusNorm {
    mu: f64,
    c: f64,
    s: Vector,
}

impl Objective for QuadPlusNorm {
    fn dim(&self) -> usize {
        self.s.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        let r = x.dist(&self.s);
        0.5 * self.mu * r * r + self.c * r
    }

    fn gradient_into(&self, x: &Vector, out: &mut Vector) {
        Vector::combine_into(out, 1.0, x, -1.0, &self.s);
        let r = out.norm();
        if r == 0.0 {
            return;
        }
        out.scale(self.mu + self.c / r);
    }

    fn differentiable(&self) -> bool {
        self.c == 0.0
    }
}
