//! Additive, isotropic gradient noise with exactly calibrated variance.
//!
//! Every family produces zero-mean noise `ξ` with `E‖ξ‖² = σ²` in any
//! dimension. Each draw is spherically symmetric, so only the radial law
//! differs between families:
//!
//! * `gaussian`: `ξ ~ N(0, σ²/n · I)`.
//! * `student_t`: multivariate t with `df > 2` degrees of freedom,
//!   `ξ = s·√(df/V)·Z` with `V ~ χ²_df`, `Z ~ N(0, I)`.
//! * `pareto_symmetric`: `ξ = c·(P₁ − P₂)·u` with `P_i` i.i.d. Pareto with
//!   tail index `α > 2` and `u` uniform on the unit sphere.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Declarative description of a noise family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    StudentT { sigma: f64, df: f64 },
    ParetoSymmetric { sigma: f64, tail_index: f64 },
}

impl NoiseSpec {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma }
            | NoiseSpec::StudentT { sigma, .. }
            | NoiseSpec::ParetoSymmetric { sigma, .. } => sigma,
        }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        match self {
            NoiseSpec::Gaussian { .. } => NoiseSpec::Gaussian { sigma },
            NoiseSpec::StudentT { df, .. } => NoiseSpec::StudentT { sigma, df },
            NoiseSpec::ParetoSymmetric { tail_index, .. } => {
                NoiseSpec::ParetoSymmetric { sigma, tail_index }
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            NoiseSpec::Gaussian { .. } => "gaussian",
            NoiseSpec::StudentT { .. } => "student_t",
            NoiseSpec::ParetoSymmetric { .. } => "pareto_symmetric",
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    None,
    Gaussian {
        /// Per-coordinate standard deviation.
        s: f64,
    },
    StudentT {
        s: f64,
        df: f64,
        chi: ChiSquared<f64>,
        /// `df` when it is a small integer, so χ² can be summed from normals.
        int_df: Option<u32>,
    },
    Pareto {
        scale: f64,
        inv_alpha: f64,
    },
}

/// Noise model bound to a problem dimension.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    spec: NoiseSpec,
    dim: usize,
    kind: Kind,
}

/// Variance of a standard Pareto variable with tail index `alpha` (support `[1, ∞)`).
pub fn pareto_variance(alpha: f64) -> f64 {
    alpha / ((alpha - 1.0) * (alpha - 1.0) * (alpha - 2.0))
}

impl NoiseModel {
    pub fn new(spec: NoiseSpec, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        let sigma = spec.sigma();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be finite and ≥ 0, got {sigma}")));
        }
        let n = dim as f64;
        let kind = match spec {
            NoiseSpec::Gaussian { .. } => Kind::Gaussian { s: sigma / n.sqrt() },
            NoiseSpec::StudentT { df, .. } => {
                if !(df > 2.0 && df.is_finite()) {
                    return Err(Error::param(
                        "df",
                        format!("Student-t needs df > 2 for finite variance, got {df}"),
                    ));
                }
                let chi = ChiSquared::new(df)
                    .map_err(|e| Error::param("df", e.to_string()))?;
                let int_df = (df.fract() == 0.0 && df <= 16.0).then_some(df as u32);
                Kind::StudentT {
                    s: sigma * ((df - 2.0) / (n * df)).sqrt(),
                    df,
                    chi,
                    int_df,
                }
            }
            NoiseSpec::ParetoSymmetric { tail_index, .. } => {
                if !(tail_index > 2.0 && tail_index.is_finite()) {
                    return Err(Error::param(
                        "tail_index",
                        format!("Pareto noise needs tail index > 2 for finite variance, got {tail_index}"),
                    ));
                }
                Kind::Pareto {
                    scale: sigma / (2.0 * pareto_variance(tail_index)).sqrt(),
                    inv_alpha: 1.0 / tail_index,
                }
            }
        };
        let kind = if sigma == 0.0 { Kind::None } else { kind };
        Ok(Self { spec, dim, kind })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn sigma(&self) -> f64 {
        self.spec.sigma()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, Kind::None)
    }

    /// Add the mean of `m` independent noise draws to `out`.
    ///
    /// The Gaussian and Student-t families sample the batch mean exactly in
    /// `O(n)` and `O(m + n)` time respectively; the Pareto family averages
    /// `m` explicit draws.
    pub fn add_batch_mean<R: Rng + ?Sized>(&self, rng: &mut R, m: u64, out: &mut Vector) {
        debug_assert!(m >= 1);
        debug_assert_eq!(out.dim(), self.dim);
        match &self.kind {
            Kind::None => {}
            Kind::Gaussian { s } => {
                let c = s / (m as f64).sqrt();
                add_gaussian(rng, c, out);
            }
            Kind::StudentT { s, df, chi, int_df } => {
                // Conditionally on the mixing variables, Σ W_i Z_i ~ N(0, ΣW_i² I).
                let mut w2 = 0.0;
                for _ in 0..m {
                    let v = match int_df {
                        Some(k) => chi_sq_int(rng, *k),
                        None => chi.sample(rng),
                    };
                    w2 += df / v;
                }
                let c = s * w2.sqrt() / m as f64;
                add_gaussian(rng, c, out);
            }
            Kind::Pareto { scale, inv_alpha } => {
                let c = scale / m as f64;
                let mut dir = Vector::zeros(self.dim);
                for _ in 0..m {
                    let r = pareto(rng, *inv_alpha) - pareto(rng, *inv_alpha);
                    unit_direction(rng, &mut dir);
                    out.axpy(c * r, &dir);
                }
            }
        }
    }

    /// One noise draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let mut v = Vector::zeros(self.dim);
        self.add_batch_mean(rng, 1, &mut v);
        v
    }
}

fn add_gaussian<R: Rng + ?Sized>(rng: &mut R, c: f64, out: &mut Vector) {
    for v in out.as_mut_slice() {
        let z: f64 = StandardNormal.sample(rng);
        *v += c * z;
    }
}

fn chi_sq_int<R: Rng + ?Sized>(rng: &mut R, k: u32) -> f64 {
    let mut s = 0.0;
    for _ in 0..k {
        let z: f64 = StandardNormal.sample(rng);
        s += z * z;
    }
    s
}

/// Standard Pareto draw `U^{-1/α}` on `[1, ∞)`.
fn pareto<R: Rng + ?Sized>(rng: &mut R, inv_alpha: f64) -> f64 {
    // 1 − U lies in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    u.powf(-inv_alpha)
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut Vector) {
    if out.dim() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        out.fill(0.0);
        add_gaussian(rng, 1.0, out);
        let n = out.norm();
        if n > 1e-300 {
            out.scale(1.0 / n);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial_rng;

    fn second_moment(spec: NoiseSpec, dim: usize, draws: usize, seed: u64) -> (f64, Vector) {
        let nm = NoiseModel::new(spec, dim).unwrap();
        let mut rng = trial_rng(seed);
        let mut acc = 0.0;
        let mut mean = Vector::zeros(dim);
        for _ in 0..draws {
            let v = nm.sample(&mut rng);
            acc += v.norm_sq();
            mean.axpy(1.0 / draws as f64, &v);
        }
        (acc / draws as f64, mean)
    }

    #[test]
    fn rejects_infinite_variance_tails() {
        assert!(NoiseModel::new(NoiseSpec::StudentT { sigma: 1.0, df: 2.0 }, 3).is_err());
        assert!(NoiseModel::new(NoiseSpec::ParetoSymmetric { sigma: 1.0, tail_index: 1.9 }, 3).is_err());
        assert!(NoiseModel::new(NoiseSpec::Gaussian { sigma: -1.0 }, 3).is_err());
    }

    #[test]
    fn zero_sigma_is_deterministic() {
        let nm = NoiseModel::new(NoiseSpec::StudentT { sigma: 0.0, df: 3.0 }, 4).unwrap();
        let mut rng = trial_rng(1);
        let mut v = Vector::zeros(4);
        nm.add_batch_mean(&mut rng, 7, &mut v);
        assert_eq!(v, Vector::zeros(4));
    }

    #[test]
    fn gaussian_calibration() {
        let (m2, _) = second_moment(NoiseSpec::Gaussian { sigma: 2.0 }, 5, 200_000, 3);
        assert!((m2 / 4.0 - 1.0).abs() < 0.02, "{m2}");
    }

    #[test]
    fn pareto_calibration() {
        // Finite but heavy fourth moment: use a lighter tail for a tight check.
        let (m2, _) = second_moment(
            NoiseSpec::ParetoSymmetric { sigma: 1.5, tail_index: 5.0 },
            3,
            400_000,
            5,
        );
        assert!((m2 / 2.25 - 1.0).abs() < 0.03, "{m2}");
    }

    #[test]
    fn non_integer_df_calibration() {
        let (m2, _) = second_moment(NoiseSpec::StudentT { sigma: 1.0, df: 6.5 }, 2, 400_000, 9);
        assert!((m2 - 1.0).abs() < 0.03, "{m2}");
    }

    #[test]
    fn batch_mean_variance_scales_with_m() {
        let nm = NoiseModel::new(NoiseSpec::StudentT { sigma: 1.0, df: 5.0 }, 3).unwrap();
        let mut rng = trial_rng(11);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let mut v = Vector::zeros(3);
            nm.add_batch_mean(&mut rng, 8, &mut v);
            acc += v.norm_sq();
        }
        let m2 = acc / draws as f64;
        assert!((m2 * 8.0 - 1.0).abs() < 0.03, "{m2}");
    }
}
