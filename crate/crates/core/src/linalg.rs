//! Dense real vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense vector in ℝⁿ with fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    /// Build a vector, rejecting non-finite entries.
    pub fn from_vec(v: Vec<f64>) -> Result<Self> {
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::param("vector", format!("entry {i} is not finite")));
        }
        Ok(Vector(v))
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::from_vec(v.to_vec())
    }

    /// e_i scaled by `s`.
    pub fn basis(n: usize, i: usize, s: f64) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = s;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    /// Euclidean norm, computed with scaling so large entries do not overflow.
    pub fn norm(&self) -> f64 {
        let amax = self.0.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        if amax == 0.0 || !amax.is_finite() {
            return amax;
        }
        if amax > 1e150 || amax < 1e-150 {
            let s: f64 = self.0.iter().map(|a| (a / amax) * (a / amax)).sum();
            amax * s.sqrt()
        } else {
            self.norm_sq().sqrt()
        }
    }

    pub fn dist_sq(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        self.sub(other).norm()
    }

    /// self += s·other
    #[inline]
    pub fn axpy(&mut self, s: f64, other: &Vector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    #[inline]
    pub fn scale(&mut self, s: f64) {
        for a in &mut self.0 {
            *a *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// out = wa·a + wb·b, written in place.
    #[inline]
    pub fn combine_into(out: &mut Vector, wa: f64, a: &Vector, wb: f64, b: &Vector) {
        for ((o, x), y) in out.0.iter_mut().zip(&a.0).zip(&b.0) {
            *o = wa * x + wb * y;
        }
    }

    pub fn copy_from(&mut self, other: &Vector) {
        self.0.copy_from_slice(&other.0);
    }

    pub fn fill(&mut self, v: f64) {
        self.0.iter_mut().for_each(|a| *a = v);
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::Dimension {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::from_vec(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Vector::from_vec(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::from_vec(vec![f64::INFINITY]).is_err());
        assert!(Vector::from_vec(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn basic_ops() {
        let a = Vector::from_vec(vec![3.0, 4.0]).unwrap();
        let b = Vector::from_vec(vec![1.0, 0.0]).unwrap();
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.dot(&b), 3.0);
        assert_eq!(a.dist_sq(&b), 20.0);
        let mut c = a.clone();
        c.axpy(-2.0, &b);
        assert_eq!(c.as_slice(), &[1.0, 4.0]);
    }

    #[test]
    fn norm_survives_large_entries() {
        let a = Vector::from_vec(vec![3e200, 4e200]).unwrap();
        assert!((a.norm() / 5e200 - 1.0).abs() < 1e-15);
        let t = Vector::from_vec(vec![3e-200, 4e-200]).unwrap();
        assert!((t.norm() / 5e-200 - 1.0).abs() < 1e-15);
    }
}
