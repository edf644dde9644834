//! Small numeric helpers shared by the schedule formulas.

/// Smallest positive argument passed to a logarithm.
pub const LOG_FLOOR: f64 = 1e-300;

/// `x^p` for `x ≥ 0`, evaluated through `exp(p ln x)` with the base clamped
/// away from zero. Integer-valued exponents 0 and 1 are returned exactly.
#[inline]
pub fn fpow(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        x
    } else {
        (p * x.max(LOG_FLOOR).ln()).exp()
    }
}

/// `ln x` with the argument clamped away from zero.
#[inline]
pub fn fln(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `a ≥ b` up to a relative slack `rel` plus an absolute floor `abs`.
#[inline]
pub fn geq_rel(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    a >= b - rel * b.abs() - abs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fpow_matches_powf() {
        for &(x, p) in &[(2.0, 0.5), (10.0, 1.5), (0.3, 2.0), (7.0, 1.0 / 3.0)] {
            let rel = (fpow(x, p) - f64::powf(x, p)).abs() / f64::powf(x, p);
            assert!(rel < 1e-14, "{x}^{p}");
        }
        assert_eq!(fpow(0.0, 0.0), 1.0);
        assert_eq!(fpow(3.25, 1.0), 3.25);
    }

    #[test]
    fn compensated_sum_is_exact_for_repeated_small_terms() {
        let mut s = CompensatedSum::new();
        for _ in 0..100_000 {
            s.add(0.1);
        }
        assert!((s.value() - 10_000.0).abs() <= 1e-12 * 10_000.0);
    }
}
