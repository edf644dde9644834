//! The norm-clipping operator `clip(g, λ) = g · min{1, λ/‖g‖}`.

use crate::linalg::Vector;

/// Scale factor `min{1, λ/‖g‖}`; 1 when `g = 0`.
#[inline]
pub fn clip_factor(norm: f64, lambda: f64) -> f64 {
    if norm <= lambda || norm == 0.0 {
        1.0
    } else {
        lambda / norm
    }
}

/// Clip `g` to Euclidean norm at most `lambda`.
///
/// Vectors already inside the ball are returned unchanged and the zero
/// vector maps to itself. `lambda = +∞` disables clipping.
pub fn clip(g: &Vector, lambda: f64) -> Vector {
    let mut out = g.clone();
    clip_in_place(&mut out, lambda);
    out
}

/// In-place variant of [`clip`]. Returns the factor that was applied.
#[inline]
pub fn clip_in_place(g: &mut Vector, lambda: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    let s = clip_factor(g.norm(), lambda);
    if s < 1.0 {
        g.scale(s);
    }
    s
}

/// Per-coordinate clipping: each entry is clipped to `[-λ, λ]`.
pub fn clip_coordinatewise(g: &Vector, lambda: f64) -> Vector {
    let mut out = g.clone();
    clip_coordinatewise_in_place(&mut out, lambda);
    out
}

pub fn clip_coordinatewise_in_place(g: &mut Vector, lambda: f64) {
    for v in g.as_mut_slice() {
        *v = v.clamp(-lambda, lambda);
    }
}
