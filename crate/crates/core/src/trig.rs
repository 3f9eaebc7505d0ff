//! Trigonometry with exact values at quadrant boundaries.
//!
//! Plate eigenfunctions vanish at nodal lines and the phase grid relies on
//! `e^{j(θ+180°)} = -e^{jθ}`. The plain `f64::sin` gives `sin(π) ≈ 1.2e-16`,
//! which breaks boundary conditions and phasor cancellation, so every
//! evaluation here reduces to the first octant before calling into libm.

use num_complex::Complex64;
use std::f64::consts::PI;

/// `(cos, sin)` of an angle in degrees.
///
/// Multiples of 90° are exact, and the result is exactly antisymmetric under
/// a 180° shift for any input.
pub fn cos_sin_deg(deg: f64) -> (f64, f64) {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    let d = if d >= 360.0 { 0.0 } else { d };
    let quadrant = (d / 90.0).floor() as u32;
    let r = d - 90.0 * f64::from(quadrant);
    let (c, s) = first_quadrant(r);
    match quadrant {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

/// `e^{j·deg}` with the same exactness guarantees as [`cos_sin_deg`].
pub fn cis_deg(deg: f64) -> Complex64 {
    let (c, s) = cos_sin_deg(deg);
    Complex64::new(c, s)
}

fn first_quadrant(r: f64) -> (f64, f64) {
    if r == 0.0 {
        (1.0, 0.0)
    } else if r > 45.0 {
        let t = (90.0 - r).to_radians();
        (t.sin(), t.cos())
    } else {
        let t = r.to_radians();
        (t.cos(), t.sin())
    }
}

/// `sin(π·t)`, exactly zero for integer `t` and exactly ±1 for half-integers.
pub fn sin_pi(t: f64) -> f64 {
    let mut r = t.rem_euclid(2.0);
    if r >= 2.0 {
        r = 0.0;
    }
    let mut sign = 1.0;
    if r >= 1.0 {
        r -= 1.0;
        sign = -1.0;
    }
    if r > 0.5 {
        r = 1.0 - r;
    }
    if r == 0.0 {
        return 0.0;
    }
    sign * (PI * r).sin()
}

/// `sin(π·num/den)` for integers, reduced in integer arithmetic so that
/// mirror-image grid nodes get bit-identical magnitudes.
pub fn sin_pi_ratio(num: u64, den: u64) -> f64 {
    debug_assert!(den > 0);
    let period = 2 * den;
    let mut r = num % period;
    let mut sign = 1.0;
    if r >= den {
        r -= den;
        sign = -1.0;
    }
    if 2 * r > den {
        r = den - r;
    }
    if r == 0 {
        return 0.0;
    }
    sign * (PI * (r as f64 / den as f64)).sin()
}
