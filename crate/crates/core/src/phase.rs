//! Small helpers for working with angles.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `(-π, π]`.
pub fn wrap(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Unit-modulus phasor `e^{iθ}`.
#[inline]
pub fn phasor(theta: f64) -> num_complex::Complex64 {
    num_complex::Complex64::from_polar(1.0, theta)
}
