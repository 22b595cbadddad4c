//! Canonical angle reduction.

use std::f64::consts::{PI, TAU};

/// Reduces `x` into `[0, period)`.
///
/// `rem_euclid` can round up to exactly `period` for tiny negative inputs; that
/// case folds back to zero.
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Reduces a phase into `[0, 2π)`.
pub fn wrap_2pi(x: f64) -> f64 {
    wrap(x, TAU)
}

/// Reduces a wave-plate axis angle into `[0, π)`.
pub fn wrap_pi(x: f64) -> f64 {
    wrap(x, PI)
}
