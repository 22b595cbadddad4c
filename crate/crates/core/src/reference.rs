//! Closed-form polarization-resolved counts for the preset in the regime
//! β₂ = 1, θ = 45°, α₁ = √(1 − β₁²).
//!
//! These are transcribed formulas, kept apart from the evolution engine so the
//! two can be compared. Nothing in here touches `state` or `elements`.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("beta1 = {0} is outside [0, 1]")]
pub struct DomainError(pub f64);

fn check(beta1: f64) -> Result<(), DomainError> {
    if (0.0..=1.0).contains(&beta1) {
        Ok(())
    } else {
        Err(DomainError(beta1))
    }
}

/// ⟨N_H⟩ = (8 − 3β₁² + β₁(sin(γ−φ) − cos(γ−φ)) − 2β₁ cos φ) / 16
pub fn nh_closed(beta1: f64, gamma: f64, phi: f64) -> Result<f64, DomainError> {
    check(beta1)?;
    let d = gamma - phi;
    Ok((8.0 - 3.0 * beta1 * beta1 + beta1 * (d.sin() - d.cos()) - 2.0 * beta1 * phi.cos()) / 16.0)
}

/// ⟨N_V⟩ = (5 + 2β₁(cos(γ−φ) + cos φ)) / 16
pub fn nv_closed(beta1: f64, gamma: f64, phi: f64) -> Result<f64, DomainError> {
    check(beta1)?;
    Ok((5.0 + 2.0 * beta1 * ((gamma - phi).cos() + phi.cos())) / 16.0)
}

/// Vertical-channel fringe visibility at γ = 0: 4β₁/5.
pub fn visibility_closed(beta1: f64) -> Result<f64, DomainError> {
    check(beta1)?;
    Ok(4.0 * beta1 / 5.0)
}

/// Exact extrema of `nv_closed` over φ.
///
/// cos(γ−φ) + cos φ = 2 cos(γ/2) cos(φ − γ/2), so the fringe is
/// 5/16 ± β₁|cos(γ/2)|/4 with the maximum at φ = γ/2 (or γ/2 + π).
pub fn nv_extrema_closed(beta1: f64, gamma: f64) -> Result<(f64, f64), DomainError> {
    check(beta1)?;
    let amp = beta1 * (gamma / 2.0).cos().abs() / 4.0;
    Ok((5.0 / 16.0 + amp, 5.0 / 16.0 - amp))
}

/// Partial derivatives of (N_H, N_V) with respect to (β₁, γ).
pub fn closed_gradients(beta1: f64, gamma: f64, phi: f64) -> ([f64; 2], [f64; 2]) {
    let d = gamma - phi;
    let (s, c) = d.sin_cos();
    let dh_db = (-6.0 * beta1 + (s - c) - 2.0 * phi.cos()) / 16.0;
    let dh_dg = beta1 * (c + s) / 16.0;
    let dv_db = 2.0 * (c + phi.cos()) / 16.0;
    let dv_dg = -2.0 * beta1 * s / 16.0;
    ([dh_db, dh_dg], [dv_db, dv_dg])
}
