//! Measurement protocol: shot-noise simulation, γ = 0 calibration and
//! least-squares recovery of (β₁, γ) from polarization-resolved fringes.

use std::f64::consts::TAU;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::angle::wrap_2pi;
use crate::circuit::{fig1_plan, BoundPlan, ExecOptions, Fig1Params};
use crate::observables::{counts, CountResult, FringeScan};
use crate::reference;

/// Fewest grid points [`calibrate`] accepts.
pub const MIN_CALIBRATION_POINTS: usize = 16;
/// Below this β̂₁ the fitted γ carries no information.
pub const GAMMA_IDENTIFIABILITY_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("shots must be at least 1")]
    NoShots,
    #[error("E_SPARSE_SCAN: calibration needs at least {MIN_CALIBRATION_POINTS} points, got {0}")]
    SparseScan(usize),
    #[error("no data points")]
    Empty,
    #[error("non-finite value at point {0}")]
    NonFinite(usize),
    #[error("column lengths differ")]
    Ragged,
    #[error("beta1 = {0} is outside [0, 1]")]
    Domain(f64),
    #[error("count model failed: {0}")]
    Model(String),
}

/// Integer photon counts drawn around a noiseless scan.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyScan {
    pub phis: Vec<f64>,
    pub counts_h: Vec<u64>,
    pub counts_v: Vec<u64>,
    pub shots: u64,
    pub seed: u64,
}

/// Draws `counts ~ Poisson(shots · n)` independently per grid point and channel.
///
/// The generator is ChaCha8 seeded with `seed`, so identical inputs give
/// identical counts on every platform.
pub fn simulate_measurement(
    scan: &FringeScan,
    shots: u64,
    seed: u64,
) -> Result<NoisyScan, EstimationError> {
    if shots == 0 {
        return Err(EstimationError::NoShots);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |mean: f64| -> Result<u64, EstimationError> {
        let lambda = shots as f64 * mean;
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(EstimationError::NonFinite(0));
        }
        if lambda == 0.0 {
            return Ok(0);
        }
        let d = Poisson::new(lambda).map_err(|e| EstimationError::Model(e.to_string()))?;
        Ok(d.sample(&mut rng) as u64)
    };
    let mut counts_h = Vec::with_capacity(scan.len());
    let mut counts_v = Vec::with_capacity(scan.len());
    for r in &scan.records {
        counts_h.push(draw(r.n_h)?);
        counts_v.push(draw(r.n_v)?);
    }
    Ok(NoisyScan {
        phis: scan.grid.clone(),
        counts_h,
        counts_v,
        shots,
        seed,
    })
}

/// Per-shot count estimates at each φ, the common input of calibration and
/// fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredScan {
    pub phis: Vec<f64>,
    pub n_h: Vec<f64>,
    pub n_v: Vec<f64>,
    /// Shots behind each point; `None` for noiseless expectation values.
    pub shots: Option<u64>,
}

impl MeasuredScan {
    pub fn new(
        phis: Vec<f64>,
        n_h: Vec<f64>,
        n_v: Vec<f64>,
        shots: Option<u64>,
    ) -> Result<Self, EstimationError> {
        if phis.len() != n_h.len() || phis.len() != n_v.len() {
            return Err(EstimationError::Ragged);
        }
        Ok(MeasuredScan {
            phis,
            n_h,
            n_v,
            shots,
        })
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    fn check_finite(&self) -> Result<(), EstimationError> {
        for i in 0..self.len() {
            if !(self.phis[i].is_finite() && self.n_h[i].is_finite() && self.n_v[i].is_finite()) {
                return Err(EstimationError::NonFinite(i));
            }
        }
        Ok(())
    }
}

impl From<&FringeScan> for MeasuredScan {
    fn from(scan: &FringeScan) -> Self {
        MeasuredScan {
            phis: scan.grid.clone(),
            n_h: scan.n_h(),
            n_v: scan.n_v(),
            shots: None,
        }
    }
}

impl From<&NoisyScan> for MeasuredScan {
    fn from(scan: &NoisyScan) -> Self {
        let s = scan.shots as f64;
        MeasuredScan {
            phis: scan.phis.clone(),
            n_h: scan.counts_h.iter().map(|&c| c as f64 / s).collect(),
            n_v: scan.counts_v.iter().map(|&c| c as f64 / s).collect(),
            shots: Some(scan.shots),
        }
    }
}

/// Reference fringe recorded with the idler phase set to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRecord {
    pub phi_at_max_v: f64,
    pub v_max: f64,
    pub v_min: f64,
    /// Set when the vertical channel shows no fringe at all.
    pub flat: bool,
}

impl CalibrationRecord {
    pub fn visibility(&self) -> f64 {
        let s = self.v_max + self.v_min;
        if s == 0.0 {
            0.0
        } else {
            (self.v_max - self.v_min) / s
        }
    }
}

/// Locates the vertical-channel maximum (ties to the smallest φ) and extrema.
pub fn calibrate(scan: &MeasuredScan) -> Result<CalibrationRecord, EstimationError> {
    if scan.len() < MIN_CALIBRATION_POINTS {
        return Err(EstimationError::SparseScan(scan.len()));
    }
    scan.check_finite()?;
    let mut imax = 0;
    let mut v_min = f64::INFINITY;
    for (i, &v) in scan.n_v.iter().enumerate() {
        let vmax = scan.n_v[imax];
        if v > vmax || (v == vmax && scan.phis[i] < scan.phis[imax]) {
            imax = i;
        }
        v_min = v_min.min(v);
    }
    let v_max = scan.n_v[imax];
    let flat = v_max - v_min <= 1e-12 * v_max.abs().max(1.0);
    if flat {
        log::warn!("vertical channel is flat; calibration carries no phase reference");
    }
    Ok(CalibrationRecord {
        phi_at_max_v: scan.phis[imax],
        v_max,
        v_min: v_min.max(0.0),
        flat,
    })
}

/// Predicted (N_H, N_V) for idler parameters (β₁, γ) at interferometer phase φ.
pub trait CountModel: Sync {
    fn predict(&self, beta1: f64, gamma: f64, phi: f64) -> Result<CountResult, EstimationError>;

    /// ∂(N_H, N_V)/∂(β₁, γ). Central differences unless overridden.
    fn gradient(
        &self,
        beta1: f64,
        gamma: f64,
        phi: f64,
    ) -> Result<([f64; 2], [f64; 2]), EstimationError> {
        let h = 1e-6;
        // One-sided at the β₁ box edges.
        let (b_lo, b_hi) = ((beta1 - h).max(0.0), (beta1 + h).min(1.0));
        let lo = self.predict(b_lo, gamma, phi)?;
        let hi = self.predict(b_hi, gamma, phi)?;
        let gl = self.predict(beta1, gamma - h, phi)?;
        let gh = self.predict(beta1, gamma + h, phi)?;
        let db = b_hi - b_lo;
        Ok((
            [(hi.n_h - lo.n_h) / db, (gh.n_h - gl.n_h) / (2.0 * h)],
            [(hi.n_v - lo.n_v) / db, (gh.n_v - gl.n_v) / (2.0 * h)],
        ))
    }
}

/// The transcribed closed forms for β₂ = 1, θ = 45°.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClosedFormModel;

impl CountModel for ClosedFormModel {
    fn predict(&self, beta1: f64, gamma: f64, phi: f64) -> Result<CountResult, EstimationError> {
        let b = beta1.clamp(0.0, 1.0);
        let dom = |e: reference::DomainError| EstimationError::Domain(e.0);
        Ok(CountResult {
            n_h: reference::nh_closed(b, gamma, phi).map_err(dom)?,
            n_v: reference::nv_closed(b, gamma, phi).map_err(dom)?,
        })
    }

    fn gradient(
        &self,
        beta1: f64,
        gamma: f64,
        phi: f64,
    ) -> Result<([f64; 2], [f64; 2]), EstimationError> {
        Ok(reference::closed_gradients(beta1, gamma, phi))
    }
}

/// Counts from the evolution engine running the preset at β₂ = 1, θ = 45°.
#[derive(Debug, Clone, Default)]
pub struct EngineModel {
    pub opts: ExecOptions,
}

impl EngineModel {
    fn bound(&self, beta1: f64, gamma: f64, phi: f64) -> Result<BoundPlan, EstimationError> {
        let b = Fig1Params::closed_form_regime(beta1.clamp(0.0, 1.0), gamma, phi).bindings();
        fig1_plan()
            .bind(&b)
            .map_err(|d| EstimationError::Model(d.to_string()))
    }
}

impl CountModel for EngineModel {
    fn predict(&self, beta1: f64, gamma: f64, phi: f64) -> Result<CountResult, EstimationError> {
        let plan = self.bound(beta1, gamma, phi)?;
        let state = plan
            .execute(&self.opts)
            .map_err(|e| EstimationError::Model(e.to_string()))?;
        Ok(counts(
            &state,
            &plan.plan().detect_path,
            plan.plan().detect_band,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Equal,
    /// Weight `shots / max(count, 1)` per channel and point.
    InverseVariance,
}

/// Solver settings. Defaults: β₁ grid step 0.05, 72 γ grid points, parameter
/// tolerance 1e-10, 500 refinement iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub weighting: Weighting,
    pub beta_step: f64,
    pub gamma_points: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Subtracted from every φ before modelling; see [`fit_calibrated`].
    pub phi_offset: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            weighting: Weighting::Equal,
            beta_step: 0.05,
            gamma_points: 72,
            tolerance: 1e-10,
            max_iterations: 500,
            phi_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub beta1_hat: f64,
    /// In `[0, 2π)`.
    pub gamma_hat: f64,
    pub alpha1_hat: f64,
    pub residual_sum_sq: f64,
    pub converged: bool,
    /// β̂₁ is too small for γ to be determined.
    pub gamma_unidentifiable: bool,
    pub iterations: usize,
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "beta1={:.12} gamma={:.12} alpha1={:.12} rss={:.6e} converged={}",
            self.beta1_hat, self.gamma_hat, self.alpha1_hat, self.residual_sum_sq, self.converged
        )?;
        if self.gamma_unidentifiable {
            write!(f, " gamma_unidentifiable")?;
        }
        Ok(())
    }
}

/// √(1 − β̂₁²) for a lossless idler.
pub fn infer_alpha1(beta1_hat: f64) -> Result<f64, EstimationError> {
    if !(0.0..=1.0).contains(&beta1_hat) {
        return Err(EstimationError::Domain(beta1_hat));
    }
    Ok((1.0 - beta1_hat * beta1_hat).sqrt())
}

struct Problem<'a> {
    data: &'a MeasuredScan,
    model: &'a dyn CountModel,
    /// √weight per (point, channel), channel 0 = H.
    sqrt_w: Vec<[f64; 2]>,
    phi_offset: f64,
}

impl Problem<'_> {
    fn residuals(&self, beta1: f64, gamma: f64) -> Result<Vec<f64>, EstimationError> {
        let mut r = Vec::with_capacity(2 * self.data.len());
        for (i, &phi) in self.data.phis.iter().enumerate() {
            let m = self.model.predict(beta1, gamma, phi - self.phi_offset)?;
            r.push(self.sqrt_w[i][0] * (self.data.n_h[i] - m.n_h));
            r.push(self.sqrt_w[i][1] * (self.data.n_v[i] - m.n_v));
        }
        Ok(r)
    }

    fn cost(&self, beta1: f64, gamma: f64) -> Result<f64, EstimationError> {
        Ok(self.residuals(beta1, gamma)?.iter().map(|r| r * r).sum())
    }

    /// Jacobian of the residuals, two columns (β₁, γ).
    fn jacobian(&self, beta1: f64, gamma: f64) -> Result<Vec<[f64; 2]>, EstimationError> {
        let mut j = Vec::with_capacity(2 * self.data.len());
        for (i, &phi) in self.data.phis.iter().enumerate() {
            let (gh, gv) = self.model.gradient(beta1, gamma, phi - self.phi_offset)?;
            j.push([-self.sqrt_w[i][0] * gh[0], -self.sqrt_w[i][0] * gh[1]]);
            j.push([-self.sqrt_w[i][1] * gv[0], -self.sqrt_w[i][1] * gv[1]]);
        }
        Ok(j)
    }
}

/// Fits (β₁, γ) with the closed-form count model.
pub fn fit(data: &MeasuredScan) -> Result<FitResult, EstimationError> {
    fit_with(data, &ClosedFormModel, &FitOptions::default())
}

/// Fits with φ measured relative to the calibration maximum, so γ is
/// reported on the branch the γ = 0 reference fixes.
pub fn fit_calibrated(
    data: &MeasuredScan,
    calibration: &CalibrationRecord,
    model: &dyn CountModel,
    opts: &FitOptions,
) -> Result<FitResult, EstimationError> {
    let offset = if calibration.flat {
        0.0
    } else {
        calibration.phi_at_max_v
    };
    fit_with(
        data,
        model,
        &FitOptions {
            phi_offset: offset,
            ..*opts
        },
    )
}

/// Grid search over β₁ ∈ [0, 1] × γ ∈ [0, 2π), then projected
/// Levenberg–Marquardt refinement from the best grid cell.
pub fn fit_with(
    data: &MeasuredScan,
    model: &dyn CountModel,
    opts: &FitOptions,
) -> Result<FitResult, EstimationError> {
    if data.is_empty() {
        return Err(EstimationError::Empty);
    }
    data.check_finite()?;
    let sqrt_w = match (opts.weighting, data.shots) {
        (Weighting::InverseVariance, Some(shots)) => {
            let s = shots as f64;
            let w = |n: f64| (s / (n * s).round().max(1.0)).sqrt();
            data.n_h
                .iter()
                .zip(&data.n_v)
                .map(|(&h, &v)| [w(h), w(v)])
                .collect()
        }
        _ => vec![[1.0, 1.0]; data.len()],
    };
    let problem = Problem {
        data,
        model,
        sqrt_w,
        phi_offset: opts.phi_offset,
    };

    let beta_points = (1.0 / opts.beta_step).round() as usize;
    let cells: Vec<(f64, f64)> = (0..=beta_points)
        .flat_map(|bi| {
            let b = (bi as f64 * opts.beta_step).min(1.0);
            (0..opts.gamma_points).map(move |gi| (b, TAU * gi as f64 / opts.gamma_points as f64))
        })
        .collect();
    let costs = cells
        .par_iter()
        .map(|&(b, g)| problem.cost(b, g))
        .collect::<Result<Vec<_>, _>>()?;
    // First minimum in cell order, independent of thread scheduling.
    let mut best = 0;
    for (i, &c) in costs.iter().enumerate() {
        if c < costs[best] {
            best = i;
        }
    }
    let (mut beta, mut gamma) = cells[best];
    let mut cost = costs[best];

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        if cost <= 1e-34 {
            converged = true;
            break;
        }
        let r = problem.residuals(beta, gamma)?;
        let j = problem.jacobian(beta, gamma)?;
        let mut a = [[0.0; 2]; 2];
        let mut g = [0.0; 2];
        for (row, ri) in j.iter().zip(&r) {
            for p in 0..2 {
                g[p] += row[p] * ri;
                for q in 0..2 {
                    a[p][q] += row[p] * row[q];
                }
            }
        }
        // β₁ pinned at a bound while the descent direction points outward.
        let pinned = (beta <= 0.0 && g[0] > 0.0) || (beta >= 1.0 && g[0] < 0.0);
        let mut accepted = false;
        while lambda < 1e20 {
            let d0 = a[0][0] + lambda * a[0][0].max(1e-12);
            let d1 = a[1][1] + lambda * a[1][1].max(1e-12);
            let step = if pinned {
                [0.0, -g[1] / d1]
            } else {
                let det = d0 * d1 - a[0][1] * a[1][0];
                [
                    -(d1 * g[0] - a[0][1] * g[1]) / det,
                    -(d0 * g[1] - a[1][0] * g[0]) / det,
                ]
            };
            let nb = (beta + step[0]).clamp(0.0, 1.0);
            let ng = gamma + step[1];
            let moved = (nb - beta).abs().max((ng - gamma).abs());
            if moved <= opts.tolerance {
                converged = true;
                break;
            }
            let nc = problem.cost(nb, ng)?;
            if nc <= cost {
                beta = nb;
                gamma = ng;
                cost = nc;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // Damping exhausted without a decrease: no descent direction left.
            converged = true;
            break;
        }
    }

    let alpha1_hat = infer_alpha1(beta)?;
    Ok(FitResult {
        beta1_hat: beta,
        gamma_hat: wrap_2pi(gamma),
        alpha1_hat,
        residual_sum_sq: cost,
        converged,
        gamma_unidentifiable: beta < GAMMA_IDENTIFIABILITY_THRESHOLD,
        iterations,
    })
}

/// Noiseless closed-form scan, e.g. as synthetic fit input.
pub fn closed_form_scan(
    beta1: f64,
    gamma: f64,
    phis: &[f64],
) -> Result<FringeScan, EstimationError> {
    let records = phis
        .iter()
        .map(|&phi| ClosedFormModel.predict(beta1, gamma, phi))
        .collect::<Result<Vec<_>, _>>()?;
    if !(0.0..=1.0).contains(&beta1) {
        return Err(EstimationError::Domain(beta1));
    }
    Ok(FringeScan {
        parameter: "phi".to_string(),
        grid: phis.to_vec(),
        records,
        detect_path: crate::state::PathId::new("o'").expect("nonempty"),
    })
}
