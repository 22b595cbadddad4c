//! Detection counts, conditional states, fringe scans and visibility.

use std::f64::consts::TAU;

use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::{Bindings, CircuitPlan, Diagnostics, ExecOptions};
use crate::error::EngineError;
use crate::state::{Band, BiphotonState, PathId, Polarization};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("`{0}` is not a free parameter of the plan")]
    NotFree(String),
    #[error("{0}")]
    Binding(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl From<Diagnostics> for ScanError {
    fn from(d: Diagnostics) -> Self {
        ScanError::Binding(
            d.iter()
                .map(|e| e.message.clone())
                .collect::<Vec<_>>()
                .join("; "),
        )
    }
}

/// Expected horizontal and vertical photon numbers on a detection path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountResult {
    pub n_h: f64,
    pub n_v: f64,
}

/// ⟨a†a⟩ for each polarization of the `band` photon on `path`, summed over all
/// tags and partner modes.
pub fn counts(state: &BiphotonState, path: &PathId, band: Band) -> CountResult {
    let mut out = CountResult::default();
    for (pair, amp) in state.iter() {
        let m = pair.photon(band);
        if m.path != *path {
            continue;
        }
        match m.pol {
            Polarization::H => out.n_h += amp.norm_sqr(),
            Polarization::V => out.n_v += amp.norm_sqr(),
        }
    }
    out
}

/// Entries whose `band` photon is on `path`; amplitudes are not renormalized.
pub fn conditional_state(state: &BiphotonState, path: &PathId, band: Band) -> BiphotonState {
    state.filter(|pair| pair.photon(band).path == *path)
}

/// `n` evenly spaced phases in `[0, 2π)`.
pub fn uniform_phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Counts at the plan's detection path for each value of one swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    pub parameter: String,
    pub grid: Vec<f64>,
    pub records: Vec<CountResult>,
    pub detect_path: PathId,
}

impl FringeScan {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn n_h(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.n_h).collect()
    }

    pub fn n_v(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.n_v).collect()
    }

    /// Visibility of the vertical channel over the scanned grid.
    pub fn vertical_visibility(&self) -> Option<VisibilityResult> {
        visibility(&self.grid, &self.n_v())
    }

    /// `<parameter>,n_h,n_v` header, 17 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},n_h,n_v\n", self.parameter);
        for (x, r) in self.grid.iter().zip(&self.records) {
            out.push_str(&format!("{x:.16e},{:.16e},{:.16e}\n", r.n_h, r.n_v));
        }
        out
    }
}

/// Runs the plan once per grid value of `sweep`; every other free parameter
/// must be bound in `bindings`. Grid points run in parallel but come back in
/// grid order.
pub fn fringe_scan(
    plan: &CircuitPlan,
    bindings: &Bindings,
    sweep: &str,
    grid: &[f64],
    opts: &ExecOptions,
) -> Result<FringeScan, ScanError> {
    if !plan.free_parameters.contains(sweep) {
        return Err(ScanError::NotFree(sweep.to_string()));
    }
    // Surface unbound parameters even for an empty grid.
    let mut probe = bindings.clone();
    probe.insert(sweep.to_string(), 0.0);
    let missing: Vec<&String> = plan
        .free_parameters
        .iter()
        .filter(|n| !probe.contains_key(*n))
        .collect();
    if !missing.is_empty() {
        let names: Vec<String> = missing.iter().map(|n| format!("`{n}`")).collect();
        return Err(ScanError::Binding(format!(
            "unbound parameter(s): {}",
            names.join(", ")
        )));
    }
    let records = grid
        .par_iter()
        .map(|&x| {
            let mut b = bindings.clone();
            b.insert(sweep.to_string(), x);
            let state = plan.bind(&b)?.execute(opts)?;
            Ok(counts(&state, &plan.detect_path, plan.detect_band))
        })
        .collect::<Result<Vec<_>, ScanError>>()?;
    Ok(FringeScan {
        parameter: sweep.to_string(),
        grid: grid.to_vec(),
        records,
        detect_path: plan.detect_path.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityResult {
    /// (max − min)/(max + min), or 0 when both vanish.
    pub value: f64,
    pub phi_at_max: f64,
    pub index_at_max: usize,
    pub max: f64,
    pub min: f64,
    /// Set when every value is zero.
    pub degenerate: bool,
}

/// Fringe visibility of `values` sampled at `grid`. Ties for the maximum go to
/// the smallest grid value. Returns `None` for empty input.
pub fn visibility(grid: &[f64], values: &[f64]) -> Option<VisibilityResult> {
    assert_eq!(grid.len(), values.len(), "grid and values differ in length");
    if values.is_empty() {
        return None;
    }
    let mut imax = 0;
    let mut min = values[0];
    for (i, &v) in values.iter().enumerate() {
        let better = v > values[imax] || (v == values[imax] && grid[i] < grid[imax]);
        if better {
            imax = i;
        }
        min = min.min(v);
    }
    let max = values[imax];
    let degenerate = max + min == 0.0;
    if degenerate {
        log::warn!("visibility of an all-zero channel is defined as 0");
    }
    let value = if degenerate {
        0.0
    } else {
        (max - min) / (max + min)
    };
    Some(VisibilityResult {
        value,
        phi_at_max: grid[imax],
        index_at_max: imax,
        max,
        min,
        degenerate,
    })
}

/// Least-squares fit of `c0 + c1 cos φ + c2 sin φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub offset: f64,
    pub amplitude: f64,
    /// φ of the maximum, in `[0, 2π)`.
    pub phase_of_max: f64,
}

impl Sinusoid {
    pub fn fit(grid: &[f64], values: &[f64]) -> Option<Sinusoid> {
        if grid.len() < 3 || grid.len() != values.len() {
            return None;
        }
        // Normal equations for the 3-term basis.
        let mut a = [[0.0f64; 3]; 3];
        let mut b = [0.0f64; 3];
        for (&x, &y) in grid.iter().zip(values) {
            let basis = [1.0, x.cos(), x.sin()];
            for i in 0..3 {
                b[i] += basis[i] * y;
                for j in 0..3 {
                    a[i][j] += basis[i] * basis[j];
                }
            }
        }
        let c = solve3(a, b)?;
        Some(Sinusoid {
            offset: c[0],
            amplitude: c[1].hypot(c[2]),
            phase_of_max: crate::angle::wrap_2pi(c[2].atan2(c[1])),
        })
    }

    /// (max − min)/(max + min) of the fitted curve.
    pub fn visibility(&self) -> f64 {
        if self.offset == 0.0 {
            0.0
        } else {
            self.amplitude / self.offset
        }
    }
}

#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}
