//! Dense-matrix model of the fig1 interferometer, written independently of the
//! sparse engine. Each photon lives in a 60-dimensional space
//! (10 paths × 2 polarizations × 3 tags); the pair amplitude is a 60×60 matrix
//! Ψ[signal][idler] that evolves as Ψ → U_s Ψ U_iᵀ.

#![allow(dead_code)]

use qiup_core::circuit::{fig1_plan, ExecOptions, Fig1Params};
use qiup_core::elements::BsConvention;
use qiup_core::observables::counts;
use qiup_core::state::{Band, BiphotonState, PathId};
use qiup_core::Complex64 as C;

pub const PATHS: [&str; 10] = ["a", "b", "r", "e", "f", "e'", "f'", "o", "o'", "b'"];
pub const DIM: usize = PATHS.len() * 6;
pub const H: usize = 0;
pub const V: usize = 1;
pub const MERGED: usize = 0;
pub const T1: usize = 1;
pub const T2: usize = 2;

type Mat = Vec<Vec<C>>;

pub fn idx(path: &str, pol: usize, tag: usize) -> usize {
    let p = PATHS.iter().position(|&q| q == path).expect("known path");
    (p * 2 + pol) * 3 + tag
}

fn eye() -> Mat {
    let mut m = vec![vec![C::new(0.0, 0.0); DIM]; DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = vec![vec![C::new(0.0, 0.0); DIM]; DIM];
    for i in 0..DIM {
        for k in 0..DIM {
            let aik = a[i][k];
            if aik == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..DIM {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn transpose(a: &Mat) -> Mat {
    (0..DIM)
        .map(|i| (0..DIM).map(|j| a[j][i]).collect())
        .collect()
}

/// Input ports `ins[j]` scatter into `outs[i]` with weight `b[i][j]`,
/// polarization and tag unchanged.
fn ports(ins: &[&str], outs: &[&str], b: &[Vec<C>]) -> Mat {
    let mut m = eye();
    for (j, from) in ins.iter().enumerate() {
        for pol in 0..2 {
            for tag in 0..3 {
                let col = idx(from, pol, tag);
                for row in m.iter_mut() {
                    row[col] = C::new(0.0, 0.0);
                }
                for (i, to) in outs.iter().enumerate() {
                    m[idx(to, pol, tag)][col] += b[i][j];
                }
            }
        }
    }
    m
}

/// 2×2 polarization map `j[out][in]` on one path, every tag.
#[allow(clippy::needless_range_loop)]
fn pol_map(path: &str, j: [[C; 2]; 2]) -> Mat {
    let mut m = eye();
    for tag in 0..3 {
        for pin in 0..2 {
            let col = idx(path, pin, tag);
            for pout in 0..2 {
                m[idx(path, pout, tag)][col] = j[pout][pin];
            }
        }
    }
    m
}

fn phase(path: &str, phi: f64) -> Mat {
    let mut m = eye();
    for pol in 0..2 {
        for tag in 0..3 {
            let i = idx(path, pol, tag);
            m[i][i] = C::from_polar(1.0, phi);
        }
    }
    m
}

fn merge(path: &str, pol: usize) -> Mat {
    let mut m = eye();
    for tag in [T1, T2] {
        let col = idx(path, pol, tag);
        m[col][col] = C::new(0.0, 0.0);
        m[idx(path, pol, MERGED)][col] = C::new(1.0, 0.0);
    }
    m
}

/// V → α e^{iχ} H + β e^{iγ} V.
fn prepare(path: &str, alpha: f64, chi: f64, beta: f64, gamma: f64) -> Mat {
    let z = C::new(0.0, 0.0);
    pol_map(
        path,
        [
            [C::new(1.0, 0.0), C::from_polar(alpha, chi)],
            [z, C::from_polar(beta, gamma)],
        ],
    )
}

fn hwp(theta: f64) -> [[C; 2]; 2] {
    let (c, s) = ((2.0 * theta).cos(), (2.0 * theta).sin());
    [
        [C::new(c, 0.0), C::new(-s, 0.0)],
        [C::new(-s, 0.0), C::new(-c, 0.0)],
    ]
}

fn bs_matrix(hadamard: bool) -> Vec<Vec<C>> {
    let k = std::f64::consts::FRAC_1_SQRT_2;
    if hadamard {
        vec![
            vec![C::new(k, 0.0), C::new(k, 0.0)],
            vec![C::new(k, 0.0), C::new(-k, 0.0)],
        ]
    } else {
        vec![
            vec![C::new(k, 0.0), C::new(0.0, k)],
            vec![C::new(0.0, k), C::new(k, 0.0)],
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Setting {
    pub alpha1: f64,
    pub beta1: f64,
    pub gamma: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub phi: f64,
    pub theta: f64,
    /// Extra phase on α₁.
    pub chi: f64,
    pub merge: bool,
    pub hadamard: bool,
}

impl Setting {
    pub fn new(beta1: f64, gamma: f64, phi: f64, theta: f64, beta2: f64) -> Self {
        Setting {
            alpha1: (1.0 - beta1 * beta1).max(0.0).sqrt(),
            beta1,
            gamma,
            alpha2: (1.0 - beta2 * beta2).max(0.0).sqrt(),
            beta2,
            phi,
            theta,
            chi: 0.0,
            merge: true,
            hadamard: false,
        }
    }

    pub fn regime(beta1: f64, gamma: f64, phi: f64) -> Self {
        Setting::new(beta1, gamma, phi, std::f64::consts::FRAC_PI_4, 1.0)
    }

    /// The same point run through the engine.
    pub fn engine_state(&self) -> BiphotonState {
        let mut b = Fig1Params {
            beta1: self.beta1,
            gamma: self.gamma,
            phi: self.phi,
            theta: self.theta,
            beta2: self.beta2,
        }
        .bindings();
        b.insert("alpha1".into(), self.alpha1);
        b.insert("alpha2".into(), self.alpha2);
        let opts = ExecOptions {
            bs_convention: if self.hadamard {
                BsConvention::Hadamard
            } else {
                BsConvention::Symmetric
            },
            merge: self.merge,
            h_phase: vec![(PathId::new("a").unwrap(), Band::Idler, self.chi)],
            ..ExecOptions::default()
        };
        fig1_plan().bind(&b).unwrap().execute(&opts).unwrap()
    }

    pub fn engine_counts(&self) -> (f64, f64) {
        let c = counts(
            &self.engine_state(),
            &PathId::new("o'").unwrap(),
            Band::Signal,
        );
        (c.n_h, c.n_v)
    }
}

/// Final pair amplitudes Ψ[signal][idler].
pub fn evolve(s: &Setting) -> Mat {
    let bs = bs_matrix(s.hadamard);
    let col0: Vec<Vec<C>> = bs.iter().map(|r| vec![r[0]]).collect();
    let one = vec![vec![C::new(1.0, 0.0)]];

    let mut us = Vec::new();
    let mut ui = Vec::new();
    ui.push(prepare("a", s.alpha1, s.chi, s.beta1, s.gamma));
    us.push(ports(&["a"], &["b"], &one));
    ui.push(ports(&["a"], &["r"], &one));
    us.push(prepare("b", s.alpha2, 0.0, s.beta2, 0.0));
    us.push(phase("r", s.phi));
    if s.merge {
        ui.push(merge("r", V));
        us.push(merge("b", V));
        us.push(merge("r", V));
    }
    for u in [&mut us, &mut ui] {
        u.push(ports(&["r"], &["e", "f"], &col0));
        u.push(pol_map("f", hwp(s.theta)));
        u.push(ports(&["e", "f"], &["e'", "f'"], &bs));
    }
    us.push(ports(&["f'"], &["o"], &one));
    for u in [&mut us, &mut ui] {
        u.push(ports(&["o", "b"], &["o'", "b'"], &bs));
    }

    let total = |ms: &[Mat]| ms.iter().fold(eye(), |acc, m| mul(m, &acc));
    let (us, ui) = (total(&us), total(&ui));

    let mut psi = vec![vec![C::new(0.0, 0.0); DIM]; DIM];
    psi[idx("a", V, T1)][idx("a", V, T1)] = C::new(1.0, 0.0);
    psi[idx("r", V, T2)][idx("r", V, T2)] = C::new(1.0, 0.0);
    mul(&mul(&us, &psi), &transpose(&ui))
}

pub fn norm_sq(psi: &Mat) -> f64 {
    psi.iter().flatten().map(|z| z.norm_sqr()).sum()
}

/// (N_H, N_V) of the signal photon on `path`.
pub fn signal_counts(psi: &Mat, path: &str) -> (f64, f64) {
    let mut n = [0.0; 2];
    for (pol, acc) in n.iter_mut().enumerate() {
        for tag in 0..3 {
            *acc += psi[idx(path, pol, tag)]
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>();
        }
    }
    (n[0], n[1])
}

pub fn oracle_counts(s: &Setting) -> (f64, f64) {
    signal_counts(&evolve(s), "o'")
}

/// Counts the oracle yields in the closed-form regime, worked out by hand
/// from the amplitudes: N_H = 1/8, N_V = (10 + 8 β₁ cos(γ − φ))/16.
pub fn regime_counts(beta1: f64, gamma: f64, phi: f64) -> (f64, f64) {
    (0.125, (10.0 + 8.0 * beta1 * (gamma - phi).cos()) / 16.0)
}

pub fn corpus_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn qiup_files(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "qiup"))
        .collect();
    v.sort();
    v
}

pub fn positive_files() -> Vec<std::path::PathBuf> {
    qiup_files(&corpus_dir())
}

pub fn negative_files() -> Vec<std::path::PathBuf> {
    qiup_files(&corpus_dir().join("negative"))
}

/// `# expect: CODE line:col` from the first line of a negative file.
pub fn golden(text: &str) -> (String, usize, usize) {
    let first = text.lines().next().unwrap_or_default();
    let rest = first
        .strip_prefix("# expect:")
        .expect("golden header")
        .trim();
    let (code, pos) = rest.split_once(' ').expect("code and position");
    let (l, c) = pos.trim().split_once(':').expect("line:col");
    (code.to_string(), l.parse().unwrap(), c.parse().unwrap())
}

/// First error of `text`, as (code, line, col).
pub fn first_error(text: &str) -> Option<(String, usize, usize)> {
    let diags = qiup_core::circuit::compile(text).err()?;
    let e = diags
        .iter()
        .find(|d| d.severity == qiup_core::circuit::Severity::Error)?;
    Some((e.code.to_string(), e.span.line, e.span.col))
}
