//! Optical elements as pure state transformations.
//!
//! Beamsplitters, wave plates, dichroics and phase shifters act on single-photon
//! modes and are lifted to the two-photon state by
//! [`BiphotonState::transform_modes`]. Preparation and merge are modeling steps
//! rather than physical elements: preparation sets the polarization of a freshly
//! emitted beam, and merge erases source tags where the photons from the two
//! crystals are indistinguishable.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::angle::{wrap_2pi, wrap_pi};
use crate::error::EngineError;
use crate::jones::{self, JonesMatrix};
use crate::state::{Band, BiphotonState, Mode, PathId, Polarization, SourceTag};

const NORMALIZATION_TOLERANCE: f64 = 1e-10;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Half-wave plate with fast axis at `h` radians from the x axis.
pub fn hwp_matrix(h: f64) -> JonesMatrix {
    let (s, co) = (2.0 * h).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(-s, 0.0), c(-co, 0.0)]]
}

/// Quarter-wave plate with fast axis at `q` radians, scaled by 1/√2 so that it
/// is unitary.
pub fn qwp_matrix(q: f64) -> JonesMatrix {
    let (s, co) = (2.0 * q).sin_cos();
    let k = FRAC_1_SQRT_2;
    [
        [c(-co * k, k), c(s * k, 0.0)],
        [c(s * k, 0.0), c(co * k, k)],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavePlateKind {
    Half,
    Quarter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePlateSetting {
    pub kind: WavePlateKind,
    fast_axis_angle: f64,
}

impl WavePlateSetting {
    pub fn new(kind: WavePlateKind, fast_axis_angle: f64) -> Self {
        WavePlateSetting {
            kind,
            fast_axis_angle: wrap_pi(fast_axis_angle),
        }
    }

    pub fn half(angle: f64) -> Self {
        Self::new(WavePlateKind::Half, angle)
    }

    pub fn quarter(angle: f64) -> Self {
        Self::new(WavePlateKind::Quarter, angle)
    }

    /// Fast-axis angle in `[0, π)`.
    pub fn angle(&self) -> f64 {
        self.fast_axis_angle
    }

    pub fn matrix(&self) -> JonesMatrix {
        match self.kind {
            WavePlateKind::Half => hwp_matrix(self.fast_axis_angle),
            WavePlateKind::Quarter => qwp_matrix(self.fast_axis_angle),
        }
    }
}

pub fn apply_waveplate(
    state: &BiphotonState,
    path: &PathId,
    band_filter: Option<Band>,
    setting: WavePlateSetting,
) -> Result<BiphotonState, EngineError> {
    state.apply_pol_unitary(path, band_filter, &setting.matrix())
}

/// Polarization of a prepared beam: α|H⟩ + β e^{i·rel_phase}|V⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparationSpec {
    alpha: f64,
    beta: f64,
    rel_phase: f64,
}

impl PreparationSpec {
    pub fn new(alpha: f64, beta: f64, rel_phase: f64) -> Result<Self, EngineError> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite())
            || !rel_phase.is_finite()
        {
            return Err(EngineError::InvalidAmplitude);
        }
        let n = alpha * alpha + beta * beta;
        if (n - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(EngineError::Normalization(n));
        }
        Ok(PreparationSpec {
            alpha,
            beta,
            rel_phase: wrap_2pi(rel_phase),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rel_phase(&self) -> f64 {
        self.rel_phase
    }
}

/// Sets the polarization of V-emitted modes on (`path`, `band`).
pub fn prepare_beam(
    state: &BiphotonState,
    path: &PathId,
    band: Band,
    spec: PreparationSpec,
) -> Result<BiphotonState, EngineError> {
    prepare_beam_with(state, path, band, c(spec.alpha, 0.0), spec)
}

/// As [`prepare_beam`], with an arbitrary complex H amplitude of magnitude
/// `spec.alpha()`. Used to probe that the H-component phase is unobservable.
pub fn prepare_beam_with(
    state: &BiphotonState,
    path: &PathId,
    band: Band,
    h_amplitude: Complex64,
    spec: PreparationSpec,
) -> Result<BiphotonState, EngineError> {
    let conflict = state
        .iter()
        .any(|(k, _)| k.photon(band).path == *path && k.photon(band).pol == Polarization::H);
    if conflict {
        return Err(EngineError::PreparationConflict {
            path: path.clone(),
            band,
        });
    }
    let v_amplitude = Complex64::from_polar(spec.beta, spec.rel_phase);
    Ok(state.transform_modes(|m| {
        if m.band != band || m.path != *path {
            return None;
        }
        Some(vec![
            (m.with_pol(Polarization::H), h_amplitude),
            (m.with_pol(Polarization::V), v_amplitude),
        ])
    }))
}

/// Which wave plate the idler meets first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlateOrder {
    #[default]
    HwpThenQwp,
    QwpThenHwp,
}

/// Preparation produced by a half- and quarter-wave plate acting on |V⟩.
/// The global phase is discarded; with no H component the relative phase is 0.
pub fn waveplates_to_preparation(h: f64, q: f64, order: PlateOrder) -> PreparationSpec {
    let (hw, qw) = (hwp_matrix(h), qwp_matrix(q));
    let m = match order {
        PlateOrder::HwpThenQwp => jones::matmul(&qw, &hw),
        PlateOrder::QwpThenHwp => jones::matmul(&hw, &qw),
    };
    let [ch, cv] = jones::apply(&m, [c(0.0, 0.0), c(1.0, 0.0)]);
    let alpha = ch.norm();
    let beta = cv.norm();
    let rel_phase = if alpha > 1e-12 {
        wrap_2pi(cv.arg() - ch.arg())
    } else {
        0.0
    };
    // Unitarity makes alpha² + beta² = 1 up to rounding; renormalize so the
    // PreparationSpec's normalization check holds exactly.
    let n = (alpha * alpha + beta * beta).sqrt();
    PreparationSpec {
        alpha: alpha / n,
        beta: beta / n,
        rel_phase,
    }
}

/// Beamsplitter phase convention for the 2×2 port matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BsConvention {
    /// (1/√2)·[[1, i], [i, 1]]
    #[default]
    Symmetric,
    /// (1/√2)·[[1, 1], [1, −1]]
    Hadamard,
}

impl BsConvention {
    /// Entry `[out][in]` with port a = 0, port b = 1.
    pub fn matrix(self) -> JonesMatrix {
        let k = FRAC_1_SQRT_2;
        match self {
            BsConvention::Symmetric => [[c(k, 0.0), c(0.0, k)], [c(0.0, k), c(k, 0.0)]],
            BsConvention::Hadamard => [[c(k, 0.0), c(k, 0.0)], [c(k, 0.0), c(-k, 0.0)]],
        }
    }
}

impl fmt::Display for BsConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BsConvention::Symmetric => "symmetric",
            BsConvention::Hadamard => "hadamard",
        })
    }
}

impl FromStr for BsConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "symmetric" => Ok(BsConvention::Symmetric),
            "hadamard" => Ok(BsConvention::Hadamard),
            _ => Err(format!("unknown beamsplitter convention `{s}`")),
        }
    }
}

/// Beamsplitter with one occupied input; `out_t` is the transmitted port.
pub fn apply_bs_single(
    state: &BiphotonState,
    in_path: &PathId,
    out_t: &PathId,
    out_r: &PathId,
    convention: BsConvention,
) -> Result<BiphotonState, EngineError> {
    if out_t == out_r {
        return Err(EngineError::BeamSplitterAlias(out_t.clone()));
    }
    if !state.occupies(in_path, None) {
        log::warn!("beamsplitter input {in_path} is unoccupied; element has no effect");
        return Ok(state.clone());
    }
    let b = convention.matrix();
    Ok(state.transform_modes(|m| {
        (m.path == *in_path).then(|| {
            vec![
                (m.with_path(out_t.clone()), b[0][0]),
                (m.with_path(out_r.clone()), b[1][0]),
            ]
        })
    }))
}

/// Two-input beamsplitter; `in_a` transmits to `out_a`, `in_b` to `out_b`.
pub fn apply_bs_dual(
    state: &BiphotonState,
    in_a: &PathId,
    in_b: &PathId,
    out_a: &PathId,
    out_b: &PathId,
    convention: BsConvention,
) -> Result<BiphotonState, EngineError> {
    if out_a == out_b {
        return Err(EngineError::BeamSplitterAlias(out_a.clone()));
    }
    if in_a == in_b {
        return Err(EngineError::BeamSplitterAlias(in_a.clone()));
    }
    let b = convention.matrix();
    Ok(state.transform_modes(|m| {
        let port = if m.path == *in_a {
            0
        } else if m.path == *in_b {
            1
        } else {
            return None;
        };
        Some(vec![
            (m.with_path(out_a.clone()), b[0][port]),
            (m.with_path(out_b.clone()), b[1][port]),
        ])
    }))
}

/// Routes signal-band modes on `in_path` to `signal_out` and idler-band modes
/// to `idler_out`.
pub fn apply_dichroic(
    state: &BiphotonState,
    in_path: &PathId,
    signal_out: &PathId,
    idler_out: &PathId,
) -> Result<BiphotonState, EngineError> {
    if signal_out == idler_out {
        return Err(EngineError::DichroicAlias(signal_out.clone()));
    }
    Ok(state.transform_modes(|m| {
        if m.path != *in_path {
            return None;
        }
        let out = match m.band {
            Band::Signal => signal_out,
            Band::Idler => idler_out,
        };
        Some(vec![(m.with_path(out.clone()), c(1.0, 0.0))])
    }))
}

/// Multiplies every amplitude with a matching photon by e^{iφ}, once per
/// matching photon.
pub fn apply_phase(
    state: &BiphotonState,
    path: &PathId,
    band_filter: Option<Band>,
    phi: f64,
) -> BiphotonState {
    let factor = Complex64::from_polar(1.0, phi);
    state.transform_modes(|m| {
        (m.path == *path && band_filter.is_none_or(|b| b == m.band))
            .then(|| vec![(m.clone(), factor)])
    })
}

/// Modes on `path` with this polarization and band lose their source tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRule {
    pub path: PathId,
    pub pol: Polarization,
    pub band: Band,
}

impl MergeRule {
    pub fn new(path: PathId, pol: Polarization, band: Band) -> Self {
        MergeRule { path, pol, band }
    }

    fn matches(&self, m: &Mode) -> bool {
        m.path == self.path && m.pol == self.pol && m.band == self.band
    }
}

pub fn apply_merge(state: &BiphotonState, rules: &[MergeRule]) -> BiphotonState {
    state.transform_modes(|m| {
        (matches!(m.tag, SourceTag::Tagged(_)) && rules.iter().any(|r| r.matches(m)))
            .then(|| vec![(m.with_tag(SourceTag::Merged), c(1.0, 0.0))])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{initial_state, ModePair, SourceId, SourceSpec, DEFAULT_PRUNE_EPSILON};
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

    fn p(s: &str) -> PathId {
        PathId::new(s).unwrap()
    }

    fn tagged(id: u8) -> SourceTag {
        SourceTag::Tagged(SourceId::new(id).unwrap())
    }

    fn single(path: &str, pol: Polarization, tag: SourceTag, amp: Complex64) -> BiphotonState {
        // Signal parked on a spectator path so only the idler is exercised.
        let pair = ModePair::new(
            Mode::new(p("spectator"), Band::Signal, Polarization::V, tag),
            Mode::new(p(path), Band::Idler, pol, tag),
        )
        .unwrap();
        BiphotonState::from_entries([(pair, amp)], DEFAULT_PRUNE_EPSILON).unwrap()
    }

    fn idler_amp(s: &BiphotonState, path: &str, pol: Polarization, tag: SourceTag) -> Complex64 {
        s.iter()
            .filter(|(k, _)| {
                k.idler().path == p(path) && k.idler().pol == pol && k.idler().tag == tag
            })
            .map(|(_, a)| *a)
            .sum()
    }

    fn assert_matrix(m: &JonesMatrix, expected: [[(f64, f64); 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                let e = c(expected[i][j].0, expected[i][j].1);
                assert!(
                    (m[i][j] - e).norm() < 1e-15,
                    "[{i}][{j}] {} vs {e}",
                    m[i][j]
                );
            }
        }
    }

    #[test]
    fn hwp_reference_angles() {
        assert_matrix(
            &hwp_matrix(0.0),
            [[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (-1.0, 0.0)]],
        );
        assert_matrix(
            &hwp_matrix(FRAC_PI_4),
            [[(0.0, 0.0), (-1.0, 0.0)], [(-1.0, 0.0), (0.0, 0.0)]],
        );
        for k in 0..100 {
            let h = k as f64 * 0.0731;
            assert!(jones::unitarity_deviation(&hwp_matrix(h)) < 1e-15);
            assert!((jones::determinant(&hwp_matrix(h)) + 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn qwp_reference_angles() {
        let k = FRAC_1_SQRT_2;
        let q0 = qwp_matrix(0.0);
        assert_matrix(&q0, [[(-k, k), (0.0, 0.0)], [(0.0, 0.0), (k, k)]]);
        assert!((q0[0][0].norm() - 1.0).abs() < 1e-15);
        assert!((q0[1][1].norm() - 1.0).abs() < 1e-15);
        assert_matrix(
            &qwp_matrix(FRAC_PI_4),
            [[(0.0, k), (k, 0.0)], [(k, 0.0), (0.0, k)]],
        );
        for i in 0..100 {
            let q = i as f64 * PI / 100.0;
            assert!(jones::unitarity_deviation(&qwp_matrix(q)) < 1e-12);
        }
    }

    #[test]
    fn plates_are_unitary_on_fine_grid() {
        for i in 0..1000 {
            let a = i as f64 * 2.0 * PI / 1000.0 - PI;
            assert!(jones::unitarity_deviation(&hwp_matrix(a)) < 1e-12);
            assert!(jones::unitarity_deviation(&qwp_matrix(a)) < 1e-12);
        }
    }

    #[test]
    fn hwp_and_qwp_do_not_commute() {
        let a = hwp_matrix(FRAC_PI_8);
        let b = qwp_matrix(0.0);
        let d = jones::max_abs_diff(&jones::matmul(&a, &b), &jones::matmul(&b, &a));
        assert!(d > 0.1, "{d}");
    }

    #[test]
    fn setting_angle_is_reduced() {
        let s = WavePlateSetting::half(PI + 0.1);
        assert!((s.angle() - 0.1).abs() < 1e-15);
        assert_eq!(s.kind, WavePlateKind::Half);
    }

    #[test]
    fn hwp45_turns_v_into_minus_h() {
        let s = single("f", Polarization::V, tagged(2), c(1.0, 0.0));
        let t = apply_waveplate(&s, &p("f"), None, WavePlateSetting::half(FRAC_PI_4)).unwrap();
        assert_eq!(t.len(), 1);
        assert!((idler_amp(&t, "f", Polarization::H, tagged(2)) - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hwp0_negates_v() {
        let s = single("f", Polarization::V, tagged(1), c(1.0, 0.0));
        let t = apply_waveplate(&s, &p("f"), None, WavePlateSetting::half(0.0)).unwrap();
        assert_eq!(idler_amp(&t, "f", Polarization::V, tagged(1)), c(-1.0, 0.0));
    }

    #[test]
    fn hwp_theta_on_tagged_h() {
        let theta = 0.37;
        let s = single("f", Polarization::H, tagged(1), c(1.0, 0.0));
        let t = apply_waveplate(&s, &p("f"), None, WavePlateSetting::half(theta)).unwrap();
        let (sn, cs) = (2.0 * theta).sin_cos();
        assert!((idler_amp(&t, "f", Polarization::H, tagged(1)) - cs).norm() < 1e-15);
        assert!((idler_amp(&t, "f", Polarization::V, tagged(1)) + sn).norm() < 1e-15);
        assert_eq!(t.tags(), [tagged(1)].into_iter().collect());
    }

    #[test]
    fn idler_filter_leaves_signal_alone() {
        let src = SourceSpec::new(
            SourceId::new(2).unwrap(),
            p("f"),
            p("f"),
            Polarization::V,
            0.0,
        );
        let s = initial_state(&[src]).unwrap();
        let t = apply_waveplate(
            &s,
            &p("f"),
            Some(Band::Idler),
            WavePlateSetting::half(FRAC_PI_4),
        )
        .unwrap();
        let (k, _) = t.iter().next().unwrap();
        assert_eq!(k.signal().pol, Polarization::V);
        assert_eq!(k.idler().pol, Polarization::H);
    }

    #[test]
    fn preparation_validates_normalization() {
        assert!(PreparationSpec::new(0.6, 0.8, 0.0).is_ok());
        assert!(matches!(
            PreparationSpec::new(0.6, 0.6, 0.0),
            Err(EngineError::Normalization(_))
        ));
        assert_eq!(
            PreparationSpec::new(-0.6, 0.8, 0.0),
            Err(EngineError::InvalidAmplitude)
        );
    }

    #[test]
    fn prepare_splits_v_into_h_and_v() {
        let s = single("r", Polarization::V, tagged(1), c(1.0, 0.0));
        let spec = PreparationSpec::new(0.6, 0.8, 1.0).unwrap();
        let t = prepare_beam(&s, &p("r"), Band::Idler, spec).unwrap();
        assert!((idler_amp(&t, "r", Polarization::H, tagged(1)) - 0.6).norm() < 1e-15);
        let v = idler_amp(&t, "r", Polarization::V, tagged(1));
        assert!((v - Complex64::from_polar(0.8, 1.0)).norm() < 1e-15);
        assert!((t.norm_sq() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prepare_degenerate_specs() {
        let s = single("r", Polarization::V, tagged(1), c(1.0, 0.0));
        let id = prepare_beam(
            &s,
            &p("r"),
            Band::Idler,
            PreparationSpec::new(0.0, 1.0, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(id, s);
        let h = prepare_beam(
            &s,
            &p("r"),
            Band::Idler,
            PreparationSpec::new(1.0, 0.0, 2.0).unwrap(),
        )
        .unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(idler_amp(&h, "r", Polarization::H, tagged(1)), c(1.0, 0.0));
    }

    #[test]
    fn prepare_rejects_existing_h() {
        let s = single("r", Polarization::H, tagged(1), c(1.0, 0.0));
        let spec = PreparationSpec::new(0.6, 0.8, 0.0).unwrap();
        assert!(matches!(
            prepare_beam(&s, &p("r"), Band::Idler, spec),
            Err(EngineError::PreparationConflict { .. })
        ));
    }

    #[test]
    fn waveplate_preparation() {
        for order in [PlateOrder::HwpThenQwp, PlateOrder::QwpThenHwp] {
            let s = waveplates_to_preparation(0.0, 0.0, order);
            assert!(s.alpha() < 1e-15);
            assert!((s.beta() - 1.0).abs() < 1e-15);
            assert_eq!(s.rel_phase(), 0.0);
        }
        let s = waveplates_to_preparation(FRAC_PI_8, 0.0, PlateOrder::HwpThenQwp);
        assert!((s.alpha() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.beta() - FRAC_1_SQRT_2).abs() < 1e-15);
        for i in 0..20 {
            for j in 0..20 {
                let s = waveplates_to_preparation(
                    i as f64 * 0.157,
                    j as f64 * 0.157,
                    PlateOrder::default(),
                );
                assert!((s.alpha().powi(2) + s.beta().powi(2) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bs_single_splits_and_keeps_tags() {
        let s = single("r", Polarization::V, tagged(1), c(1.0, 0.0));
        let t = apply_bs_single(&s, &p("r"), &p("e"), &p("f"), BsConvention::Symmetric).unwrap();
        assert!(
            (idler_amp(&t, "e", Polarization::V, tagged(1)) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15
        );
        assert!(
            (idler_amp(&t, "f", Polarization::V, tagged(1)) - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15
        );
        assert!((t.norm_sq() - 1.0).abs() < 1e-15);
        assert_eq!(t.tags(), s.tags());
    }

    #[test]
    fn bs_single_unoccupied_input_is_noop() {
        let s = single("r", Polarization::V, tagged(1), c(1.0, 0.0));
        let t = apply_bs_single(&s, &p("q"), &p("e"), &p("f"), BsConvention::Symmetric).unwrap();
        assert_eq!(s, t);
        assert!(apply_bs_single(&s, &p("r"), &p("e"), &p("e"), BsConvention::Symmetric).is_err());
    }

    #[test]
    fn bs_dual_single_input_matches_single_bs() {
        let s = single("e", Polarization::H, tagged(1), c(1.0, 0.0));
        let t = apply_bs_dual(
            &s,
            &p("e"),
            &p("f"),
            &p("e'"),
            &p("f'"),
            BsConvention::Symmetric,
        )
        .unwrap();
        assert!(
            (idler_amp(&t, "e'", Polarization::H, tagged(1)) - c(FRAC_1_SQRT_2, 0.0)).norm()
                < 1e-15
        );
        assert!(
            (idler_amp(&t, "f'", Polarization::H, tagged(1)) - c(0.0, FRAC_1_SQRT_2)).norm()
                < 1e-15
        );
    }

    #[test]
    fn bs_dual_recombines_split_beam() {
        // (1/√2 on e, i/√2 on f) → (0 on e', i on f')
        let s = single(
            "e",
            Polarization::V,
            SourceTag::Merged,
            c(FRAC_1_SQRT_2, 0.0),
        )
        .add(&single(
            "f",
            Polarization::V,
            SourceTag::Merged,
            c(0.0, FRAC_1_SQRT_2),
        ));
        let t = apply_bs_dual(
            &s,
            &p("e"),
            &p("f"),
            &p("e'"),
            &p("f'"),
            BsConvention::Symmetric,
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert!(
            (idler_amp(&t, "f'", Polarization::V, SourceTag::Merged) - c(0.0, 1.0)).norm() < 1e-15
        );
    }

    #[test]
    fn bs_conventions_are_unitary() {
        for conv in [BsConvention::Symmetric, BsConvention::Hadamard] {
            assert!(jones::unitarity_deviation(&conv.matrix()) < 1e-15);
            assert_eq!(conv.to_string().parse::<BsConvention>(), Ok(conv));
        }
    }

    #[test]
    fn dichroic_routes_by_band() {
        let src = SourceSpec::new(
            SourceId::new(1).unwrap(),
            p("f'"),
            p("f'"),
            Polarization::V,
            0.0,
        );
        let s = initial_state(&[src]).unwrap();
        let t = apply_dichroic(&s, &p("f'"), &p("o"), &p("f'")).unwrap();
        let (k, _) = t.iter().next().unwrap();
        assert_eq!(k.signal().path, p("o"));
        assert_eq!(k.idler().path, p("f'"));
        assert_eq!(t.norm_sq(), s.norm_sq());
        assert!(matches!(
            apply_dichroic(&s, &p("f'"), &p("o"), &p("o")),
            Err(EngineError::DichroicAlias(_))
        ));
    }

    #[test]
    fn dichroic_identity_routing_for_idler_only_path() {
        let s = single("f'", Polarization::V, tagged(1), c(1.0, 0.0));
        assert_eq!(apply_dichroic(&s, &p("f'"), &p("o"), &p("f'")).unwrap(), s);
    }

    #[test]
    fn phase_shifts() {
        let s = single("r", Polarization::V, tagged(2), c(0.3, 0.4));
        assert_eq!(apply_phase(&s, &p("r"), None, 0.0), s);
        let t = apply_phase(&s, &p("r"), None, PI);
        assert!((idler_amp(&t, "r", Polarization::V, tagged(2)) - c(-0.3, -0.4)).norm() < 1e-15);
        assert_eq!(apply_phase(&s, &p("r"), Some(Band::Signal), PI), s);
    }

    #[test]
    fn merge_only_touches_matching_modes() {
        let h = single("r", Polarization::H, tagged(1), c(0.6, 0.0));
        let v = single("r", Polarization::V, tagged(1), c(0.8, 0.0));
        let s = h.add(&v);
        let rules = [MergeRule::new(p("r"), Polarization::V, Band::Idler)];
        let t = apply_merge(&s, &rules);
        assert_eq!(idler_amp(&t, "r", Polarization::H, tagged(1)), c(0.6, 0.0));
        assert_eq!(
            idler_amp(&t, "r", Polarization::V, SourceTag::Merged),
            c(0.8, 0.0)
        );
        assert_eq!(
            apply_merge(&s, &[MergeRule::new(p("q"), Polarization::V, Band::Idler)]),
            s
        );
    }
}
