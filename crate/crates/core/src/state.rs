//! Sparse two-photon (signal ⊗ idler) state over labeled single-photon modes.
//!
//! A [`BiphotonState`] maps each occupied [`ModePair`] to a complex amplitude.
//! The map is ordered, so iteration and serialization are deterministic. Every
//! operation returns a new state; nothing is mutated in place from the caller's
//! point of view.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::angle::wrap_2pi;
use crate::error::EngineError;
use crate::jones::{self, JonesMatrix};

/// Default magnitude at or below which amplitudes are dropped.
pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-14;

/// Tolerance on `‖U†U − I‖_max` accepted by [`BiphotonState::apply_pol_unitary`].
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

impl FromStr for Polarization {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "H" => Ok(Polarization::H),
            "V" => Ok(Polarization::V),
            _ => Err(()),
        }
    }
}

/// Frequency band of a photon. Dichroic elements route on this alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Band {
    Signal,
    Idler,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Signal => "signal",
            Band::Idler => "idler",
        })
    }
}

impl FromStr for Band {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signal" => Ok(Band::Signal),
            "idler" => Ok(Band::Idler),
            _ => Err(()),
        }
    }
}

/// Identifier of an emitting crystal, either 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceId(u8);

impl SourceId {
    pub fn new(id: u8) -> Result<Self, EngineError> {
        match id {
            1 | 2 => Ok(SourceId(id)),
            _ => Err(EngineError::InvalidSourceId(id)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

/// Which-source information carried by a photon.
///
/// `Tagged` photons remember their crystal; only an explicit merge turns a tag
/// into `Merged`. Modes with different tags are orthogonal and never interfere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceTag {
    Merged,
    Tagged(SourceId),
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceTag::Merged => f.write_str("M"),
            SourceTag::Tagged(id) => write!(f, "{}", id.get()),
        }
    }
}

/// Case-sensitive, nonempty spatial path name (`r`, `e'`, `o'`, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId(String);

impl PathId {
    pub fn new(name: impl Into<String>) -> Result<Self, EngineError> {
        let name = name.into();
        if name.is_empty() {
            return Err(EngineError::EmptyPath);
        }
        Ok(PathId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for PathId {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PathId::new(s)
    }
}

/// One single-photon mode. Field order is the canonical ordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub path: PathId,
    pub band: Band,
    pub pol: Polarization,
    pub tag: SourceTag,
}

impl Mode {
    pub fn new(path: PathId, band: Band, pol: Polarization, tag: SourceTag) -> Self {
        Mode {
            path,
            band,
            pol,
            tag,
        }
    }

    pub fn with_path(&self, path: PathId) -> Self {
        Mode {
            path,
            ..self.clone()
        }
    }

    pub fn with_pol(&self, pol: Polarization) -> Self {
        Mode {
            pol,
            ..self.clone()
        }
    }

    pub fn with_tag(&self, tag: SourceTag) -> Self {
        Mode {
            tag,
            ..self.clone()
        }
    }

    fn matches(&self, path: &PathId, band: Option<Band>) -> bool {
        &self.path == path && band.is_none_or(|b| b == self.band)
    }
}

/// A signal photon together with its idler partner.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModePair {
    signal: Mode,
    idler: Mode,
}

impl ModePair {
    pub fn new(signal: Mode, idler: Mode) -> Result<Self, EngineError> {
        if signal.band != Band::Signal || idler.band != Band::Idler {
            return Err(EngineError::BandMismatch);
        }
        Ok(ModePair { signal, idler })
    }

    pub fn signal(&self) -> &Mode {
        &self.signal
    }

    pub fn idler(&self) -> &Mode {
        &self.idler
    }

    /// The photon of the given band.
    pub fn photon(&self, band: Band) -> &Mode {
        match band {
            Band::Signal => &self.signal,
            Band::Idler => &self.idler,
        }
    }
}

/// Emission parameters of one crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub source_id: SourceId,
    pub signal_path: PathId,
    pub idler_path: PathId,
    pub emitted_pol: Polarization,
    phase: f64,
}

impl SourceSpec {
    pub fn new(
        source_id: SourceId,
        signal_path: PathId,
        idler_path: PathId,
        emitted_pol: Polarization,
        phase: f64,
    ) -> Self {
        SourceSpec {
            source_id,
            signal_path,
            idler_path,
            emitted_pol,
            phase: wrap_2pi(phase),
        }
    }

    /// Emission phase in `[0, 2π)`.
    pub fn phase(&self) -> f64 {
        self.phase
    }
}

/// Sparse map from mode pairs to complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonState {
    amplitudes: BTreeMap<ModePair, Complex64>,
    prune_epsilon: f64,
}

impl Default for BiphotonState {
    fn default() -> Self {
        BiphotonState {
            amplitudes: BTreeMap::new(),
            prune_epsilon: DEFAULT_PRUNE_EPSILON,
        }
    }
}

/// Builds the unnormalized emission state Σ_k e^{iφ_k} |pol_k⟩_idler ⊗ |pol_k⟩_signal.
pub fn initial_state(sources: &[SourceSpec]) -> Result<BiphotonState, EngineError> {
    BiphotonState::initial(sources, DEFAULT_PRUNE_EPSILON)
}

impl BiphotonState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_epsilon(prune_epsilon: f64) -> Result<Self, EngineError> {
        if !prune_epsilon.is_finite() || prune_epsilon < 0.0 {
            return Err(EngineError::InvalidEpsilon(prune_epsilon));
        }
        Ok(BiphotonState {
            amplitudes: BTreeMap::new(),
            prune_epsilon,
        })
    }

    /// Each source contributes one term of unit magnitude.
    pub fn initial(sources: &[SourceSpec], prune_epsilon: f64) -> Result<Self, EngineError> {
        if sources.is_empty() {
            return Err(EngineError::NoSources);
        }
        let mut seen = BTreeSet::new();
        let mut state = Self::with_epsilon(prune_epsilon)?;
        for src in sources {
            if !seen.insert(src.source_id) {
                return Err(EngineError::DuplicateSource(src.source_id.get()));
            }
            let tag = SourceTag::Tagged(src.source_id);
            let pair = ModePair::new(
                Mode::new(src.signal_path.clone(), Band::Signal, src.emitted_pol, tag),
                Mode::new(src.idler_path.clone(), Band::Idler, src.emitted_pol, tag),
            )?;
            *state.amplitudes.entry(pair).or_default() += Complex64::from_polar(1.0, src.phase);
        }
        Ok(state.prune())
    }

    /// Collects entries, summing duplicates, then prunes.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (ModePair, Complex64)>,
        prune_epsilon: f64,
    ) -> Result<Self, EngineError> {
        let mut state = Self::with_epsilon(prune_epsilon)?;
        for (pair, amp) in entries {
            *state.amplitudes.entry(pair).or_default() += amp;
        }
        Ok(state.prune())
    }

    pub fn prune_epsilon(&self) -> f64 {
        self.prune_epsilon
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Entries in canonical mode-pair order.
    pub fn iter(&self) -> impl Iterator<Item = (&ModePair, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, pair: &ModePair) -> Complex64 {
        self.amplitudes.get(pair).copied().unwrap_or_default()
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// Drops entries with magnitude at or below the prune epsilon.
    pub fn prune(&self) -> Self {
        let eps = self.prune_epsilon;
        BiphotonState {
            amplitudes: self
                .amplitudes
                .iter()
                .filter(|(_, a)| a.norm() > eps)
                .map(|(k, a)| (k.clone(), *a))
                .collect(),
            prune_epsilon: eps,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.map_amplitudes(|_, a| a * factor)
    }

    /// Entrywise sum. The result keeps `self`'s prune epsilon.
    pub fn add(&self, other: &BiphotonState) -> Self {
        let mut amplitudes = self.amplitudes.clone();
        for (k, a) in &other.amplitudes {
            *amplitudes.entry(k.clone()).or_default() += *a;
        }
        BiphotonState {
            amplitudes,
            prune_epsilon: self.prune_epsilon,
        }
        .prune()
    }

    /// Rewrites every amplitude in place of its key.
    pub fn map_amplitudes(&self, f: impl Fn(&ModePair, Complex64) -> Complex64) -> Self {
        BiphotonState {
            amplitudes: self
                .amplitudes
                .iter()
                .map(|(k, a)| (k.clone(), f(k, *a)))
                .collect(),
            prune_epsilon: self.prune_epsilon,
        }
        .prune()
    }

    /// Keeps only entries satisfying `keep`. Amplitudes are not renormalized.
    pub fn filter(&self, keep: impl Fn(&ModePair) -> bool) -> Self {
        BiphotonState {
            amplitudes: self
                .amplitudes
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, a)| (k.clone(), *a))
                .collect(),
            prune_epsilon: self.prune_epsilon,
        }
    }

    /// Applies a single-photon linear map to both photons of every entry.
    ///
    /// `f` returns `None` to leave a mode untouched, or the list of
    /// `(image mode, coefficient)` it maps to. Images must keep the band of
    /// their preimage. Colliding keys add coherently.
    pub fn transform_modes<F>(&self, f: F) -> Self
    where
        F: Fn(&Mode) -> Option<Vec<(Mode, Complex64)>>,
    {
        let one = Complex64::new(1.0, 0.0);
        let image = |m: &Mode| f(m).unwrap_or_else(|| vec![(m.clone(), one)]);
        let mut out: BTreeMap<ModePair, Complex64> = BTreeMap::new();
        for (pair, amp) in &self.amplitudes {
            let signals = image(&pair.signal);
            let idlers = image(&pair.idler);
            for (s, cs) in &signals {
                debug_assert_eq!(s.band, Band::Signal);
                for (i, ci) in &idlers {
                    let key = ModePair {
                        signal: s.clone(),
                        idler: i.clone(),
                    };
                    *out.entry(key).or_default() += amp * cs * ci;
                }
            }
        }
        BiphotonState {
            amplitudes: out,
            prune_epsilon: self.prune_epsilon,
        }
        .prune()
    }

    /// Transforms the (H, V) amplitude pair of every mode on `path` (and in
    /// `band_filter`, when given) by `u`.
    pub fn apply_pol_unitary(
        &self,
        path: &PathId,
        band_filter: Option<Band>,
        u: &JonesMatrix,
    ) -> Result<Self, EngineError> {
        let dev = jones::unitarity_deviation(u);
        if dev.is_nan() || dev > UNITARITY_TOLERANCE {
            return Err(EngineError::NonUnitary(dev));
        }
        Ok(self.transform_modes(|m| {
            if !m.matches(path, band_filter) {
                return None;
            }
            let col = m.pol.index();
            Some(
                (0..2)
                    .map(|row| (m.with_pol(Polarization::from_index(row)), u[row][col]))
                    .collect(),
            )
        }))
    }

    /// Moves matching modes from path `from` to path `to`.
    pub fn relabel_path(
        &self,
        from: &PathId,
        to: &PathId,
        band_filter: Option<Band>,
        pol_filter: Option<Polarization>,
    ) -> Self {
        self.transform_modes(|m| {
            if m.matches(from, band_filter) && pol_filter.is_none_or(|p| p == m.pol) {
                Some(vec![(m.with_path(to.clone()), Complex64::new(1.0, 0.0))])
            } else {
                None
            }
        })
    }

    /// Whether any photon (of `band`, if given) sits on `path`.
    pub fn occupies(&self, path: &PathId, band: Option<Band>) -> bool {
        self.amplitudes
            .keys()
            .any(|k| k.signal.matches(path, band) || k.idler.matches(path, band))
    }

    /// All paths holding at least one photon of `band`.
    pub fn paths(&self, band: Band) -> BTreeSet<PathId> {
        self.amplitudes
            .keys()
            .map(|k| k.photon(band).path.clone())
            .collect()
    }

    /// Distinct source tags present on either photon.
    pub fn tags(&self) -> BTreeSet<SourceTag> {
        self.amplitudes
            .keys()
            .flat_map(|k| [k.signal.tag, k.idler.tag])
            .collect()
    }

    /// One line per entry:
    /// `<s_path>,<s_pol>,<s_tag>|<i_path>,<i_pol>,<i_tag>|<re>,<im>` with
    /// 17 significant digits.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        for (k, a) in &self.amplitudes {
            out.push_str(&format!(
                "{},{},{}|{},{},{}|{:.16e},{:.16e}\n",
                k.signal.path,
                k.signal.pol,
                k.signal.tag,
                k.idler.path,
                k.idler.pol,
                k.idler.tag,
                a.re,
                a.im
            ));
        }
        out
    }
}
