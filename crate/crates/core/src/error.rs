use thiserror::Error;

use crate::state::{Band, PathId};

/// Errors raised by state construction and optical elements.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("path identifier must be nonempty")]
    EmptyPath,
    #[error("source id {0} is not 1 or 2")]
    InvalidSourceId(u8),
    #[error("source id {0} appears more than once")]
    DuplicateSource(u8),
    #[error("no sources given")]
    NoSources,
    #[error("mode pair needs a signal-band and an idler-band photon")]
    BandMismatch,
    #[error("prune epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("matrix is not unitary (‖U†U − I‖_max = {0:e})")]
    NonUnitary(f64),
    #[error("alpha² + beta² = {0} (must be 1 within 1e-10)")]
    Normalization(f64),
    #[error("preparation amplitudes must be nonnegative and finite")]
    InvalidAmplitude,
    #[error("{band} modes on path {path} are already H-polarized; preparation expects V emission")]
    PreparationConflict { path: PathId, band: Band },
    #[error("dichroic outputs must differ, both are {0}")]
    DichroicAlias(PathId),
    #[error("beamsplitter outputs must differ, both are {0}")]
    BeamSplitterAlias(PathId),
}
