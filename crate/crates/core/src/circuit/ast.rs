//! Syntax tree of a circuit file and its canonical pretty-printer.
//!
//! Numeric literals are kept exactly as written (angles in degrees) so that
//! printing and reparsing reproduces the tree.

use std::fmt;

use crate::elements::WavePlateKind;
use crate::state::{Band, PathId, Polarization, SourceId};

use super::diagnostics::Span;

/// A literal or a free parameter reference `$name`.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Param(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Param(name) => write!(f, "${name}"),
        }
    }
}

/// Band selector of elements that may act on both bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandSel {
    Signal,
    Idler,
    Both,
}

impl BandSel {
    pub fn filter(self) -> Option<Band> {
        match self {
            BandSel::Signal => Some(Band::Signal),
            BandSel::Idler => Some(Band::Idler),
            BandSel::Both => None,
        }
    }
}

impl fmt::Display for BandSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandSel::Signal => "signal",
            BandSel::Idler => "idler",
            BandSel::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Source {
        name: String,
        id: SourceId,
        signal: PathId,
        idler: PathId,
        pol: Polarization,
        /// degrees
        phase: Option<f64>,
    },
    Prepare {
        path: PathId,
        band: Band,
        alpha: Value,
        beta: Value,
        /// degrees when literal
        gamma: Value,
    },
    WavePlate {
        kind: WavePlateKind,
        path: PathId,
        /// degrees when literal
        angle: Value,
        band: Option<BandSel>,
    },
    Bs {
        input: PathId,
        out_t: PathId,
        out_r: PathId,
    },
    Bs2 {
        in_a: PathId,
        in_b: PathId,
        out_a: PathId,
        out_b: PathId,
    },
    Dm {
        input: PathId,
        signal: PathId,
        idler: PathId,
    },
    Phase {
        path: PathId,
        /// degrees when literal
        value: Value,
        band: Option<BandSel>,
    },
    Merge {
        path: PathId,
        pol: Polarization,
        band: Band,
    },
    Detect {
        path: PathId,
        band: Band,
    },
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Source {
                name,
                signal,
                idler,
                pol,
                phase,
                ..
            } => {
                write!(f, "source {name} signal={signal} idler={idler} pol={pol}")?;
                if let Some(ph) = phase {
                    write!(f, " phase={ph}")?;
                }
                Ok(())
            }
            Stmt::Prepare {
                path,
                band,
                alpha,
                beta,
                gamma,
            } => write!(
                f,
                "prepare {path} {band} alpha={alpha} beta={beta} gamma={gamma}"
            ),
            Stmt::WavePlate {
                kind,
                path,
                angle,
                band,
            } => {
                let kw = match kind {
                    WavePlateKind::Half => "hwp",
                    WavePlateKind::Quarter => "qwp",
                };
                write!(f, "{kw} {path} angle={angle}")?;
                if let Some(b) = band {
                    write!(f, " band={b}")?;
                }
                Ok(())
            }
            Stmt::Bs {
                input,
                out_t,
                out_r,
            } => write!(f, "bs {input} -> {out_t} {out_r}"),
            Stmt::Bs2 {
                in_a,
                in_b,
                out_a,
                out_b,
            } => write!(f, "bs2 {in_a} {in_b} -> {out_a} {out_b}"),
            Stmt::Dm {
                input,
                signal,
                idler,
            } => write!(f, "dm {input} -> signal: {signal} idler: {idler}"),
            Stmt::Phase { path, value, band } => {
                write!(f, "phase {path} value={value}")?;
                if let Some(b) = band {
                    write!(f, " band={b}")?;
                }
                Ok(())
            }
            Stmt::Merge { path, pol, band } => write!(f, "merge {path} {pol} {band}"),
            Stmt::Detect { path, band } => write!(f, "detect {path} {band}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Statement {
    pub stmt: Stmt,
    pub span: Span,
}

/// Parsed circuit file. Equality compares statements only, not their spans.
#[derive(Debug, Clone, Default)]
pub struct CircuitAst {
    pub statements: Vec<Statement>,
}

impl PartialEq for CircuitAst {
    fn eq(&self, other: &Self) -> bool {
        self.statements.len() == other.statements.len()
            && self
                .statements
                .iter()
                .zip(&other.statements)
                .all(|(a, b)| a.stmt == b.stmt)
    }
}

impl CircuitAst {
    pub fn detect_count(&self) -> usize {
        self.statements
            .iter()
            .filter(|s| matches!(s.stmt, Stmt::Detect { .. }))
            .count()
    }

    pub fn source_count(&self) -> usize {
        self.statements
            .iter()
            .filter(|s| matches!(s.stmt, Stmt::Source { .. }))
            .count()
    }
}

/// One statement per line, canonical spacing, no comments.
impl fmt::Display for CircuitAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{}", s.stmt)?;
        }
        Ok(())
    }
}
