//! Validated, executable circuit plans.

use std::collections::{BTreeMap, BTreeSet};

use crate::elements::{
    self, BsConvention, MergeRule, PreparationSpec, WavePlateKind, WavePlateSetting,
};
use crate::error::EngineError;
use crate::state::{Band, BiphotonState, PathId, SourceSpec, DEFAULT_PRUNE_EPSILON};
use crate::Complex64;

use super::ast::{CircuitAst, Stmt, Value};
use super::diagnostics::{Diagnostic, Diagnostics, Span};
use super::parser::E_MULTI_DETECT;

pub const E_UNKNOWN_PATH: &str = "E_UNKNOWN_PATH";
pub const E_NO_DETECT: &str = "E_NO_DETECT";
pub const E_NO_SOURCE: &str = "E_NO_SOURCE";
pub const E_DUP_SOURCE: &str = "E_DUP_SOURCE";
pub const E_SOURCE_ORDER: &str = "E_SOURCE_ORDER";
pub const E_DM_ALIAS: &str = "E_DM_ALIAS";
pub const E_BS_ALIAS: &str = "E_BS_ALIAS";
pub const E_MISSING_PARAM: &str = "E_MISSING_PARAM";
pub const E_NORM: &str = "E_NORM";
pub const E_PARAM_VALUE: &str = "E_PARAM_VALUE";

/// Named scalar bindings for free parameters, in internal units (radians for
/// angles and phases).
pub type Bindings = BTreeMap<String, f64>;

/// Numeric slot of a step: a resolved constant or a free parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Fixed(f64),
    Free(String),
}

impl Param {
    pub fn free(name: &str) -> Self {
        Param::Free(name.to_string())
    }

    fn from_value(v: &Value, degrees: bool) -> Self {
        match v {
            Value::Num(x) if degrees => Param::Fixed(x.to_radians()),
            Value::Num(x) => Param::Fixed(*x),
            Value::Param(name) => Param::Free(name.clone()),
        }
    }

    fn resolve(&self, bindings: &Bindings) -> Result<f64, String> {
        match self {
            Param::Fixed(x) => Ok(*x),
            Param::Free(name) => bindings.get(name).copied().ok_or_else(|| name.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Prepare {
        path: PathId,
        band: Band,
        alpha: Param,
        beta: Param,
        gamma: Param,
    },
    WavePlate {
        kind: WavePlateKind,
        path: PathId,
        band: Option<Band>,
        angle: Param,
    },
    BeamSplitter {
        input: PathId,
        out_t: PathId,
        out_r: PathId,
    },
    BeamSplitter2 {
        in_a: PathId,
        in_b: PathId,
        out_a: PathId,
        out_b: PathId,
    },
    Dichroic {
        input: PathId,
        signal_out: PathId,
        idler_out: PathId,
    },
    Phase {
        path: PathId,
        band: Option<Band>,
        phi: Param,
    },
    Merge(MergeRule),
}

impl Step {
    fn params(&self) -> Vec<&Param> {
        match self {
            Step::Prepare {
                alpha, beta, gamma, ..
            } => vec![alpha, beta, gamma],
            Step::WavePlate { angle, .. } => vec![angle],
            Step::Phase { phi, .. } => vec![phi],
            _ => Vec::new(),
        }
    }

    /// Short label used in traces.
    pub fn label(&self) -> String {
        match self {
            Step::Prepare { path, band, .. } => format!("prepare {path} {band}"),
            Step::WavePlate { kind, path, .. } => match kind {
                WavePlateKind::Half => format!("hwp {path}"),
                WavePlateKind::Quarter => format!("qwp {path}"),
            },
            Step::BeamSplitter { input, .. } => format!("bs {input}"),
            Step::BeamSplitter2 { in_a, in_b, .. } => format!("bs2 {in_a} {in_b}"),
            Step::Dichroic { input, .. } => format!("dm {input}"),
            Step::Phase { path, .. } => format!("phase {path}"),
            Step::Merge(r) => format!("merge {} {} {}", r.path, r.pol, r.band),
        }
    }
}

/// Options affecting how a plan is run, not what it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecOptions {
    pub bs_convention: BsConvention,
    /// When false, merge steps are skipped and all source tags survive.
    pub merge: bool,
    pub prune_epsilon: f64,
    /// Extra phase e^{iχ} on the H amplitude of preparations at (path, band).
    pub h_phase: Vec<(PathId, Band, f64)>,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            bs_convention: BsConvention::default(),
            merge: true,
            prune_epsilon: DEFAULT_PRUNE_EPSILON,
            h_phase: Vec::new(),
        }
    }
}

/// An ordered, path-checked list of element applications.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitPlan {
    pub sources: Vec<SourceSpec>,
    pub steps: Vec<Step>,
    pub detect_path: PathId,
    pub detect_band: Band,
    pub free_parameters: BTreeSet<String>,
}

/// Step with every parameter resolved.
#[derive(Debug, Clone, PartialEq)]
enum BoundStep {
    Prepare {
        path: PathId,
        band: Band,
        spec: PreparationSpec,
    },
    WavePlate {
        path: PathId,
        band: Option<Band>,
        setting: WavePlateSetting,
    },
    Phase {
        path: PathId,
        band: Option<Band>,
        phi: f64,
    },
    Fixed(Step),
}

/// A plan with all free parameters bound and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPlan {
    plan: CircuitPlan,
    bindings: Bindings,
    steps: Vec<BoundStep>,
}

impl CircuitPlan {
    /// Builds a plan and derives its free-parameter set.
    pub fn new(
        sources: Vec<SourceSpec>,
        steps: Vec<Step>,
        detect_path: PathId,
        detect_band: Band,
    ) -> Self {
        let free_parameters = steps
            .iter()
            .flat_map(Step::params)
            .filter_map(|p| match p {
                Param::Free(n) => Some(n.clone()),
                Param::Fixed(_) => None,
            })
            .collect();
        CircuitPlan {
            sources,
            steps,
            detect_path,
            detect_band,
            free_parameters,
        }
    }

    /// Resolves every free parameter. Missing names produce `E_MISSING_PARAM`;
    /// preparation amplitudes off the unit circle produce `E_NORM`.
    pub fn bind(&self, bindings: &Bindings) -> Result<BoundPlan, Diagnostics> {
        let mut diags = Diagnostics::new();
        let nowhere = Span::new(1, 1, 0);
        let missing: Vec<&String> = self
            .free_parameters
            .iter()
            .filter(|n| !bindings.contains_key(*n))
            .collect();
        for name in &missing {
            diags.push(Diagnostic::error(
                E_MISSING_PARAM,
                nowhere,
                format!("parameter `{name}` is not bound"),
            ));
        }
        if !missing.is_empty() {
            return Err(diags);
        }
        let get = |p: &Param| p.resolve(bindings).expect("checked above");
        let mut steps = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let bound = match step {
                Step::Prepare {
                    path,
                    band,
                    alpha,
                    beta,
                    gamma,
                } => {
                    let (a, b, g) = (get(alpha), get(beta), get(gamma));
                    match PreparationSpec::new(a, b, g) {
                        Ok(spec) => BoundStep::Prepare {
                            path: path.clone(),
                            band: *band,
                            spec,
                        },
                        Err(EngineError::Normalization(n)) => {
                            diags.push(Diagnostic::error(
                                E_NORM,
                                nowhere,
                                format!("prepare {path} {band}: alpha² + beta² = {n}, expected 1"),
                            ));
                            continue;
                        }
                        Err(e) => {
                            diags.push(Diagnostic::error(
                                E_PARAM_VALUE,
                                nowhere,
                                format!("prepare {path} {band}: {e}"),
                            ));
                            continue;
                        }
                    }
                }
                Step::WavePlate {
                    kind,
                    path,
                    band,
                    angle,
                } => BoundStep::WavePlate {
                    path: path.clone(),
                    band: *band,
                    setting: WavePlateSetting::new(*kind, get(angle)),
                },
                Step::Phase { path, band, phi } => BoundStep::Phase {
                    path: path.clone(),
                    band: *band,
                    phi: get(phi),
                },
                other => BoundStep::Fixed(other.clone()),
            };
            steps.push(bound);
        }
        if diags.has_errors() {
            return Err(diags);
        }
        Ok(BoundPlan {
            plan: self.clone(),
            bindings: bindings.clone(),
            steps,
        })
    }
}

impl BoundPlan {
    pub fn plan(&self) -> &CircuitPlan {
        &self.plan
    }

    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    pub fn execute(&self, opts: &ExecOptions) -> Result<BiphotonState, EngineError> {
        let mut state = BiphotonState::initial(&self.plan.sources, opts.prune_epsilon)?;
        for step in &self.steps {
            state = self.apply(&state, step, opts)?;
        }
        Ok(state)
    }

    /// The initial state followed by the state after every step, with labels.
    pub fn execute_traced(
        &self,
        opts: &ExecOptions,
    ) -> Result<Vec<(String, BiphotonState)>, EngineError> {
        let mut state = BiphotonState::initial(&self.plan.sources, opts.prune_epsilon)?;
        let mut trace = vec![("initial".to_string(), state.clone())];
        for (step, plan_step) in self.steps.iter().zip(&self.plan.steps) {
            state = self.apply(&state, step, opts)?;
            trace.push((plan_step.label(), state.clone()));
        }
        Ok(trace)
    }

    fn apply(
        &self,
        state: &BiphotonState,
        step: &BoundStep,
        opts: &ExecOptions,
    ) -> Result<BiphotonState, EngineError> {
        let conv = opts.bs_convention;
        match step {
            BoundStep::Prepare { path, band, spec } => {
                let chi = opts
                    .h_phase
                    .iter()
                    .find(|(p, b, _)| p == path && b == band)
                    .map_or(0.0, |(_, _, chi)| *chi);
                let h = Complex64::from_polar(spec.alpha(), chi);
                elements::prepare_beam_with(state, path, *band, h, *spec)
            }
            BoundStep::WavePlate {
                path,
                band,
                setting,
            } => elements::apply_waveplate(state, path, *band, *setting),
            BoundStep::Phase { path, band, phi } => {
                Ok(elements::apply_phase(state, path, *band, *phi))
            }
            BoundStep::Fixed(step) => match step {
                Step::BeamSplitter {
                    input,
                    out_t,
                    out_r,
                } => elements::apply_bs_single(state, input, out_t, out_r, conv),
                Step::BeamSplitter2 {
                    in_a,
                    in_b,
                    out_a,
                    out_b,
                } => elements::apply_bs_dual(state, in_a, in_b, out_a, out_b, conv),
                Step::Dichroic {
                    input,
                    signal_out,
                    idler_out,
                } => elements::apply_dichroic(state, input, signal_out, idler_out),
                Step::Merge(rule) if opts.merge => {
                    Ok(elements::apply_merge(state, std::slice::from_ref(rule)))
                }
                Step::Merge(_) => Ok(state.clone()),
                Step::Prepare { .. } | Step::WavePlate { .. } | Step::Phase { .. } => {
                    unreachable!("parameterized steps are bound separately")
                }
            },
        }
    }
}

/// Checks path flow and detect/source structure, producing a plan.
pub fn validate(ast: &CircuitAst) -> Result<CircuitPlan, Diagnostics> {
    let mut diags = Diagnostics::new();
    let mut known: BTreeSet<PathId> = BTreeSet::new();
    let mut sources: Vec<SourceSpec> = Vec::new();
    let mut steps = Vec::new();
    let mut detect: Option<(PathId, Band, Span)> = None;
    let mut seen_element = false;

    let need = |path: &PathId, span: Span, known: &BTreeSet<PathId>, diags: &mut Diagnostics| {
        if !known.contains(path) {
            diags.push(Diagnostic::error(
                E_UNKNOWN_PATH,
                span,
                format!("path `{path}` is used before anything is routed to it"),
            ));
        }
    };

    for st in &ast.statements {
        let span = st.span;
        if !matches!(st.stmt, Stmt::Source { .. } | Stmt::Detect { .. }) {
            seen_element = true;
        }
        match &st.stmt {
            Stmt::Source {
                name,
                id,
                signal,
                idler,
                pol,
                phase,
            } => {
                if seen_element {
                    diags.push(Diagnostic::error(
                        E_SOURCE_ORDER,
                        span,
                        format!("source `{name}` must come before the first element"),
                    ));
                }
                if sources.iter().any(|s| s.source_id == *id) {
                    diags.push(Diagnostic::error(
                        E_DUP_SOURCE,
                        span,
                        format!("source id {} is declared twice", id.get()),
                    ));
                }
                known.insert(signal.clone());
                known.insert(idler.clone());
                sources.push(SourceSpec::new(
                    *id,
                    signal.clone(),
                    idler.clone(),
                    *pol,
                    phase.unwrap_or(0.0).to_radians(),
                ));
            }
            Stmt::Prepare {
                path,
                band,
                alpha,
                beta,
                gamma,
            } => {
                need(path, span, &known, &mut diags);
                steps.push(Step::Prepare {
                    path: path.clone(),
                    band: *band,
                    alpha: Param::from_value(alpha, false),
                    beta: Param::from_value(beta, false),
                    gamma: Param::from_value(gamma, true),
                });
            }
            Stmt::WavePlate {
                kind,
                path,
                angle,
                band,
            } => {
                need(path, span, &known, &mut diags);
                steps.push(Step::WavePlate {
                    kind: *kind,
                    path: path.clone(),
                    band: band.and_then(|b| b.filter()),
                    angle: Param::from_value(angle, true),
                });
            }
            Stmt::Bs {
                input,
                out_t,
                out_r,
            } => {
                need(input, span, &known, &mut diags);
                if out_t == out_r {
                    diags.push(Diagnostic::error(
                        E_BS_ALIAS,
                        span,
                        format!("beamsplitter outputs are both `{out_t}`"),
                    ));
                }
                known.insert(out_t.clone());
                known.insert(out_r.clone());
                steps.push(Step::BeamSplitter {
                    input: input.clone(),
                    out_t: out_t.clone(),
                    out_r: out_r.clone(),
                });
            }
            Stmt::Bs2 {
                in_a,
                in_b,
                out_a,
                out_b,
            } => {
                need(in_a, span, &known, &mut diags);
                need(in_b, span, &known, &mut diags);
                if out_a == out_b || in_a == in_b {
                    diags.push(Diagnostic::error(
                        E_BS_ALIAS,
                        span,
                        "beamsplitter inputs and outputs must be distinct pairs",
                    ));
                }
                known.insert(out_a.clone());
                known.insert(out_b.clone());
                steps.push(Step::BeamSplitter2 {
                    in_a: in_a.clone(),
                    in_b: in_b.clone(),
                    out_a: out_a.clone(),
                    out_b: out_b.clone(),
                });
            }
            Stmt::Dm {
                input,
                signal,
                idler,
            } => {
                need(input, span, &known, &mut diags);
                if signal == idler {
                    diags.push(Diagnostic::error(
                        E_DM_ALIAS,
                        span,
                        format!("dichroic sends both bands to `{signal}`"),
                    ));
                }
                known.insert(signal.clone());
                known.insert(idler.clone());
                steps.push(Step::Dichroic {
                    input: input.clone(),
                    signal_out: signal.clone(),
                    idler_out: idler.clone(),
                });
            }
            Stmt::Phase { path, value, band } => {
                need(path, span, &known, &mut diags);
                steps.push(Step::Phase {
                    path: path.clone(),
                    band: band.and_then(|b| b.filter()),
                    phi: Param::from_value(value, true),
                });
            }
            Stmt::Merge { path, pol, band } => {
                need(path, span, &known, &mut diags);
                steps.push(Step::Merge(MergeRule::new(path.clone(), *pol, *band)));
            }
            Stmt::Detect { path, band } => {
                if let Some((_, _, first)) = &detect {
                    diags.push(Diagnostic::error(
                        E_MULTI_DETECT,
                        span,
                        format!("second `detect` statement; the first is at {first}"),
                    ));
                } else {
                    detect = Some((path.clone(), *band, span));
                }
            }
        }
    }

    // Detect may name any path produced anywhere in the file.
    if let Some((path, _, span)) = &detect {
        need(path, *span, &known, &mut diags);
    }
    if sources.is_empty() {
        diags.push(Diagnostic::error(
            E_NO_SOURCE,
            Span::new(1, 1, 0),
            "circuit declares no source",
        ));
    }
    let Some((detect_path, detect_band, _)) = detect else {
        diags.push(Diagnostic::error(
            E_NO_DETECT,
            Span::new(1, 1, 0),
            "circuit has no `detect` statement",
        ));
        return Err(diags);
    };
    if diags.has_errors() {
        return Err(diags);
    }
    Ok(CircuitPlan::new(sources, steps, detect_path, detect_band))
}
