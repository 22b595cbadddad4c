//! Built-in circuit for the two-crystal setup with a Mach-Zehnder stage.

use std::f64::consts::FRAC_PI_4;

use crate::elements::{MergeRule, WavePlateKind};
use crate::state::{Band, PathId, Polarization, SourceId, SourceSpec};

use super::diagnostics::Diagnostics;
use super::plan::{Bindings, BoundPlan, CircuitPlan, Param, Step};

/// Text of the shipped circuit file the preset mirrors.
pub const FIG1_SOURCE: &str = include_str!("../../corpus/fig1.qiup");

/// Free parameters of [`fig1_plan`].
pub const FIG1_PARAMETERS: [&str; 7] = [
    "alpha1", "alpha2", "beta1", "beta2", "gamma", "phi", "theta",
];

fn p(name: &str) -> PathId {
    PathId::new(name).expect("preset path names are nonempty")
}

fn source(id: u8, path: &str) -> SourceSpec {
    SourceSpec::new(
        SourceId::new(id).expect("preset ids are 1 and 2"),
        p(path),
        p(path),
        Polarization::V,
        0.0,
    )
}

/// Unbound plan with free parameters alpha1, beta1, gamma, alpha2, beta2, phi
/// and theta.
pub fn fig1_plan() -> CircuitPlan {
    let merge = |path: &str, band| Step::Merge(MergeRule::new(p(path), Polarization::V, band));
    let steps = vec![
        Step::Prepare {
            path: p("a"),
            band: Band::Idler,
            alpha: Param::free("alpha1"),
            beta: Param::free("beta1"),
            gamma: Param::free("gamma"),
        },
        Step::Dichroic {
            input: p("a"),
            signal_out: p("b"),
            idler_out: p("r"),
        },
        Step::Prepare {
            path: p("b"),
            band: Band::Signal,
            alpha: Param::free("alpha2"),
            beta: Param::free("beta2"),
            gamma: Param::Fixed(0.0),
        },
        Step::Phase {
            path: p("r"),
            band: Some(Band::Signal),
            phi: Param::free("phi"),
        },
        merge("r", Band::Idler),
        merge("b", Band::Signal),
        merge("r", Band::Signal),
        Step::BeamSplitter {
            input: p("r"),
            out_t: p("e"),
            out_r: p("f"),
        },
        Step::WavePlate {
            kind: WavePlateKind::Half,
            path: p("f"),
            band: None,
            angle: Param::free("theta"),
        },
        Step::BeamSplitter2 {
            in_a: p("e"),
            in_b: p("f"),
            out_a: p("e'"),
            out_b: p("f'"),
        },
        Step::Dichroic {
            input: p("f'"),
            signal_out: p("o"),
            idler_out: p("f'"),
        },
        Step::BeamSplitter2 {
            in_a: p("o"),
            in_b: p("b"),
            out_a: p("o'"),
            out_b: p("b'"),
        },
    ];
    CircuitPlan::new(
        vec![source(1, "a"), source(2, "r")],
        steps,
        p("o'"),
        Band::Signal,
    )
}

/// The preset with every parameter bound.
pub fn fig1_preset(params: &Bindings) -> Result<BoundPlan, Diagnostics> {
    fig1_plan().bind(params)
}

/// Scalar settings of the preset; alphas follow from normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig1Params {
    pub beta1: f64,
    pub gamma: f64,
    pub phi: f64,
    pub theta: f64,
    pub beta2: f64,
}

impl Fig1Params {
    /// β₂ = 1 and θ = 45°, the regime of the closed-form counts.
    pub fn closed_form_regime(beta1: f64, gamma: f64, phi: f64) -> Self {
        Fig1Params {
            beta1,
            gamma,
            phi,
            theta: FRAC_PI_4,
            beta2: 1.0,
        }
    }

    pub fn bindings(&self) -> Bindings {
        let alpha = |b: f64| (1.0 - b * b).max(0.0).sqrt();
        [
            ("alpha1", alpha(self.beta1)),
            ("beta1", self.beta1),
            ("gamma", self.gamma),
            ("alpha2", alpha(self.beta2)),
            ("beta2", self.beta2),
            ("phi", self.phi),
            ("theta", self.theta),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}
