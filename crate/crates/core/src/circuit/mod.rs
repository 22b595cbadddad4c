//! Circuit description language, validation and the built-in preset.

pub mod ast;
pub mod diagnostics;
pub mod parser;
pub mod plan;
pub mod preset;

pub use ast::{BandSel, CircuitAst, Statement, Stmt, Value};
pub use diagnostics::{Diagnostic, Diagnostics, Severity, Span};
pub use parser::{parse, Parsed};
pub use plan::{validate, Bindings, BoundPlan, CircuitPlan, ExecOptions, Param, Step};
pub use preset::{fig1_plan, fig1_preset, Fig1Params, FIG1_SOURCE};

/// Parses and validates in one go, returning warnings alongside the plan.
pub fn compile(text: &str) -> Result<(CircuitPlan, Diagnostics), Diagnostics> {
    let Parsed { ast, mut warnings } = parse(text)?;
    match validate(&ast) {
        Ok(plan) => Ok((plan, warnings)),
        Err(errors) => {
            warnings.extend(errors);
            Err(warnings)
        }
    }
}
