//! Numerical checks of the regularity results: trace matching, generalized
//! translations and difference quotients, interior second differences,
//! continuity moduli and the second-order operator identity.

mod continuity;
mod h2;
mod second_order;
mod trace;
mod translate;

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::ExprError;

pub use continuity::{continuity_modulus, ComponentModulus, ContinuityReport, JunctionJump};
pub use h2::{h2_indicator, h2_oracle, H2Indicator};
pub use second_order::{second_order_residual, SecondOrderReport, MAX_DEPTH, MAX_NODES};
pub use trace::{trace_gap, TraceNorm};
pub use translate::{
    difference_quotient, dq_oracle, dq_uniform_bound_scan, generalized_translate, DqRow, DqScan, Translated,
    TranslationSpec, DQ_RATIO_BOUND,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("junction {0} is not coupled")]
    UncoupledJunction(usize),
    #[error("step {h} exceeds the margin {margin}")]
    MarginViolation { h: f64, margin: f64 },
    #[error("unsupported geometry for generalized translation: {0}")]
    UnsupportedGeometry(String),
    #[error("difference quotient with zero step")]
    ZeroStep,
    #[error("window of component {component} shrunk by {margin} contains no probe points")]
    EmptyWindow { component: u32, margin: f64 },
    #[error("no component with id {0}")]
    UnknownComponent(u32),
    #[error("symbolic expression too large (depth {depth}, {nodes} nodes)")]
    SymbolicDepthExceeded { depth: usize, nodes: usize },
    #[error("expression evaluation: {0}")]
    Expr(#[from] ExprError),
    #[error("failing checks: {}", .0.join(", "))]
    Failed(Vec<String>),
}

/// One line of a verification table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub h: f64,
    pub norm: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Outcome of a named check, with its table rows and headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub rows: Vec<CheckRow>,
    pub details: serde_json::Value,
}

/// Collected regularity diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegularityReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl RegularityReport {
    pub fn new(seed: u64) -> Self {
        RegularityReport { seed, checks: Vec::new() }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Table with columns check, h, norm, ratio, pass.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,h,norm,ratio,pass\n");
        for c in &self.checks {
            for r in &c.rows {
                let _ = writeln!(out, "{},{:?},{:?},{:?},{}", r.check, r.h, r.norm, r.ratio, r.pass);
            }
        }
        out
    }
}
