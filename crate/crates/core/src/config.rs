//! JSON run configuration.
//!
//! ```json
//! {
//!   "structure": "structures/two_discs.json",
//!   "coefficients": { "b11": "1", "b22": "1", "b33": "1" },
//!   "manufactured_expr": { "1": "cos(pi*x)*cos(pi*y)", "2": "cos(pi*z)*cos(pi*y)" },
//!   "mesh": { "h": 0.1, "h_sweep": [0.2, 0.1, 0.05] },
//!   "solver": { "tol": 1e-10, "compat_tol": 1e-6 },
//!   "verify": { "dq_steps": [0.2, 0.1, 0.05, 0.025], "dq_margin": 0.25 },
//!   "seed": 7
//! }
//! ```
//!
//! `structure` is either an inline structure description or a path
//! relative to the configuration file. Exactly one of `rhs_expr` and
//! `manufactured_expr` is required; each is a single expression or a map
//! from component id to expression. Missing coefficients default to the
//! identity matrix.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprlang::{self, Expr};
use crate::geometry::{Structure, StructureSpec};
use crate::relaxation::MatrixField;
use crate::solver::SolveOptions;
use crate::verify::TraceNorm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StructureSource {
    Path(String),
    Inline(StructureSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSpec {
    Single(String),
    PerComponent(BTreeMap<String, String>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h: Option<f64>,
    pub h_sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub maxiter: Option<usize>,
    pub compat_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverConfig { tol: d.tol, maxiter: d.maxiter, compat_tol: d.compat_tol }
    }
}

/// Parameters of the `verify` checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub trace_norm: TraceNorm,
    pub penalties: Vec<f64>,
    /// Load for the penalty sweep; defaults to the run's load.
    pub penalty_rhs: Option<ExprSpec>,
    pub dq_axis: [f64; 3],
    pub dq_steps: Vec<f64>,
    /// Defaults to the largest step.
    pub dq_margin: Option<f64>,
    pub h2_levels: Vec<f64>,
    /// Defaults to four times the coarsest level.
    pub h2_margin: Option<f64>,
    /// Defaults to the coarsest level.
    pub h2_step: Option<f64>,
    pub continuity_levels: Vec<f64>,
    pub poincare_samples: usize,
    pub relax_cases: usize,
    pub second_order_fields: Vec<String>,
    pub second_order_random: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trace_norm: TraceNorm::L2,
            penalties: vec![1e3, 1e4, 1e5],
            penalty_rhs: None,
            dq_axis: [1.0, 0.0, 0.0],
            dq_steps: vec![0.2, 0.1, 0.05, 0.025],
            dq_margin: None,
            h2_levels: vec![0.1, 0.05, 0.025],
            h2_margin: None,
            h2_step: None,
            continuity_levels: vec![0.2, 0.1, 0.05, 0.025],
            poincare_samples: 50,
            relax_cases: 100,
            second_order_fields: Vec::new(),
            second_order_random: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub structure: StructureSource,
    #[serde(default)]
    pub coefficients: BTreeMap<String, String>,
    #[serde(default)]
    pub rhs_expr: Option<ExprSpec>,
    #[serde(default)]
    pub manufactured_expr: Option<ExprSpec>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
}

/// A configuration together with the directory relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)?;
        let config = Self::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base })
    }

    /// Checks the invariants that do not need the structure.
    pub fn check(&self) -> Result<()> {
        match (&self.rhs_expr, &self.manufactured_expr) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either rhs_expr or manufactured_expr, not both".into()))
            }
            (None, None) => return Err(Error::Config("one of rhs_expr or manufactured_expr is required".into())),
            _ => {}
        }
        if let Some(h) = self.mesh.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("mesh.h must be positive, got {h}")));
            }
        }
        if let Some(sweep) = &self.mesh.h_sweep {
            if sweep.iter().any(|h| !(*h > 0.0 && h.is_finite())) || sweep.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("mesh.h_sweep must be positive and strictly decreasing".into()));
            }
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::Config("solver.tol must be positive".into()));
        }
        Ok(())
    }

    pub fn coefficient_field(&self) -> Result<MatrixField> {
        if self.coefficients.is_empty() {
            return Ok(MatrixField::identity());
        }
        Ok(MatrixField::from_entries(self.coefficients.iter().map(|(k, v)| (k.as_str(), v.as_str())))?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.solver.tol, maxiter: self.solver.maxiter, compat_tol: self.solver.compat_tol }
    }
}

impl LoadedConfig {
    /// Structure description with `mesh.h` applied when given.
    pub fn structure_spec(&self) -> Result<StructureSpec> {
        let mut spec = match &self.config.structure {
            StructureSource::Inline(spec) => spec.clone(),
            StructureSource::Path(p) => {
                let text = std::fs::read_to_string(self.base.join(p))?;
                StructureSpec::from_json(&text)?
            }
        };
        if let Some(h) = self.config.mesh.h {
            spec.mesh.h = h;
        }
        Ok(spec)
    }

    pub fn build_structure(&self, h: Option<f64>) -> Result<Structure> {
        let mut spec = self.structure_spec()?;
        if let Some(h) = h {
            spec.mesh.h = h;
        }
        Ok(Structure::build(&spec)?)
    }

    /// Mesh size of single runs.
    pub fn h(&self) -> Result<f64> {
        Ok(self.structure_spec()?.mesh.h)
    }
}

/// One expression per component of `st`, in component order.
pub fn per_component(spec: &ExprSpec, st: &Structure) -> Result<Vec<Expr>> {
    match spec {
        ExprSpec::Single(text) => {
            let e = exprlang::parse(text)?;
            Ok(vec![e; st.components.len()])
        }
        ExprSpec::PerComponent(map) => {
            for key in map.keys() {
                let known = key.parse::<u32>().ok().and_then(|id| st.component_index(id)).is_some();
                if !known {
                    return Err(Error::Config(format!("expression given for unknown component {key:?}")));
                }
            }
            st.components
                .iter()
                .map(|c| {
                    let text = map
                        .get(&c.id.to_string())
                        .ok_or_else(|| Error::Config(format!("no expression for component {}", c.id)))?;
                    Ok(exprlang::parse(text)?)
                })
                .collect()
        }
    }
}
