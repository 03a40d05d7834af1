//! `mustructure validate|solve|converge|verify`.

mod checks;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{per_component, LoadedConfig, RunConfig};
use crate::error::{Error, Result};
use crate::exprlang::Expr;
use crate::funcspace::MuFunction;
use crate::geometry::{JunctionGeom, Structure};
use crate::manufactured::{self, ErrorNorms};
use crate::relaxation;
use crate::solver::{self, KernelGroups, Load, SolveReport};
use crate::verify::{RegularityReport, VerifyError};
use crate::FunctionSpace;

pub use checks::run_check;

#[derive(Debug, Parser)]
#[command(name = "mustructure", version, about = "Neumann problems on glued segments and plates in R^3")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structure, coefficients and exact solution.
    Validate(RunArgs),
    /// Solve once at the configured mesh size.
    Solve(RunArgs),
    /// Manufactured-solution errors and observed orders over `mesh.h_sweep`.
    Converge(RunArgs),
    /// Run regularity checks.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "all")]
        check: CheckName,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `output` from the config, then `.`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckName {
    Trace,
    H2,
    Dq,
    Poincare,
    Relax,
    SecondOrder,
    Continuity,
    All,
}

impl CheckName {
    pub const EACH: [CheckName; 7] = [
        CheckName::Trace,
        CheckName::Dq,
        CheckName::H2,
        CheckName::Continuity,
        CheckName::Poincare,
        CheckName::Relax,
        CheckName::SecondOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckName::Trace => "trace",
            CheckName::H2 => "h2",
            CheckName::Dq => "dq",
            CheckName::Poincare => "poincare",
            CheckName::Relax => "relax",
            CheckName::SecondOrder => "second-order",
            CheckName::Continuity => "continuity",
            CheckName::All => "all",
        }
    }
}

/// A loaded configuration with resolved seed and output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: LoadedConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Run {
    pub fn load(args: &RunArgs) -> Result<Self> {
        let cfg = RunConfig::load(&args.config)?;
        cfg.config.check()?;
        let seed = args.seed.unwrap_or(cfg.config.seed);
        let out = match (&args.out, &cfg.config.output) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => cfg.base.join(o),
            (None, None) => PathBuf::from("."),
        };
        Ok(Run { cfg, seed, out })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        std::fs::write(self.out.join(name), contents)?;
        Ok(())
    }
}

/// A solve at one mesh size, with the load actually used.
#[derive(Debug, Clone)]
pub struct Solved {
    pub structure: Arc<Structure>,
    pub solution: MuFunction,
    pub report: SolveReport,
    pub load: Load,
    pub exact: Option<Vec<Expr>>,
    pub errors: Option<ErrorNorms>,
}

/// Builds the structure at `h` (the configured size when `None`) and solves.
pub fn solve_at(cfg: &LoadedConfig, h: Option<f64>) -> Result<Solved> {
    let structure = Arc::new(cfg.build_structure(h)?);
    let field = cfg.config.coefficient_field()?;
    let opts = cfg.config.solve_options();
    if let Some(spec) = &cfg.config.manufactured_expr {
        let exact = per_component(spec, &structure)?;
        let run = manufactured::solve_manufactured(&structure, &field, &exact, &opts)?;
        return Ok(Solved {
            structure,
            solution: run.solution,
            report: run.report,
            load: run.data.load,
            exact: Some(exact),
            errors: Some(run.errors),
        });
    }
    let spec = cfg.config.rhs_expr.as_ref().ok_or_else(|| Error::Config("no right-hand side".into()))?;
    let load = Load::per_component(per_component(spec, &structure)?);
    let (solution, report) = solver::solve(&structure, &field, &load, &opts)?;
    Ok(Solved { structure, solution, report, load, exact: None, errors: None })
}

#[derive(Debug, Serialize)]
struct ComponentSummary {
    id: u32,
    dim: usize,
    measure: f64,
    n_nodes: usize,
    n_elements: usize,
    min_density: f64,
}

#[derive(Debug, Serialize)]
struct JunctionSummary {
    ids: (u32, u32),
    kind: &'static str,
    coupled: bool,
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    status: &'static str,
    h: f64,
    components: Vec<ComponentSummary>,
    junctions: Vec<JunctionSummary>,
    kernel_groups: Vec<Vec<u32>>,
    n_dofs: usize,
    lambda: f64,
    tangential_min: f64,
    manufactured: bool,
}

pub fn cmd_validate(run: &Run) -> Result<()> {
    let cfg = &run.cfg;
    let st = Arc::new(cfg.build_structure(None)?);
    let field = cfg.config.coefficient_field()?;
    let relaxed = relaxation::relax(&field, &st)?;
    let manufactured = match (&cfg.config.manufactured_expr, &cfg.config.rhs_expr) {
        (Some(spec), _) => {
            manufactured::manufacture(&st, &field, &per_component(spec, &st)?)?;
            true
        }
        (None, Some(spec)) => {
            per_component(spec, &st)?;
            false
        }
        (None, None) => false,
    };
    let space = FunctionSpace::new(st.clone());
    let groups = KernelGroups::new(&space);
    let report = ValidationReport {
        status: "ok",
        h: st.h,
        components: st
            .components
            .iter()
            .zip(&st.meshes)
            .map(|(c, m)| ComponentSummary {
                id: c.id,
                dim: c.dim,
                measure: c.measure(),
                n_nodes: m.n_nodes(),
                n_elements: m.n_elements(),
                min_density: c.min_density,
            })
            .collect(),
        junctions: st
            .junctions
            .iter()
            .map(|j| JunctionSummary {
                ids: j.ids,
                kind: match j.geom {
                    JunctionGeom::Point(_) => "point",
                    JunctionGeom::Segment(..) => "segment",
                },
                coupled: j.coupled,
            })
            .collect(),
        kernel_groups: groups.ids.clone(),
        n_dofs: space.n_dofs(),
        lambda: relaxed.lambda,
        tangential_min: relaxed.tangential_min,
        manufactured,
    };
    run.write("report.json", &to_json(&report))?;
    println!(
        "valid: {} components, {} junctions, {} kernel groups",
        st.components.len(),
        st.junctions.len(),
        groups.len()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveOutput {
    h: f64,
    #[serde(flatten)]
    report: SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h1_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<bool>,
}

pub fn cmd_solve(run: &Run) -> Result<()> {
    let s = solve_at(&run.cfg, None)?;
    let out = SolveOutput {
        h: s.structure.h,
        report: s.report.clone(),
        l2_error: s.errors.map(|e| e.l2),
        h1_error: s.errors.map(|e| e.h1),
        exact: s.errors.map(|e| e.exact),
    };
    run.write("solution.csv", &s.solution.to_csv())?;
    run.write("report.json", &to_json(&out))?;
    print!("solved: {} dofs, {} iterations", s.report.n_dofs, s.report.iterations);
    match s.errors {
        Some(e) => println!(", l2 error {:e}, h1 error {:e}", e.l2, e.h1),
        None => println!(),
    }
    Ok(())
}

/// One level of a convergence sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub h: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    /// log(e_prev/e)/log(h_prev/h); `None` on the first level and when
    /// both levels are exact.
    pub l2_order: Option<f64>,
    pub h1_order: Option<f64>,
    pub exact: bool,
    pub iterations: usize,
    pub n_dofs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesReport {
    pub levels: Vec<RateRow>,
}

impl RatesReport {
    /// Columns h, l2_error, h1_error, l2_order, h1_order; orders read
    /// `exact` when both levels are exact and are empty on the first level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,l2_error,h1_error,l2_order,h1_order\n");
        for (k, r) in self.levels.iter().enumerate() {
            let order = |o: Option<f64>| match o {
                _ if k > 0 && r.exact && self.levels[k - 1].exact => "exact".to_string(),
                Some(v) => format!("{v:?}"),
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{},{}",
                r.h,
                r.l2_error,
                r.h1_error,
                order(r.l2_order),
                order(r.h1_order)
            );
        }
        out
    }
}

pub fn convergence_sweep(cfg: &LoadedConfig) -> Result<RatesReport> {
    if cfg.config.manufactured_expr.is_none() {
        return Err(Error::Config("converge needs manufactured_expr".into()));
    }
    let sweep = cfg.config.mesh.h_sweep.clone().unwrap_or_default();
    if sweep.len() < 3 {
        return Err(Error::Config("converge needs at least three values in mesh.h_sweep".into()));
    }
    let mut levels: Vec<RateRow> = Vec::with_capacity(sweep.len());
    for &h in &sweep {
        let s = solve_at(cfg, Some(h))?;
        let e = s.errors.expect("manufactured run has errors");
        let order = |prev: f64, cur: f64, prev_h: f64| {
            let p = (prev / cur).ln() / (prev_h / h).ln();
            p.is_finite().then_some(p)
        };
        let (l2_order, h1_order) = match levels.last() {
            Some(p) if !(p.exact && e.exact) => (order(p.l2_error, e.l2, p.h), order(p.h1_error, e.h1, p.h)),
            _ => (None, None),
        };
        levels.push(RateRow {
            h,
            l2_error: e.l2,
            h1_error: e.h1,
            l2_order,
            h1_order,
            exact: e.exact,
            iterations: s.report.iterations,
            n_dofs: s.report.n_dofs,
        });
    }
    Ok(RatesReport { levels })
}

pub fn cmd_converge(run: &Run) -> Result<()> {
    let rates = convergence_sweep(&run.cfg)?;
    run.write("rates.csv", &rates.to_csv())?;
    run.write("report.json", &to_json(&rates))?;
    print!("{}", rates.to_csv());
    Ok(())
}

/// Runs the selected checks; the report is complete even when checks fail.
pub fn verify_report(run: &Run, which: CheckName) -> Result<RegularityReport> {
    let mut report = RegularityReport::new(run.seed);
    let selected: Vec<CheckName> = if which == CheckName::All { CheckName::EACH.to_vec() } else { vec![which] };
    for check in selected {
        report.push(run_check(run, check)?);
    }
    Ok(report)
}

pub fn cmd_verify(run: &Run, which: CheckName) -> Result<()> {
    let report = verify_report(run, which)?;
    run.write("verify.csv", &report.to_csv())?;
    run.write("report.json", &report.to_json())?;
    for c in &report.checks {
        println!("{}: {}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    if !report.all_pass() {
        return Err(VerifyError::Failed(report.failing()).into());
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate(args) => cmd_validate(&Run::load(args)?),
        Command::Solve(args) => cmd_solve(&Run::load(args)?),
        Command::Converge(args) => cmd_converge(&Run::load(args)?),
        Command::Verify { run: args, check } => cmd_verify(&Run::load(args)?, *check),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}
