use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::funcspace::MuFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceNorm {
    L2,
    Max,
}

/// Norm of the difference of the two traces on junction `j`. The L² norm
/// integrates the piecewise linear difference exactly along Σ; on a point
/// junction both norms reduce to the absolute jump.
pub fn trace_gap(u: &MuFunction, j: usize, norm: TraceNorm) -> Result<f64, VerifyError> {
    let st = &u.space.structure;
    let junction = &st.junctions[j];
    if !junction.coupled {
        return Err(VerifyError::UncoupledJunction(j));
    }
    let first = u.trace_on(j, st.components[junction.first].id).expect("side belongs to junction");
    let second = u.trace_on(j, st.components[junction.second].id).expect("side belongs to junction");
    let d: Vec<f64> = first.values.iter().zip(&second.values).map(|(a, b)| a - b).collect();
    if d.len() == 1 || norm == TraceNorm::Max {
        return Ok(d.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let mut sq = 0.0;
    for k in 0..d.len() - 1 {
        let len = first.params[k + 1] - first.params[k];
        sq += len / 3.0 * (d[k] * d[k] + d[k] * d[k + 1] + d[k + 1] * d[k + 1]);
    }
    Ok(sq.sqrt())
}
