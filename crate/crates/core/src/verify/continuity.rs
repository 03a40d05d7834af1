use serde::Serialize;

use crate::funcspace::MuFunction;
use crate::geometry::JunctionGeom;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JunctionJump {
    pub ids: (u32, u32),
    pub coupled: bool,
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentModulus {
    pub id: u32,
    pub h_max: f64,
    /// max |u(p) − u(q)| over mesh edges pq.
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub junctions: Vec<JunctionJump>,
    /// Largest jump over coupled junctions.
    pub max_coupled_jump: f64,
    pub components: Vec<ComponentModulus>,
}

/// Junction jumps (nodal on coupled junctions, pointwise otherwise) and
/// the per-component neighbour-pair modulus.
pub fn continuity_modulus(u: &MuFunction) -> ContinuityReport {
    let st = &u.space.structure;
    let mut junctions = Vec::with_capacity(st.junctions.len());
    for (k, j) in st.junctions.iter().enumerate() {
        let jump = if j.coupled {
            st.junction_nodes[k]
                .pairs
                .iter()
                .map(|&(a, b)| (u.node_value(j.first, a) - u.node_value(j.second, b)).abs())
                .fold(0.0, f64::max)
        } else {
            let p = match j.geom {
                JunctionGeom::Point(p) => p,
                JunctionGeom::Segment(a, _) => a,
            };
            match (u.eval_on(j.first, p), u.eval_on(j.second, p)) {
                (Some(a), Some(b)) => (a - b).abs(),
                _ => f64::NAN,
            }
        };
        junctions.push(JunctionJump { ids: j.ids, coupled: j.coupled, jump });
    }
    let max_coupled_jump = junctions.iter().filter(|j| j.coupled).map(|j| j.jump).fold(0.0, f64::max);
    let components = st
        .components
        .iter()
        .enumerate()
        .map(|(c, comp)| {
            let mesh = &st.meshes[c];
            let vals = u.component_values(c);
            let modulus = mesh.edges().iter().map(|&[a, b]| (vals[a] - vals[b]).abs()).fold(0.0, f64::max);
            ComponentModulus { id: comp.id, h_max: mesh.h_max(), modulus }
        })
        .collect();
    ContinuityReport { junctions, max_coupled_jump, components }
}
