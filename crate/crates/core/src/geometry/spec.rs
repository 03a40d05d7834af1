//! JSON description of a structure.
//!
//! ```json
//! {
//!   "components": [
//!     { "id": 1, "dim": 2, "origin": [0, 0, 0],
//!       "tangents": [[1, 0, 0], [0, 1, 0]],
//!       "shape": { "rectangle": [[-1, -1], [1, 1]] },
//!       "density_expr": "1" }
//!   ],
//!   "mesh": { "h": 0.1 }
//! }
//! ```
//!
//! Shapes are given in the component's local coordinates: `interval`
//! `[a, b]` for segments; `polygon` (vertex list), `rectangle`
//! (`[[u0, v0], [u1, v1]]`) or `disc` (`{center, radius}`, replaced by a
//! regular polygon resolved at the mesh size) for plates. `boundary`
//! optionally lists the shape vertices declared to lie on the outer
//! boundary; it defaults to all of them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub components: Vec<ComponentSpec>,
    pub mesh: MeshSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: u32,
    pub dim: u8,
    pub origin: [f64; 3],
    pub tangents: Vec<[f64; 3]>,
    pub shape: ShapeSpec,
    #[serde(default = "default_density")]
    pub density_expr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Vec<usize>>,
}

fn default_density() -> String {
    "1".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Interval([f64; 2]),
    Polygon(Vec<[f64; 2]>),
    Rectangle([[f64; 2]; 2]),
    Disc { center: [f64; 2], radius: f64 },
}

impl StructureSpec {
    pub fn new(components: Vec<ComponentSpec>, h: f64) -> Self {
        StructureSpec { components, mesh: MeshSpec { h } }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.mesh.h = h;
        self
    }

    /// Plate `[-1,1]²` in the plane z = 0 crossed by `[-1,1]²` in the plane
    /// x = 0; the junction is the segment {(0, y, 0) : |y| ≤ 1}.
    pub fn crossed_plates(h: f64) -> Self {
        StructureSpec {
            components: vec![
                ComponentSpec::plate(
                    1,
                    [0.0; 3],
                    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                    ShapeSpec::Rectangle([[-1.0, -1.0], [1.0, 1.0]]),
                ),
                ComponentSpec::plate(
                    2,
                    [0.0; 3],
                    [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                    ShapeSpec::Rectangle([[-1.0, -1.0], [1.0, 1.0]]),
                ),
            ],
            mesh: MeshSpec { h },
        }
    }

    /// Unit discs in the planes z = 0 and x = 0.
    pub fn two_discs(h: f64) -> Self {
        let disc = ShapeSpec::Disc { center: [0.0, 0.0], radius: 1.0 };
        StructureSpec {
            components: vec![
                ComponentSpec::plate(1, [0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], disc.clone()),
                ComponentSpec::plate(2, [0.0; 3], [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], disc),
            ],
            mesh: MeshSpec { h },
        }
    }

    /// Segments along the x and z axes over `[-1, 1]`, crossing at the origin.
    pub fn crossed_segments(h: f64) -> Self {
        StructureSpec {
            components: vec![
                ComponentSpec::segment(1, [0.0; 3], [1.0, 0.0, 0.0], [-1.0, 1.0]),
                ComponentSpec::segment(2, [0.0; 3], [0.0, 0.0, 1.0], [-1.0, 1.0]),
            ],
            mesh: MeshSpec { h },
        }
    }

    /// Segment along the x axis through the plate `[-1,1]²` in the plane x = 0.
    pub fn segment_through_plate(h: f64) -> Self {
        StructureSpec {
            components: vec![
                ComponentSpec::segment(1, [0.0; 3], [1.0, 0.0, 0.0], [-1.0, 1.0]),
                ComponentSpec::plate(
                    2,
                    [0.0; 3],
                    [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                    ShapeSpec::Rectangle([[-1.0, -1.0], [1.0, 1.0]]),
                ),
            ],
            mesh: MeshSpec { h },
        }
    }

    /// Unit square `[0,1]²` in the plane z = 0.
    pub fn unit_plate(h: f64) -> Self {
        StructureSpec {
            components: vec![ComponentSpec::plate(
                1,
                [0.0; 3],
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                ShapeSpec::Rectangle([[0.0, 0.0], [1.0, 1.0]]),
            )],
            mesh: MeshSpec { h },
        }
    }

    /// Unit segment `[0,1]` on the x axis.
    pub fn unit_segment(h: f64) -> Self {
        StructureSpec {
            components: vec![ComponentSpec::segment(1, [0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0])],
            mesh: MeshSpec { h },
        }
    }
}

impl ComponentSpec {
    pub fn segment(id: u32, origin: [f64; 3], tangent: [f64; 3], interval: [f64; 2]) -> Self {
        ComponentSpec {
            id,
            dim: 1,
            origin,
            tangents: vec![tangent],
            shape: ShapeSpec::Interval(interval),
            density_expr: default_density(),
            boundary: None,
        }
    }

    pub fn plate(id: u32, origin: [f64; 3], tangents: [[f64; 3]; 2], shape: ShapeSpec) -> Self {
        ComponentSpec {
            id,
            dim: 2,
            origin,
            tangents: tangents.to_vec(),
            shape,
            density_expr: default_density(),
            boundary: None,
        }
    }

    pub fn with_density(mut self, expr: &str) -> Self {
        self.density_expr = expr.to_string();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"components": [], "mesh": {"h": 0.1, "hh": 2}}"#;
        assert!(StructureSpec::from_json(text).is_err());
        let text = r#"{"components": [{"id":1,"dim":1,"origin":[0,0,0],"tangents":[[1,0,0]],
            "shape":{"interval":[0,1]},"colour":"red"}], "mesh": {"h": 0.1}}"#;
        assert!(StructureSpec::from_json(text).is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = StructureSpec::two_discs(0.2);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(StructureSpec::from_json(&text).unwrap(), spec);
    }
}
