use std::fmt;

use super::Mesh;

/// A violated mesh invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshDefect {
    NonPositiveJacobian { cell: usize, det: f64 },
    EdgeValence { edge: usize, cells: usize },
    EdgeSignsNotOpposite { edge: usize },
    NormalNotUnit { edge: usize, length: f64 },
    EulerCharacteristic { found: i64, expected: i64 },
}

impl fmt::Display for MeshDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshDefect::NonPositiveJacobian { cell, det } => {
                write!(f, "cell {cell} has Jacobian determinant {det:e}")
            }
            MeshDefect::EdgeValence { edge, cells } => write!(f, "edge {edge} is shared by {cells} cells"),
            MeshDefect::EdgeSignsNotOpposite { edge } => {
                write!(f, "interior edge {edge} has equal orientation signs in both cells")
            }
            MeshDefect::NormalNotUnit { edge, length } => {
                write!(f, "boundary normal of edge {edge} has length {length}")
            }
            MeshDefect::EulerCharacteristic { found, expected } => {
                write!(f, "Euler characteristic {found}, expected {expected}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeshReport {
    pub vertices: usize,
    pub edges: usize,
    pub cells: usize,
    pub boundary_edges: usize,
    pub euler_characteristic: i64,
    pub expected_euler_characteristic: i64,
    pub defects: Vec<MeshDefect>,
}

impl MeshReport {
    pub fn passed(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn flipped_cells(&self) -> Vec<usize> {
        self.defects
            .iter()
            .filter_map(|d| match d {
                MeshDefect::NonPositiveJacobian { cell, .. } => Some(*cell),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for MeshReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "V={} E={} F={} boundary edges={} chi={} (expected {})",
            self.vertices,
            self.edges,
            self.cells,
            self.boundary_edges,
            self.euler_characteristic,
            self.expected_euler_characteristic
        )?;
        if self.passed() {
            write!(f, "mesh: PASS")
        } else {
            write!(f, "mesh: FAIL ({} defects)", self.defects.len())?;
            for d in &self.defects {
                write!(f, "\n  {d}")?;
            }
            Ok(())
        }
    }
}

/// Checks every mesh invariant and lists the offending entities.
pub fn validate(mesh: &Mesh) -> MeshReport {
    let mut defects = Vec::new();
    for c in 0..mesh.num_cells() {
        let det = mesh.jacobian_det(c);
        if !(det > 0.0) {
            defects.push(MeshDefect::NonPositiveJacobian { cell: c, det });
        }
    }
    for e in 0..mesh.num_edges() {
        let inc = mesh.edge_cells(e);
        match inc.len() {
            1 => {}
            2 => {
                let (c0, i0) = inc[0];
                let (c1, i1) = inc[1];
                if mesh.cell_edge_signs(c0)[i0] == mesh.cell_edge_signs(c1)[i1] {
                    defects.push(MeshDefect::EdgeSignsNotOpposite { edge: e });
                }
            }
            n => defects.push(MeshDefect::EdgeValence { edge: e, cells: n }),
        }
    }
    for facet in mesh.boundary_facets() {
        let length = facet.normal[0].hypot(facet.normal[1]);
        if (length - 1.0).abs() > 1e-14 {
            defects.push(MeshDefect::NormalNotUnit {
                edge: facet.edge,
                length,
            });
        }
    }
    let chi = mesh.euler_characteristic();
    let expected = mesh.expected_euler_characteristic();
    if chi != expected {
        defects.push(MeshDefect::EulerCharacteristic { found: chi, expected });
    }
    MeshReport {
        vertices: mesh.num_vertices(),
        edges: mesh.num_edges(),
        cells: mesh.num_cells(),
        boundary_edges: mesh.boundary_facets().len(),
        euler_characteristic: chi,
        expected_euler_characteristic: expected,
        defects,
    }
}
