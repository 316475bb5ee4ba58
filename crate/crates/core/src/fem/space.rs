//! Global function spaces over a mesh.
//!
//! Each space stores, for every cell and quadrature point of its rule, the
//! physical basis values and first derivatives with edge signs already
//! applied. Scalar spaces store gradients; BDM stores divergences.

use std::sync::Arc;

use super::quadrature::QuadratureRule;
use super::reference::{build_reference, Entity, Family, ReferenceElement};
use crate::mesh::Mesh;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    element: Arc<ReferenceElement>,
    restricted: bool,
    ldofs: usize,
    full_dim: usize,
    /// Full global index per (cell, local dof).
    cell_full: Vec<usize>,
    /// Orientation sign per (cell, local dof).
    cell_signs: Vec<f64>,
    /// Reduced index per (cell, local dof); `None` for eliminated DOFs.
    cell_dofs: Vec<Option<usize>>,
    reduced: Vec<Option<usize>>,
    full_of: Vec<usize>,
    boundary_dof: Vec<bool>,
    nq: usize,
    jxw: Vec<f64>,
    qpoints: Vec<[f64; 2]>,
    values: Vec<[f64; 2]>,
    derivs: Vec<[f64; 2]>,
}

/// Builds `family` of `degree` on `mesh` using `rule` for every integral.
///
/// With `restricted`, DOFs tied to boundary entities are removed: boundary
/// Lagrange nodes for scalar spaces, boundary-edge normal moments for BDM.
/// Restriction is meaningless for discontinuous spaces and is rejected.
pub fn build_space(
    mesh: Arc<Mesh>,
    family: Family,
    degree: usize,
    restricted: bool,
    rule: &QuadratureRule,
) -> Result<FunctionSpace> {
    if restricted && family == Family::DiscontinuousLagrange {
        return Err(Error::InvalidArgument(
            "discontinuous spaces have no boundary restriction".into(),
        ));
    }
    let element = Arc::new(build_reference(family, degree, rule)?);
    FunctionSpace::new(mesh, element, restricted)
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, element: Arc<ReferenceElement>, restricted: bool) -> Result<Self> {
        let [per_vertex, per_edge, per_cell] = element.entity_dof_counts();
        let (nv, ne, nc) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_cells());
        let discontinuous = element.family() == Family::DiscontinuousLagrange;
        let ldofs = element.dof_count();
        let full_dim = if discontinuous {
            nc * ldofs
        } else {
            nv * per_vertex + ne * per_edge + nc * per_cell
        };
        let edge_base = nv * per_vertex;
        let cell_base = edge_base + ne * per_edge;

        let mut boundary_dof = vec![false; full_dim];
        if !discontinuous {
            for v in 0..nv {
                if mesh.is_boundary_vertex(v) {
                    for k in 0..per_vertex {
                        boundary_dof[v * per_vertex + k] = true;
                    }
                }
            }
            for f in mesh.boundary_facets() {
                for k in 0..per_edge {
                    boundary_dof[edge_base + f.edge * per_edge + k] = true;
                }
            }
        }

        let mut cell_full = Vec::with_capacity(nc * ldofs);
        let mut cell_signs = Vec::with_capacity(nc * ldofs);
        for c in 0..nc {
            let edges = mesh.cell_edges(c);
            let signs = mesh.cell_edge_signs(c);
            let verts = mesh.cells()[c];
            for (i, dof) in element.dofs().iter().enumerate() {
                if discontinuous {
                    cell_full.push(c * ldofs + i);
                    cell_signs.push(1.0);
                    continue;
                }
                let (g, s) = match dof.entity {
                    Entity::Vertex(v) => (verts[v] * per_vertex + dof.index, 1.0),
                    Entity::Edge(e) => {
                        let s = signs[e];
                        let base = edge_base + edges[e] * per_edge;
                        match element.family() {
                            // nodes are listed along the local traversal
                            Family::Lagrange if s < 0 => (base + per_edge - 1 - dof.index, 1.0),
                            Family::Lagrange => (base + dof.index, 1.0),
                            // moment j flips with both the normal and the
                            // parameter direction: sign s^(j+1)
                            _ => {
                                let sign = if s < 0 && dof.index % 2 == 0 { -1.0 } else { 1.0 };
                                (base + dof.index, sign)
                            }
                        }
                    }
                    Entity::Interior => (cell_base + c * per_cell + dof.index, 1.0),
                };
                cell_full.push(g);
                cell_signs.push(s);
            }
        }

        let mut reduced = vec![None; full_dim];
        let mut full_of = Vec::with_capacity(full_dim);
        for g in 0..full_dim {
            if !(restricted && boundary_dof[g]) {
                reduced[g] = Some(full_of.len());
                full_of.push(g);
            }
        }
        let cell_dofs = cell_full.iter().map(|&g| reduced[g]).collect();

        let rule = element.rule();
        let nq = rule.len();
        let tab = element.tabulation();
        let ref_points = rule.reference_points();
        let mut jxw = Vec::with_capacity(nc * nq);
        let mut qpoints = Vec::with_capacity(nc * nq);
        let mut values = Vec::with_capacity(nc * nq * ldofs);
        let mut derivs = Vec::with_capacity(nc * nq * ldofs);
        for c in 0..nc {
            let j = mesh.jacobian(c);
            let det = mesh.jacobian_det(c);
            // inverse transpose for gradients
            let jit = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
            for (p, w) in rule.weights().iter().enumerate() {
                jxw.push(w * det);
                qpoints.push(mesh.map_point(c, ref_points[p]));
                for i in 0..ldofs {
                    let s = cell_signs[c * ldofs + i];
                    let v = tab.value(p, i);
                    if element.is_vector() {
                        let pv = [
                            (j[0][0] * v[0] + j[0][1] * v[1]) / det,
                            (j[1][0] * v[0] + j[1][1] * v[1]) / det,
                        ];
                        values.push([s * pv[0], s * pv[1]]);
                        derivs.push([s * tab.div(p, i) / det, 0.0]);
                    } else {
                        let g = tab.grad(p, i);
                        values.push([s * v[0], 0.0]);
                        derivs.push([
                            s * (jit[0][0] * g[0] + jit[0][1] * g[1]),
                            s * (jit[1][0] * g[0] + jit[1][1] * g[1]),
                        ]);
                    }
                }
            }
        }

        Ok(FunctionSpace {
            mesh,
            element,
            restricted,
            ldofs,
            full_dim,
            cell_full,
            cell_signs,
            cell_dofs,
            reduced,
            full_of,
            boundary_dof,
            nq,
            jxw,
            qpoints,
            values,
            derivs,
        })
    }

    /// The same space with the boundary restriction switched to `restricted`.
    pub fn with_restriction(&self, restricted: bool) -> Result<FunctionSpace> {
        if restricted == self.restricted {
            return Ok(self.clone());
        }
        FunctionSpace::new(self.mesh.clone(), self.element.clone(), restricted)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn family(&self) -> Family {
        self.element.family()
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn is_restricted(&self) -> bool {
        self.restricted
    }

    pub fn is_vector(&self) -> bool {
        self.element.is_vector()
    }

    pub fn rule(&self) -> &QuadratureRule {
        self.element.rule()
    }

    /// Number of unknowns after restriction.
    pub fn dim(&self) -> usize {
        self.full_of.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn local_dim(&self) -> usize {
        self.ldofs
    }

    pub fn num_qp(&self) -> usize {
        self.nq
    }

    /// Reduced global index of each local DOF of `cell`.
    pub fn cell_dofs(&self, cell: usize) -> &[Option<usize>] {
        &self.cell_dofs[cell * self.ldofs..(cell + 1) * self.ldofs]
    }

    /// Unrestricted global index of each local DOF of `cell`.
    pub fn cell_full_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_full[cell * self.ldofs..(cell + 1) * self.ldofs]
    }

    pub fn cell_signs(&self, cell: usize) -> &[f64] {
        &self.cell_signs[cell * self.ldofs..(cell + 1) * self.ldofs]
    }

    /// Reduced index of an unrestricted DOF.
    pub fn reduced_index(&self, full: usize) -> Option<usize> {
        self.reduced[full]
    }

    pub fn full_index(&self, reduced: usize) -> usize {
        self.full_of[reduced]
    }

    pub fn is_boundary_dof(&self, full: usize) -> bool {
        self.boundary_dof[full]
    }

    /// Expands a reduced coefficient vector with zeros at eliminated DOFs.
    pub fn to_full(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.full_dim];
        for (r, &g) in self.full_of.iter().enumerate() {
            out[g] = coeffs[r];
        }
        out
    }

    /// Drops eliminated entries of an unrestricted coefficient vector.
    pub fn from_full(&self, full: &[f64]) -> Vec<f64> {
        self.full_of.iter().map(|&g| full[g]).collect()
    }

    /// Quadrature weight times Jacobian determinant at point `p` of `cell`.
    pub fn jxw(&self, cell: usize, p: usize) -> f64 {
        self.jxw[cell * self.nq + p]
    }

    pub fn jxw_all(&self) -> &[f64] {
        &self.jxw
    }

    /// Physical coordinates of quadrature point `p` of `cell`.
    pub fn qpoint(&self, cell: usize, p: usize) -> [f64; 2] {
        self.qpoints[cell * self.nq + p]
    }

    pub fn qpoints(&self) -> &[[f64; 2]] {
        &self.qpoints
    }

    /// Signed physical basis values at quadrature point `p` of `cell`.
    pub fn values(&self, cell: usize, p: usize) -> &[[f64; 2]] {
        let o = (cell * self.nq + p) * self.ldofs;
        &self.values[o..o + self.ldofs]
    }

    /// Gradients (scalar spaces) or `[div, 0]` (BDM) at point `p` of `cell`.
    pub fn derivs(&self, cell: usize, p: usize) -> &[[f64; 2]] {
        let o = (cell * self.nq + p) * self.ldofs;
        &self.derivs[o..o + self.ldofs]
    }

    /// Whether `self` and `other` can be paired in one integral.
    pub fn compatible_with(&self, other: &FunctionSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) && self.rule() == other.rule()
    }

    pub(crate) fn check_compatible(&self, other: &FunctionSpace, context: &str) -> Result<()> {
        if self.compatible_with(other) {
            Ok(())
        } else {
            Err(Error::MeshMismatch(context.to_string()))
        }
    }

    /// Physical basis values (signed) and derivatives at arbitrary reference
    /// points of `cell`.
    pub fn tabulate_cell(&self, cell: usize, points: &[[f64; 2]]) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let tab = self.element.tabulate(points);
        let j = self.mesh.jacobian(cell);
        let det = self.mesh.jacobian_det(cell);
        let jit = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        let signs = self.cell_signs(cell);
        let mut values = Vec::with_capacity(points.len() * self.ldofs);
        let mut derivs = Vec::with_capacity(points.len() * self.ldofs);
        for p in 0..points.len() {
            for (i, &s) in signs.iter().enumerate() {
                let v = tab.value(p, i);
                if self.is_vector() {
                    values.push([
                        s * (j[0][0] * v[0] + j[0][1] * v[1]) / det,
                        s * (j[1][0] * v[0] + j[1][1] * v[1]) / det,
                    ]);
                    derivs.push([s * tab.div(p, i) / det, 0.0]);
                } else {
                    let g = tab.grad(p, i);
                    values.push([s * v[0], 0.0]);
                    derivs.push([
                        s * (jit[0][0] * g[0] + jit[0][1] * g[1]),
                        s * (jit[1][0] * g[0] + jit[1][1] * g[1]),
                    ]);
                }
            }
        }
        (values, derivs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::{gauss_legendre, quadrature_rule};
    use crate::mesh::{build_disk, build_periodic_rectangle};

    fn rule() -> QuadratureRule {
        quadrature_rule(6).unwrap()
    }

    #[test]
    fn dimensions() {
        let torus = Arc::new(build_periodic_rectangle(1, 1, 1.0, 1.0, true, true).unwrap());
        let v1 = build_space(torus.clone(), Family::Bdm, 1, false, &rule()).unwrap();
        assert_eq!(v1.dim(), 6);
        let dg = build_space(torus.clone(), Family::DiscontinuousLagrange, 0, false, &rule()).unwrap();
        assert_eq!(dg.dim(), 2);
        let cg = build_space(torus, Family::Lagrange, 2, false, &rule()).unwrap();
        assert_eq!(cg.dim(), 1 + 3);

        let disk = Arc::new(build_disk(2).unwrap());
        let nb = disk.boundary_facets().len();
        let v1r = build_space(disk.clone(), Family::Bdm, 1, true, &rule()).unwrap();
        assert_eq!(v1r.dim(), 2 * disk.num_edges() - 2 * nb);
        let v0r = build_space(disk.clone(), Family::Lagrange, 2, true, &rule()).unwrap();
        // boundary loop has as many vertices as edges
        assert_eq!(v0r.dim(), disk.num_vertices() + disk.num_edges() - 2 * nb);
    }

    #[test]
    fn dg_restriction_rejected() {
        let m = Arc::new(build_disk(0).unwrap());
        assert!(build_space(m, Family::DiscontinuousLagrange, 0, true, &rule()).is_err());
    }

    fn edge_points(local: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
        let (s, w) = gauss_legendre(5);
        let a = super::super::reference::REFERENCE_VERTICES[(local + 1) % 3];
        let b = super::super::reference::REFERENCE_VERTICES[(local + 2) % 3];
        (
            s.iter()
                .map(|&s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
                .collect(),
            w,
        )
    }

    /// Normal component of basis combination `coeffs` along a cell edge, in
    /// the edge's global parametrization.
    fn normal_trace(space: &FunctionSpace, coeffs: &[f64], cell: usize, local: usize) -> Vec<f64> {
        let mesh = space.mesh();
        let (pts, _) = edge_points(local);
        let (vals, _) = space.tabulate_cell(cell, &pts);
        let e = mesh.cell_edges(cell)[local];
        let n = mesh.edges()[e].unit_normal();
        let mut out: Vec<f64> = (0..pts.len())
            .map(|p| {
                let mut u = [0.0; 2];
                for (i, d) in space.cell_dofs(cell).iter().enumerate() {
                    if let Some(d) = d {
                        let v = vals[p * space.local_dim() + i];
                        u[0] += coeffs[*d] * v[0];
                        u[1] += coeffs[*d] * v[1];
                    }
                }
                u[0] * n[0] + u[1] * n[1]
            })
            .collect();
        if mesh.cell_edge_signs(cell)[local] < 0 {
            out.reverse();
        }
        out
    }

    #[test]
    fn bdm_normal_continuity() {
        for mesh in [
            build_disk(1).unwrap(),
            build_periodic_rectangle(3, 2, 1.5, 1.0, true, true).unwrap(),
        ] {
            let mesh = Arc::new(mesh);
            for deg in 1..=2 {
                let v1 = build_space(mesh.clone(), Family::Bdm, deg, false, &rule()).unwrap();
                let coeffs: Vec<f64> = (0..v1.dim()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4).collect();
                for e in 0..mesh.num_edges() {
                    let inc = mesh.edge_cells(e);
                    if inc.len() != 2 {
                        continue;
                    }
                    let a = normal_trace(&v1, &coeffs, inc[0].0, inc[0].1);
                    let b = normal_trace(&v1, &coeffs, inc[1].0, inc[1].1);
                    for (x, y) in a.iter().zip(&b) {
                        assert!((x - y).abs() < 1e-12, "edge {e}: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn restricted_bdm_has_no_boundary_flux() {
        let mesh = Arc::new(build_disk(2).unwrap());
        let v1 = build_space(mesh.clone(), Family::Bdm, 1, true, &rule()).unwrap();
        let coeffs: Vec<f64> = (0..v1.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        for f in mesh.boundary_facets() {
            for un in normal_trace(&v1, &coeffs, f.cell, f.local_edge) {
                assert!(un.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn single_edge_dof_flux() {
        let mesh = Arc::new(build_disk(1).unwrap());
        let v1 = build_space(mesh.clone(), Family::Bdm, 1, false, &rule()).unwrap();
        let (_, w) = gauss_legendre(5);
        for e in [0, 3, 7] {
            let mut coeffs = vec![0.0; v1.dim()];
            // BDM1 numbers the moments of edge e as 2e and 2e + 1
            coeffs[v1.reduced_index(2 * e).unwrap()] = 1.0;
            let (c, l) = mesh.edge_cells(e)[0];
            let trace = normal_trace(&v1, &coeffs, c, l);
            let flux: f64 = trace.iter().zip(&w).map(|(u, w)| u * w).sum::<f64>() * mesh.edges()[e].length();
            assert!((flux - 1.0).abs() < 1e-12, "edge {e}: flux {flux}");
        }
    }

    #[test]
    fn lagrange_continuity_across_edges() {
        let mesh = Arc::new(build_periodic_rectangle(2, 3, 1.0, 1.0, true, true).unwrap());
        let v0 = build_space(mesh.clone(), Family::Lagrange, 3, false, &rule()).unwrap();
        let coeffs: Vec<f64> = (0..v0.dim()).map(|i| (i as f64 * 1.3).cos()).collect();
        for e in 0..mesh.num_edges() {
            let traces: Vec<Vec<f64>> = mesh
                .edge_cells(e)
                .iter()
                .map(|&(c, l)| {
                    let (pts, _) = edge_points(l);
                    let (vals, _) = v0.tabulate_cell(c, &pts);
                    let mut t: Vec<f64> = (0..pts.len())
                        .map(|p| {
                            v0.cell_dofs(c)
                                .iter()
                                .enumerate()
                                .map(|(i, d)| coeffs[d.unwrap()] * vals[p * v0.local_dim() + i][0])
                                .sum()
                        })
                        .collect();
                    if mesh.cell_edge_signs(c)[l] < 0 {
                        t.reverse();
                    }
                    t
                })
                .collect();
            for (x, y) in traces[0].iter().zip(&traces[1]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn restricted_lagrange_vanishes_on_boundary() {
        let mesh = Arc::new(build_disk(1).unwrap());
        let v0 = build_space(mesh.clone(), Family::Lagrange, 2, true, &rule()).unwrap();
        let coeffs = vec![1.0; v0.dim()];
        for f in mesh.boundary_facets() {
            let (pts, _) = edge_points(f.local_edge);
            let (vals, _) = v0.tabulate_cell(f.cell, &pts);
            for p in 0..pts.len() {
                let v: f64 = v0
                    .cell_dofs(f.cell)
                    .iter()
                    .enumerate()
                    .filter_map(|(i, d)| d.map(|d| coeffs[d] * vals[p * v0.local_dim() + i][0]))
                    .sum();
                assert!(v.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn full_and_reduced_maps_are_inverse() {
        let mesh = Arc::new(build_disk(1).unwrap());
        let v1 = build_space(mesh, Family::Bdm, 1, true, &rule()).unwrap();
        let x: Vec<f64> = (0..v1.dim()).map(|i| i as f64).collect();
        assert_eq!(v1.from_full(&v1.to_full(&x)), x);
        for r in 0..v1.dim() {
            assert_eq!(v1.reduced_index(v1.full_index(r)), Some(r));
        }
    }
}
