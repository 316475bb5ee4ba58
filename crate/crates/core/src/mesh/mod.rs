//! Planar triangulations with oriented edges, boundary facets and optional
//! periodic identification.
//!
//! Cells are stored counterclockwise. Local edge `i` of a cell is the edge
//! opposite local vertex `i`, traversed from local vertex `i+1` to `i+2`.
//! Every global edge carries one orientation (lower vertex index to higher
//! vertex index; edges that wrap onto a single vertex are oriented along the
//! positive lattice direction) and each cell records whether its
//! counterclockwise traversal agrees with it.

mod generators;
mod io;
mod validate;

use std::collections::BTreeMap;

pub use generators::{build_disk, build_periodic_rectangle, disk_polygon_area};
pub use io::{read_swemesh, write_swemesh};
pub use validate::{validate, MeshDefect, MeshReport};

pub type Point = [f64; 2];

/// A global edge. `tangent` points from `vertices[0]` to `vertices[1]` in
/// unwrapped coordinates; its length is the edge length.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub tangent: Point,
}

impl Edge {
    pub fn length(&self) -> f64 {
        self.tangent[0].hypot(self.tangent[1])
    }

    /// Unit normal obtained by rotating the tangent clockwise. It is the
    /// outward normal of every cell whose traversal agrees with the edge.
    pub fn unit_normal(&self) -> Point {
        let l = self.length();
        [self.tangent[1] / l, -self.tangent[0] / l]
    }
}

/// A boundary edge together with its single incident cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub edge: usize,
    pub cell: usize,
    pub local_edge: usize,
    /// Unit outward normal.
    pub normal: Point,
}

/// Structured-lattice identification used by the rectangle generator.
///
/// Lattice vertices are `(i, j)` with `0 <= i <= nx`, `0 <= j <= ny`. When a
/// direction is periodic, lattice vertex `i = 0` and `i = nx` are the same
/// mesh vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Periodicity {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl Periodicity {
    /// The partner of a lattice vertex on a periodic side, or the vertex
    /// itself when it has no partner.
    pub fn partner(&self, (i, j): (usize, usize)) -> (usize, usize) {
        let i = match (self.periodic_x, i) {
            (true, 0) => self.nx,
            (true, i) if i == self.nx => 0,
            _ => i,
        };
        let j = match (self.periodic_y, j) {
            (true, 0) => self.ny,
            (true, j) if j == self.ny => 0,
            _ => j,
        };
        (i, j)
    }

    /// Mesh vertex index of a lattice vertex.
    pub fn vertex_index(&self, (i, j): (usize, usize)) -> usize {
        let (ci, row) = if self.periodic_x {
            (i % self.nx, self.nx)
        } else {
            (i, self.nx + 1)
        };
        let cj = if self.periodic_y { j % self.ny } else { j };
        cj * row + ci
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.lx / self.nx as f64, self.ly / self.ny as f64)
    }

    pub fn fully_periodic(&self) -> bool {
        self.periodic_x && self.periodic_y
    }

    pub fn any_periodic(&self) -> bool {
        self.periodic_x || self.periodic_y
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    cell_coords: Vec<[Point; 3]>,
    edges: Vec<Edge>,
    cell_edges: Vec<[usize; 3]>,
    cell_edge_signs: Vec<[i8; 3]>,
    edge_cells: Vec<Vec<(usize, usize)>>,
    boundary: Vec<BoundaryFacet>,
    edge_boundary: Vec<Option<usize>>,
    vertex_on_boundary: Vec<bool>,
    periodicity: Option<Periodicity>,
}

impl Mesh {
    /// Builds a non-periodic mesh from vertex coordinates and cells. Edges are
    /// identified by their vertex pair. No validation is performed here; use
    /// [`validate`] to check the mesh invariants.
    pub fn from_cells(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> crate::Result<Self> {
        for (c, cell) in cells.iter().enumerate() {
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(crate::Error::InvalidArgument(format!(
                    "cell {c} references vertex {v} but only {} vertices exist",
                    vertices.len()
                )));
            }
            if cell[0] == cell[1] || cell[1] == cell[2] || cell[0] == cell[2] {
                return Err(crate::Error::InvalidArgument(format!("cell {c} repeats a vertex")));
            }
        }
        let coords = cells
            .iter()
            .map(|c| [vertices[c[0]], vertices[c[1]], vertices[c[2]]])
            .collect();
        let key_cells = cells.clone();
        Ok(Self::assemble(vertices, cells, coords, None, |c, i| {
            let a = key_cells[c][(i + 1) % 3];
            let b = key_cells[c][(i + 2) % 3];
            (a.min(b), a.max(b), 0i64, 0i64)
        }))
    }

    /// Shared topology construction. `edge_key(cell, local_edge)` must return
    /// the same key for both sides of an edge and distinct keys otherwise.
    pub(crate) fn assemble<K: Ord>(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        cell_coords: Vec<[Point; 3]>,
        periodicity: Option<Periodicity>,
        mut edge_key: impl FnMut(usize, usize) -> K,
    ) -> Self {
        let mut index: BTreeMap<K, usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_cells: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());

        for (c, cell) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            let mut cs = [0i8; 3];
            for i in 0..3 {
                let a = cell[(i + 1) % 3];
                let b = cell[(i + 2) % 3];
                let pa = cell_coords[c][(i + 1) % 3];
                let pb = cell_coords[c][(i + 2) % 3];
                let t = [pb[0] - pa[0], pb[1] - pa[1]];
                let e = *index.entry(edge_key(c, i)).or_insert_with(|| {
                    let forward = if a != b { a < b } else { lattice_positive(t) };
                    let edge = if forward {
                        Edge {
                            vertices: [a, b],
                            tangent: t,
                        }
                    } else {
                        Edge {
                            vertices: [b, a],
                            tangent: [-t[0], -t[1]],
                        }
                    };
                    edges.push(edge);
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                let g = edges[e].tangent;
                cs[i] = if t[0] * g[0] + t[1] * g[1] > 0.0 { 1 } else { -1 };
                ce[i] = e;
                edge_cells[e].push((c, i));
            }
            cell_edges.push(ce);
            cell_edge_signs.push(cs);
        }

        let mut boundary = Vec::new();
        let mut edge_boundary = vec![None; edges.len()];
        let mut vertex_on_boundary = vec![false; vertices.len()];
        for (e, inc) in edge_cells.iter().enumerate() {
            if let [(c, i)] = inc.as_slice() {
                let pa = cell_coords[*c][(i + 1) % 3];
                let pb = cell_coords[*c][(i + 2) % 3];
                let t = [pb[0] - pa[0], pb[1] - pa[1]];
                let l = t[0].hypot(t[1]);
                edge_boundary[e] = Some(boundary.len());
                boundary.push(BoundaryFacet {
                    edge: e,
                    cell: *c,
                    local_edge: *i,
                    normal: [t[1] / l, -t[0] / l],
                });
                for v in edges[e].vertices {
                    vertex_on_boundary[v] = true;
                }
            }
        }

        Mesh {
            vertices,
            cells,
            cell_coords,
            edges,
            cell_edges,
            cell_edge_signs,
            edge_cells,
            boundary,
            edge_boundary,
            vertex_on_boundary,
            periodicity,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Corner coordinates of a cell in unwrapped (non-periodic) coordinates.
    pub fn cell_coords(&self, cell: usize) -> &[Point; 3] {
        &self.cell_coords[cell]
    }

    pub fn cell_edges(&self, cell: usize) -> &[usize; 3] {
        &self.cell_edges[cell]
    }

    /// +1 where the cell's counterclockwise traversal agrees with the global
    /// edge orientation, -1 otherwise.
    pub fn cell_edge_signs(&self, cell: usize) -> &[i8; 3] {
        &self.cell_edge_signs[cell]
    }

    /// Incident `(cell, local_edge)` pairs of an edge.
    pub fn edge_cells(&self, edge: usize) -> &[(usize, usize)] {
        &self.edge_cells[edge]
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.edge_boundary[edge].is_some()
    }

    pub fn boundary_facet_of(&self, edge: usize) -> Option<&BoundaryFacet> {
        self.edge_boundary[edge].map(|b| &self.boundary[b])
    }

    pub fn is_boundary_vertex(&self, vertex: usize) -> bool {
        self.vertex_on_boundary[vertex]
    }

    pub fn has_boundary(&self) -> bool {
        !self.boundary.is_empty()
    }

    pub fn periodicity(&self) -> Option<&Periodicity> {
        self.periodicity.as_ref()
    }

    /// Affine map data of a cell: columns of the Jacobian are `p1 - p0` and
    /// `p2 - p0`.
    pub fn jacobian(&self, cell: usize) -> [[f64; 2]; 2] {
        let [p0, p1, p2] = self.cell_coords[cell];
        [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]]
    }

    pub fn jacobian_det(&self, cell: usize) -> f64 {
        let j = self.jacobian(cell);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        0.5 * self.jacobian_det(cell)
    }

    /// Sum of signed cell areas.
    pub fn area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        let [a, b, c] = self.cell_coords[cell];
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Maps reference coordinates of the unit triangle to physical space.
    pub fn map_point(&self, cell: usize, xi: Point) -> Point {
        let [p0, p1, p2] = self.cell_coords[cell];
        [
            p0[0] + (p1[0] - p0[0]) * xi[0] + (p2[0] - p0[0]) * xi[1],
            p0[1] + (p1[1] - p0[1]) * xi[0] + (p2[1] - p0[1]) * xi[1],
        ]
    }

    /// Longest edge length.
    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().map(Edge::length).fold(0.0, f64::max)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_cells() as i64
    }

    /// Number of closed loops formed by the boundary edges.
    pub fn boundary_loops(&self) -> usize {
        // union-find over vertices joined by boundary edges
        let mut parent: Vec<usize> = (0..self.num_vertices()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for f in &self.boundary {
            let [a, b] = self.edges[f.edge].vertices;
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let mut roots: Vec<usize> = (0..self.num_vertices())
            .filter(|&v| self.vertex_on_boundary[v])
            .map(|v| find(&mut parent, v))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Euler characteristic implied by the topology: `2 - 2g - b` with genus
    /// one for a doubly periodic mesh and `b` boundary loops.
    pub fn expected_euler_characteristic(&self) -> i64 {
        let genus = match self.periodicity {
            Some(p) if p.fully_periodic() => 1,
            _ => 0,
        };
        2 - 2 * genus - self.boundary_loops() as i64
    }
}

fn lattice_positive(t: Point) -> bool {
    let scale = t[0].abs().max(t[1].abs());
    if t[0].abs() > 1e-12 * scale {
        t[0] > 0.0
    } else {
        t[1] > 0.0
    }
}
