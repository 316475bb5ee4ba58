use std::collections::BTreeMap;

use super::{Mesh, Periodicity, Point};
use crate::{Error, Result};

/// Structured rectangle `[0, lx] x [0, ly]` with each of the `nx * ny` quads
/// split along its main diagonal. Non-periodic sides become boundary edges.
pub fn build_periodic_rectangle(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    periodic_x: bool,
    periodic_y: bool,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!(
            "cell counts must be positive, got {nx} x {ny}"
        )));
    }
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "side lengths must be positive, got {lx} x {ly}"
        )));
    }
    let per = Periodicity {
        nx,
        ny,
        lx,
        ly,
        periodic_x,
        periodic_y,
    };
    let (dx, dy) = per.spacing();
    let nvx = if periodic_x { nx } else { nx + 1 };
    let nvy = if periodic_y { ny } else { ny + 1 };

    let mut vertices = vec![[0.0; 2]; nvx * nvy];
    for j in 0..nvy {
        for i in 0..nvx {
            vertices[per.vertex_index((i, j))] = [i as f64 * dx, j as f64 * dy];
        }
    }

    let mut cells = Vec::with_capacity(2 * nx * ny);
    let mut lattice: Vec<[(usize, usize); 3]> = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let lower = [(i, j), (i + 1, j), (i + 1, j + 1)];
            let upper = [(i, j), (i + 1, j + 1), (i, j + 1)];
            for tri in [lower, upper] {
                cells.push(tri.map(|p| per.vertex_index(p)));
                lattice.push(tri);
            }
        }
    }
    let coords: Vec<[Point; 3]> = lattice
        .iter()
        .map(|tri| tri.map(|(i, j)| [i as f64 * dx, j as f64 * dy]))
        .collect();

    // An edge is identified by its lattice start (wrapped) and its direction.
    let key = |c: usize, k: usize| {
        let a = lattice[c][(k + 1) % 3];
        let b = lattice[c][(k + 2) % 3];
        let (mut s, mut d) = (
            (a.0 as i64, a.1 as i64),
            (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64),
        );
        if d.0 < 0 || (d.0 == 0 && d.1 < 0) {
            s = (b.0 as i64, b.1 as i64);
            d = (-d.0, -d.1);
        }
        if periodic_x {
            s.0 = s.0.rem_euclid(nx as i64);
        }
        if periodic_y {
            s.1 = s.1.rem_euclid(ny as i64);
        }
        (s.0, s.1, d.0, d.1)
    };
    Ok(Mesh::assemble(vertices, cells, coords, Some(per), key))
}

/// Triangulation of the regular `6 * 2^level`-gon inscribed in the unit
/// circle: a six-triangle fan refined `level` times by edge bisection, with
/// new boundary vertices projected onto the circle.
pub fn build_disk(level: usize) -> Result<Mesh> {
    if level > 10 {
        return Err(Error::InvalidArgument(format!(
            "disk refinement level {level} is too large"
        )));
    }
    let mut vertices: Vec<Point> = vec![[0.0, 0.0]];
    for k in 0..6 {
        let theta = std::f64::consts::PI * k as f64 / 3.0;
        vertices.push([theta.cos(), theta.sin()]);
    }
    let mut cells: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();

    for _ in 0..level {
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for c in &cells {
            for i in 0..3 {
                let (a, b) = (c[i], c[(i + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut refined = Vec::with_capacity(4 * cells.len());
        for c in &cells {
            let mut m = [0usize; 3];
            for i in 0..3 {
                let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
                let key = (a.min(b), a.max(b));
                m[i] = *midpoint.entry(key).or_insert_with(|| {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    if count[&key] == 1 {
                        let r = p[0].hypot(p[1]);
                        p = [p[0] / r, p[1] / r];
                    }
                    vertices.push(p);
                    vertices.len() - 1
                });
            }
            // m[i] is the midpoint of the edge opposite vertex i
            refined.push([c[0], m[2], m[1]]);
            refined.push([m[2], c[1], m[0]]);
            refined.push([m[1], m[0], c[2]]);
            refined.push([m[0], m[1], m[2]]);
        }
        cells = refined;
    }
    Mesh::from_cells(vertices, cells)
}

/// Area of the regular polygon with `6 * 2^level` vertices on the unit circle.
pub fn disk_polygon_area(level: usize) -> f64 {
    let m = (6usize << level) as f64;
    0.5 * m * (2.0 * std::f64::consts::PI / m).sin()
}
