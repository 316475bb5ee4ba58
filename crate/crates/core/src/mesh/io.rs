//! ASCII mesh exchange format:
//!
//! ```text
//! swemesh 1
//! V <n>
//! x y            (n lines)
//! C <m>
//! i j k          (m lines, counterclockwise)
//! B <b>
//! a b            (b boundary-edge vertex pairs)
//! ```
//!
//! Coordinates are written with 17 significant digits so that a write/read
//! cycle reproduces them exactly.

use std::io::{BufRead, Write};

use super::Mesh;
use crate::{Error, Result};

pub fn write_swemesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    if mesh.periodicity().is_some_and(|p| p.any_periodic()) {
        return Err(Error::Unsupported(
            "periodic meshes cannot be written in swemesh format".into(),
        ));
    }
    writeln!(out, "swemesh 1")?;
    writeln!(out, "V {}", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", p[0], p[1])?;
    }
    writeln!(out, "C {}", mesh.num_cells())?;
    for c in mesh.cells() {
        writeln!(out, "{} {} {}", c[0], c[1], c[2])?;
    }
    writeln!(out, "B {}", mesh.boundary_facets().len())?;
    for f in mesh.boundary_facets() {
        let [a, b] = mesh.edges()[f.edge].vertices;
        writeln!(out, "{a} {b}")?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_tokens(&mut self) -> Result<Vec<String>> {
        loop {
            self.line += 1;
            match self.inner.next() {
                None => return Err(self.err("unexpected end of file")),
                Some(l) => {
                    let l = l?;
                    let toks: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
                    if !toks.is_empty() {
                        return Ok(toks);
                    }
                }
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::MeshFormat {
            line: self.line,
            message: message.into(),
        }
    }

    fn section(&mut self, tag: &str) -> Result<usize> {
        let t = self.next_tokens()?;
        if t.len() != 2 || t[0] != tag {
            return Err(self.err(format!("expected `{tag} <count>`")));
        }
        t[1].parse().map_err(|_| self.err(format!("bad count `{}`", t[1])))
    }

    fn numbers<T: std::str::FromStr, const N: usize>(&mut self) -> Result<[T; N]> {
        let t = self.next_tokens()?;
        if t.len() != N {
            return Err(self.err(format!("expected {N} values, found {}", t.len())));
        }
        let mut parsed = Vec::with_capacity(N);
        for s in &t {
            parsed.push(s.parse::<T>().map_err(|_| self.err(format!("cannot parse `{s}`")))?);
        }
        parsed.try_into().map_err(|_| self.err("internal parse error"))
    }
}

/// Reads a mesh and checks the listed boundary edges against the topology.
pub fn read_swemesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    let header = lines.next_tokens()?;
    if header != ["swemesh", "1"] {
        return Err(lines.err("missing `swemesh 1` header"));
    }
    let nv = lines.section("V")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push(lines.numbers::<f64, 2>()?);
    }
    let nc = lines.section("C")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        cells.push(lines.numbers::<usize, 3>()?);
    }
    let nb = lines.section("B")?;
    let mut listed = Vec::with_capacity(nb);
    for _ in 0..nb {
        let [a, b] = lines.numbers::<usize, 2>()?;
        listed.push((a.min(b), a.max(b)));
    }
    let mesh = Mesh::from_cells(vertices, cells)?;
    let mut actual: Vec<(usize, usize)> = mesh
        .boundary_facets()
        .iter()
        .map(|f| {
            let [a, b] = mesh.edges()[f.edge].vertices;
            (a.min(b), a.max(b))
        })
        .collect();
    actual.sort_unstable();
    listed.sort_unstable();
    if actual != listed {
        return Err(Error::MeshFormat {
            line: lines.line,
            message: format!(
                "boundary edge list ({} edges) does not match the cell topology ({} edges)",
                listed.len(),
                actual.len()
            ),
        });
    }
    Ok(mesh)
}
