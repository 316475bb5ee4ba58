use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::swe::{ShallowWater, State};
use crate::timestepping::RunSeries;
use crate::Result;

/// Reference-cell vertices, in the order of each cell's vertex list.
const CORNERS: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

pub const CSV_HEADER: &str = "step,time,energy,enstrophy,total_pv,mass,rel_energy_err,rel_enstrophy_err,newton_iters";

fn rel_err(v: f64, v0: f64) -> f64 {
    if v0 == 0.0 {
        (v - v0).abs()
    } else {
        (v - v0).abs() / v0.abs()
    }
}

/// The CSV time series as a string. Errors are relative to the first record.
pub fn csv_string(series: &RunSeries) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    let c0 = series.initial();
    for r in &series.records {
        let c = &r.conserved;
        writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.step,
            r.time,
            c.energy,
            c.enstrophy,
            c.total_pv,
            c.mass,
            rel_err(c.energy, c0.energy),
            rel_err(c.enstrophy, c0.enstrophy),
            r.newton_iters
        )
        .expect("writing to a String");
    }
    s
}

pub fn write_csv(series: &RunSeries, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, csv_string(series))?;
    Ok(())
}

/// Legacy ASCII VTK unstructured grid with `q` and `u` at vertices and the
/// cell mean of `D`. Vertex velocities average the cell-wise values.
pub fn vtk_string(model: &ShallowWater, state: &State) -> Result<String> {
    let mesh = model.mesh();
    let q = model.diagnostics(state)?.q;
    let (nv, nc) = (mesh.num_vertices(), mesh.num_cells());
    let mut qv = vec![0.0; nv];
    let mut uv = vec![[0.0; 2]; nv];
    let mut count = vec![0usize; nv];
    for c in 0..nc {
        let qc = q.evaluate(c, &CORNERS)?;
        let uc = state.u.evaluate(c, &CORNERS)?;
        for (j, &v) in mesh.cells()[c].iter().enumerate() {
            qv[v] += qc[j][0];
            uv[v][0] += uc[j][0];
            uv[v][1] += uc[j][1];
            count[v] += 1;
        }
    }
    let dq = state.d.qp_scalar();
    let nq = model.v2().num_qp();

    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "shallow water state t={:.16e}", state.t).unwrap();
    writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {nv} double").unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]).unwrap();
    }
    writeln!(s, "CELLS {nc} {}", 4 * nc).unwrap();
    for c in mesh.cells() {
        writeln!(s, "3 {} {} {}", c[0], c[1], c[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nc}").unwrap();
    for _ in 0..nc {
        writeln!(s, "5").unwrap();
    }
    writeln!(s, "POINT_DATA {nv}\nSCALARS q double 1\nLOOKUP_TABLE default").unwrap();
    for v in 0..nv {
        writeln!(s, "{:.16e}", qv[v] / count[v].max(1) as f64).unwrap();
    }
    writeln!(s, "VECTORS u double").unwrap();
    for v in 0..nv {
        let n = count[v].max(1) as f64;
        writeln!(s, "{:.16e} {:.16e} 0", uv[v][0] / n, uv[v][1] / n).unwrap();
    }
    writeln!(s, "CELL_DATA {nc}\nSCALARS D double 1\nLOOKUP_TABLE default").unwrap();
    for c in 0..nc {
        let (mut m, mut a) = (0.0, 0.0);
        for p in 0..nq {
            let w = model.v2().jxw(c, p);
            m += w * dq[c * nq + p];
            a += w;
        }
        writeln!(s, "{:.16e}", m / a).unwrap();
    }
    Ok(s)
}

pub fn write_vtk(model: &ShallowWater, state: &State, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(vtk_string(model, state)?.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// Polar angle of the depth maximum along the boundary.
///
/// `D` is sampled at the midpoint of every boundary facet; the angle of the
/// largest sample is refined by a parabola through it and its two angular
/// neighbours. Returns `None` on meshes without boundary.
pub fn boundary_crest_angle(model: &ShallowWater, state: &State) -> Result<Option<f64>> {
    let mesh = model.mesh();
    let facets = mesh.boundary_facets();
    if facets.is_empty() {
        return Ok(None);
    }
    let mut samples = Vec::with_capacity(facets.len());
    for f in facets {
        let l = f.local_edge;
        let (a, b) = (CORNERS[(l + 1) % 3], CORNERS[(l + 2) % 3]);
        let xi = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let x = mesh.map_point(f.cell, xi);
        let d = state.d.evaluate(f.cell, &[xi])?[0][0];
        samples.push((x[1].atan2(x[0]), d));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = samples.len();
    let i = (0..n)
        .max_by(|&a, &b| samples[a].1.total_cmp(&samples[b].1))
        .expect("non-empty");
    if n < 3 {
        return Ok(Some(samples[i].0));
    }
    let (lo, hi) = (samples[(i + n - 1) % n], samples[(i + 1) % n]);
    let curv = lo.1 - 2.0 * samples[i].1 + hi.1;
    let mut theta = samples[i].0;
    if curv < 0.0 {
        let mut span = hi.0 - lo.0;
        if span <= 0.0 {
            span += 2.0 * std::f64::consts::PI;
        }
        theta += 0.5 * (lo.1 - hi.1) / curv * 0.5 * span;
    }
    Ok(Some(theta))
}

/// Least-squares slope of unwrapped angles against time.
pub fn angular_speed(times: &[f64], angles: &[f64]) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut unwrapped = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (k, &a) in angles.iter().enumerate() {
        if k > 0 {
            let prev: f64 = angles[k - 1];
            let jump = a - prev;
            if jump > std::f64::consts::PI {
                offset -= two_pi;
            } else if jump < -std::f64::consts::PI {
                offset += two_pi;
            }
        }
        unwrapped.push(a + offset);
    }
    let n = times.len() as f64;
    let (mt, ma) = (times.iter().sum::<f64>() / n, unwrapped.iter().sum::<f64>() / n);
    let num: f64 = times.iter().zip(&unwrapped).map(|(t, a)| (t - mt) * (a - ma)).sum();
    let den: f64 = times.iter().map(|t| (t - mt) * (t - mt)).sum();
    num / den
}
