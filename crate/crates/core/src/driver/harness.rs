use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::{Config, MeshKind, ScenarioKind};
use super::output::{angular_speed, boundary_crest_angle, write_csv, write_vtk};
use super::scenario::{build_mesh, setup, Setup};
use crate::mesh::validate;
use crate::swe::{Scheme, ShallowWater, State};
use crate::timestepping::{run, Integrator, RunSeries};
use crate::{Error, Result};

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Check {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

pub fn format_checks(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
    }
    s
}

/// Caps rayon's global pool at `SWE_THREADS` (default 1). Returns the
/// number of threads in effect.
pub fn init_threads() -> usize {
    let n = std::env::var("SWE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1);
    // the pool can only be configured once per process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    rayon::current_num_threads()
}

pub struct RunOutcome {
    pub setup: Setup,
    pub series: RunSeries,
    /// `(time, angle)` of the boundary depth crest after every step, on
    /// meshes with boundary.
    pub crest: Vec<(f64, f64)>,
    pub checks: Vec<Check>,
}

impl RunOutcome {
    pub fn final_state(&self) -> &State {
        &self.series.final_state
    }

    /// Fitted angular speed of the boundary crest.
    pub fn crest_speed(&self) -> Option<f64> {
        (self.crest.len() >= 2).then(|| {
            let (t, a): (Vec<f64>, Vec<f64>) = self.crest.iter().cloned().unzip();
            angular_speed(&t, &a)
        })
    }
}

/// Runs a configuration to `t_end`, writing the configured outputs.
pub fn run_config(cfg: &Config) -> Result<RunOutcome> {
    run_config_steps(cfg, cfg.n_steps())
}

/// As [`run_config`] with an explicit step count.
pub fn run_config_steps(cfg: &Config, n_steps: usize) -> Result<RunOutcome> {
    let s = setup(cfg)?;
    let model = &s.model;
    let mut crest = Vec::new();
    if let Some(a) = boundary_crest_angle(model, &s.state)? {
        crest.push((s.state.t, a));
    }
    let vtk_path = |n: usize| -> PathBuf { cfg.output.vtk_dir.join(format!("step_{n:06}.vtk")) };
    if cfg.output.vtk_every > 0 {
        write_vtk(model, &s.state, &vtk_path(0))?;
    }
    let series = run(model, &s.state, &cfg.step_config(), n_steps, |n, state, res| {
        log::debug!(
            "step {n}: t = {:.6}, {} iterations, residual {:.3e}",
            state.t,
            res.iterations,
            res.final_residual()
        );
        if let Some(a) = boundary_crest_angle(model, state)? {
            crest.push((state.t, a));
        }
        if cfg.output.vtk_every > 0 && n % cfg.output.vtk_every == 0 {
            write_vtk(model, state, &vtk_path(n))?;
        }
        Ok(())
    })?;
    if let Some(p) = &cfg.output.csv_path {
        write_csv(&series, p)?;
    }
    let checks = run_checks(cfg, &series);
    Ok(RunOutcome {
        setup: s,
        series,
        crest,
        checks,
    })
}

/// Mass and total PV to round-off for every run; energy drift for the
/// Newton-solved integrator.
fn run_checks(cfg: &Config, series: &RunSeries) -> Vec<Check> {
    let c0 = series.initial();
    let worst = |f: &dyn Fn(&crate::swe::ConservedSet) -> f64| {
        series
            .records
            .iter()
            .map(|r| (f(&r.conserved) - f(c0)).abs())
            .fold(0.0, f64::max)
    };
    let dm = worst(&|c| c.mass);
    let dq = worst(&|c| c.total_pv);
    let mut checks = vec![
        Check::new(
            "mass",
            dm <= 1e-12 * (1.0 + c0.mass.abs()),
            format!("max |M - M0| = {dm:.3e}"),
        ),
        Check::new(
            "total_pv",
            dq <= 1e-10 * (1.0 + c0.total_pv.abs()),
            format!("max |Q - Q0| = {dq:.3e}"),
        ),
    ];
    if cfg.integrator == Integrator::Poisson {
        let de = series.max_rel_energy_error();
        checks.push(Check::new("energy", de <= 1e-9, format!("max relative drift {de:.3e}")));
    }
    checks
}

/// Dry-run checks: mesh validity, admissible initial data, consistency of
/// `q` with `u` at interior nodes, and the semi-discrete conservation laws.
pub fn validate_config(cfg: &Config) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let report = validate(&build_mesh(cfg)?);
    let defects: Vec<String> = report.defects.iter().map(|d| d.to_string()).collect();
    checks.push(Check::new(
        "mesh",
        report.passed(),
        if defects.is_empty() {
            format!(
                "{} cells, Euler characteristic {}",
                report.cells, report.euler_characteristic
            )
        } else {
            defects.join("; ")
        },
    ));
    let s = match setup(cfg) {
        Ok(s) => s,
        Err(e) => {
            checks.push(Check::new("setup", false, e.to_string()));
            return Ok(checks);
        }
    };
    checks.push(Check::new(
        "setup",
        true,
        format!("scheme {:?}, degree {}", s.model.scheme(), s.model.degree()),
    ));
    checks.extend(state_checks(&s.model, &s.state)?);
    if s.scenario.is_steady() {
        let t = s.model.tendencies(&s.state)?;
        let nu = t.u_t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let nd = t.d_t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        checks.push(Check::new(
            "steady_tendencies",
            nu.is_finite() && nd.is_finite(),
            format!("max |u_t| = {nu:.3e}, max |D_t| = {nd:.3e}"),
        ));
    }
    Ok(checks)
}

/// Consistency and conservation checks of a single state.
pub fn state_checks(model: &ShallowWater, state: &State) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let v0 = model.v0();
    let res = model.vorticity_residual(state.u.coeffs(), state.z.coeffs());
    let mz = model.mass0().matvec(state.z.coeffs());
    let scale = 1.0 + mz.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let interior = (0..v0.dim())
        .filter(|&i| !v0.is_boundary_dof(i))
        .map(|i| res[i].abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "q_u_consistency",
        interior <= 1e-8 * scale,
        format!("interior residual {interior:.3e}"),
    ));

    let t = model.tendencies(state)?;
    let (h, _) = model.energy_rate(state, &t);
    let hs = model.conserved(state)?.energy.abs().max(1.0);
    checks.push(Check::new(
        "energy_rate",
        h.abs() <= 1e-10 * hs,
        format!("dH/dt = {h:.3e} (scale {hs:.3e})"),
    ));
    if model.scheme() != Scheme::Naive {
        let (z, zs) = model.enstrophy_rate(&t);
        checks.push(Check::new(
            "enstrophy_rate",
            z.abs() <= 1e-10 * zs.max(1e-300),
            format!("dZ/dt = {z:.3e} (scale {zs:.3e})"),
        ));
    }
    let (q, m) = model.pv_and_mass_rates(&t);
    let qs = 1.0 + model.mass0().matvec(&t.z_t).iter().map(|v| v.abs()).sum::<f64>();
    let ms = 1.0 + model.mass2().matvec(&t.d_t).iter().map(|v| v.abs()).sum::<f64>();
    checks.push(Check::new("pv_rate", q.abs() <= 1e-10 * qs, format!("dQ/dt = {q:.3e}")));
    checks.push(Check::new(
        "mass_rate",
        m.abs() <= 1e-12 * ms,
        format!("dM/dt = {m:.3e}"),
    ));
    Ok(checks)
}

/// Human-readable mesh and space summary.
pub fn mesh_info(cfg: &Config) -> Result<String> {
    let s = setup(cfg)?;
    let m = s.mesh();
    let r = validate(m);
    let mut out = String::new();
    writeln!(out, "vertices: {}", m.num_vertices()).unwrap();
    writeln!(out, "edges: {}", m.num_edges()).unwrap();
    writeln!(out, "cells: {}", m.num_cells()).unwrap();
    writeln!(out, "boundary edges: {}", m.boundary_facets().len()).unwrap();
    writeln!(
        out,
        "euler characteristic: {} (expected {})",
        r.euler_characteristic, r.expected_euler_characteristic
    )
    .unwrap();
    writeln!(out, "area: {:.12}", m.area()).unwrap();
    writeln!(out, "max edge length: {:.6}", m.max_edge_length()).unwrap();
    writeln!(out, "degree: {}", s.model.degree()).unwrap();
    writeln!(out, "scheme: {:?}", s.model.scheme()).unwrap();
    writeln!(
        out,
        "dimensions: V0 {}, V1 {}, V2 {}, step unknowns {}",
        s.model.v0().dim(),
        s.model.v1().dim(),
        s.model.v2().dim(),
        2 * s.model.v1().dim() + s.model.v2().dim() + s.model.v0().dim()
    )
    .unwrap();
    writeln!(out, "mesh valid: {}", r.passed()).unwrap();
    for d in &r.defects {
        writeln!(out, "  defect: {d}").unwrap();
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub u_error: f64,
    pub d_error: f64,
    /// Observed orders against the previous row.
    pub u_rate: Option<f64>,
    pub d_rate: Option<f64>,
    /// L2 norms of the semi-discrete tendencies of the initial state.
    pub u_tendency: f64,
    pub d_tendency: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn format(&self) -> String {
        let mut s = String::from("level        h      u_err  u_rate      D_err  D_rate     |u_t|     |D_t|\n");
        let rate = |r: Option<f64>| r.map_or("     -".to_string(), |r| format!("{r:6.3}"));
        for r in &self.rows {
            writeln!(
                s,
                "{:5} {:8.5} {:10.3e} {} {:10.3e} {} {:9.3e} {:9.3e}",
                r.level,
                r.h,
                r.u_error,
                rate(r.u_rate),
                r.d_error,
                rate(r.d_rate),
                r.u_tendency,
                r.d_tendency
            )
            .unwrap();
        }
        s
    }

    /// Rates at or above `k − 0.3` for velocity and `k − 1.3` for depth,
    /// and tendencies that shrink under refinement.
    pub fn checks(&self, degree: usize) -> Vec<Check> {
        let k = degree as f64;
        let last = self.rows.last();
        let ur = last.and_then(|r| r.u_rate);
        let dr = last.and_then(|r| r.d_rate);
        let shrinking = self
            .rows
            .windows(2)
            .all(|w| w[1].u_tendency < w[0].u_tendency && w[1].d_tendency <= w[0].d_tendency);
        let show = |r: Option<f64>, min: f64| match r {
            Some(r) => format!("{r:.3} (need >= {min:.1})"),
            None => "needs at least two levels".to_string(),
        };
        vec![
            Check::new("velocity_rate", ur.is_some_and(|r| r >= k - 0.3), show(ur, k - 0.3)),
            Check::new("depth_rate", dr.is_some_and(|r| r >= k - 1.3), show(dr, k - 1.3)),
            Check::new(
                "tendencies_decrease",
                shrinking,
                "|u_t| and |D_t| over levels".to_string(),
            ),
        ]
    }
}

/// Runs a steady scenario at several resolutions to `t_end` and measures
/// L2 errors against the exact solution. `levels` are cells per side on
/// rectangles and refinement levels on the disk.
pub fn convergence_study(cfg: &Config, levels: &[usize]) -> Result<ConvergenceTable> {
    let sc = super::scenario::Scenario::from_config(cfg);
    if !sc.is_steady() {
        return Err(Error::Scenario(format!(
            "scenario {} has no steady reference solution",
            cfg.scenario.name()
        )));
    }
    let on_disk = matches!(cfg.scenario, ScenarioKind::KelvinDisk | ScenarioKind::DiskSolidRotation)
        || cfg.mesh.kind == Some(MeshKind::Disk);
    let results: Vec<Result<ConvergenceRow>> = levels
        .par_iter()
        .map(|&level| {
            let mut c = cfg.clone();
            c.output.csv_path = None;
            c.output.vtk_every = 0;
            if on_disk {
                c.refinement = level;
            } else {
                c.mesh.cells = Some(level);
            }
            let s = setup(&c)?;
            let t = s.model.tendencies(&s.state)?;
            let norm = |m: &crate::assembly::SparseOp, x: &[f64]| {
                m.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum::<f64>().sqrt()
            };
            let u_tendency = norm(s.model.mass1(), &t.u_t);
            let d_tendency = norm(s.model.mass2(), &t.d_t);
            let series = run(&s.model, &s.state, &c.step_config(), c.n_steps(), |_, _, _| Ok(()))?;
            let f = &series.final_state;
            Ok(ConvergenceRow {
                level,
                h: s.mesh().max_edge_length(),
                u_error: f.u.l2_error(|x| sc.velocity(x)),
                d_error: f.d.l2_error(|x| [sc.depth(x), 0.0]),
                u_rate: None,
                d_rate: None,
                u_tendency,
                d_tendency,
            })
        })
        .collect();
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        let lh = (a.h / b.h).ln();
        let (ur, dr) = ((a.u_error / b.u_error).ln() / lh, (a.d_error / b.d_error).ln() / lh);
        rows[i].u_rate = Some(ur);
        rows[i].d_rate = Some(dr);
    }
    Ok(ConvergenceTable { rows })
}
