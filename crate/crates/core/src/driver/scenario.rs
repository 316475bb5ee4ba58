use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};

use super::config::{Config, MeshKind, ScenarioKind};
use crate::assembly::{assemble_vector, assemble_with, factorize, LinearForm, Scalar, Vector};
use crate::fem::{project, project_scalar, Field};
use crate::mesh::{build_disk, build_periodic_rectangle, read_swemesh, Mesh};
use crate::swe::{Coriolis, Physics, Scheme, ShallowWater, State};
use crate::{Error, Result};

/// Resolved scenario constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub g: f64,
    pub f0: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub mean_depth: f64,
    pub omega: f64,
    pub jet_speed: f64,
    pub vortex_width: f64,
    /// Channel or torus width in y.
    pub ly: f64,
}

impl Scenario {
    pub fn from_config(cfg: &Config) -> Scenario {
        use ScenarioKind::*;
        let (g, f0, amplitude, mean_depth) = match cfg.scenario {
            KelvinDisk => (1.0, 10.0, 0.01, 1.0),
            ChannelJet => (1.0, 1.0, 0.0, 2.0),
            DiskSolidRotation => (1.0, 1.0, 0.0, 1.0),
            TorusVortexPair => (1.0, 0.0, 20.0, 1.0),
            CustomExpression => (1.0, 0.0, 0.0, 1.0),
        };
        let p = &cfg.params;
        Scenario {
            kind: cfg.scenario,
            g: cfg.physics.g.unwrap_or(g),
            f0: cfg.physics.f0.unwrap_or(f0),
            beta: cfg.physics.beta.unwrap_or(0.0),
            amplitude: p.amplitude.unwrap_or(amplitude),
            mean_depth: p.mean_depth.unwrap_or(mean_depth),
            omega: p.omega.unwrap_or(0.5),
            jet_speed: p.jet_speed.unwrap_or(1.0),
            vortex_width: p.vortex_width.unwrap_or(0.08),
            ly: cfg.mesh.ly.unwrap_or(1.0),
        }
    }

    pub fn physics(&self) -> Physics {
        Physics {
            g: self.g,
            coriolis: Coriolis {
                f0: self.f0,
                beta: self.beta,
            },
        }
    }

    /// Whether the initial data is an exact steady solution.
    pub fn is_steady(&self) -> bool {
        matches!(self.kind, ScenarioKind::ChannelJet | ScenarioKind::DiskSolidRotation) && self.beta == 0.0
    }

    /// Closed-form initial velocity (not defined for the vortex pair or
    /// custom expressions).
    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        match self.kind {
            ScenarioKind::KelvinDisk => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let a = self.amplitude * ((r - 1.0) * self.f0).exp() * x[1];
                [-a * x[1] / r, a * x[0] / r]
            }
            ScenarioKind::ChannelJet => [self.jet_speed * (PI * x[1] / self.ly).sin(), 0.0],
            ScenarioKind::DiskSolidRotation => [-self.omega * x[1], self.omega * x[0]],
            _ => [0.0, 0.0],
        }
    }

    /// Closed-form initial depth.
    pub fn depth(&self, x: [f64; 2]) -> f64 {
        let h = self.mean_depth;
        match self.kind {
            ScenarioKind::KelvinDisk => {
                let r = x[0].hypot(x[1]);
                h + self.amplitude * ((r - 1.0) * self.f0).exp() * x[1]
            }
            ScenarioKind::ChannelJet => {
                // g D' = −f0 U
                let k = PI / self.ly;
                h - self.f0 * self.jet_speed / (self.g * k) * (1.0 - (k * x[1]).cos())
            }
            ScenarioKind::DiskSolidRotation => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                h + (self.omega * self.omega + self.omega * self.f0) * r2 / (2.0 * self.g)
            }
            _ => h,
        }
    }
}

/// Mesh, model and initial state of a configured run.
pub struct Setup {
    pub scenario: Scenario,
    pub model: ShallowWater,
    pub state: State,
}

impl Setup {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.model.mesh()
    }
}

/// Builds the mesh a configuration asks for.
pub fn build_mesh(cfg: &Config) -> Result<Mesh> {
    use ScenarioKind::*;
    let natural = match cfg.scenario {
        KelvinDisk | DiskSolidRotation => MeshKind::Disk,
        ChannelJet => MeshKind::Channel,
        TorusVortexPair => MeshKind::Torus,
        CustomExpression => MeshKind::Disk,
    };
    let kind = cfg.mesh.kind.unwrap_or(natural);
    if cfg.scenario != CustomExpression && kind != natural && kind != MeshKind::File {
        return Err(Error::Scenario(format!(
            "scenario {} needs a {natural:?} mesh, got {kind:?}",
            cfg.scenario.name()
        )));
    }
    let n = cfg.mesh.cells.unwrap_or(1usize << cfg.refinement.min(12));
    let (lx, ly) = (cfg.mesh.lx.unwrap_or(1.0), cfg.mesh.ly.unwrap_or(1.0));
    match kind {
        MeshKind::Disk => build_disk(cfg.refinement),
        MeshKind::Torus => build_periodic_rectangle(n, n, lx, ly, true, true),
        MeshKind::Channel => build_periodic_rectangle(n, n, lx, ly, true, false),
        MeshKind::File => {
            let path = cfg
                .mesh
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("mesh.path is missing".into()))?;
            let f = std::fs::File::open(path)?;
            let mesh = read_swemesh(std::io::BufReader::new(f))?;
            // a file mesh only has to match the scenario's boundary topology
            let walls = !mesh.boundary_facets().is_empty();
            if cfg.scenario != CustomExpression && walls != (natural != MeshKind::Torus) {
                return Err(Error::Scenario(format!(
                    "scenario {} needs a mesh {} boundary",
                    cfg.scenario.name(),
                    if walls { "without" } else { "with" }
                )));
            }
            Ok(mesh)
        }
    }
}

/// Builds mesh, model and initial state.
pub fn setup(cfg: &Config) -> Result<Setup> {
    cfg.validate()?;
    let scenario = Scenario::from_config(cfg);
    let mesh = Arc::new(build_mesh(cfg)?);
    let scheme = cfg.scheme.unwrap_or(if mesh.has_boundary() {
        Scheme::PrognosticZ
    } else {
        Scheme::NoBoundary
    });
    let model = ShallowWater::new(mesh, cfg.degree, scheme, scenario.physics(), cfg.quad_exactness)?;
    let state = initial_state(cfg, &scenario, &model)?;
    Ok(Setup { scenario, model, state })
}

fn initial_state(cfg: &Config, sc: &Scenario, model: &ShallowWater) -> Result<State> {
    let (u, d) = match sc.kind {
        ScenarioKind::TorusVortexPair => (
            vortex_pair_velocity(sc, model)?,
            project_scalar(model.v2(), |x| sc.depth(x))?,
        ),
        ScenarioKind::CustomExpression => {
            let c = cfg
                .custom
                .as_ref()
                .ok_or_else(|| Error::Config("missing [custom] table".into()))?;
            let (fu, fv, fd) = (
                Expression::parse(&c.u)?,
                Expression::parse(&c.v)?,
                Expression::parse(&c.depth)?,
            );
            let u = project(model.v1(), |x| [fu.eval(x), fv.eval(x)])?;
            let d = project_scalar(model.v2(), |x| fd.eval(x))?;
            for (name, e) in [("u", &fu), ("v", &fv), ("depth", &fd)] {
                if let Some(msg) = e.error.borrow().as_ref() {
                    return Err(Error::Scenario(format!("custom expression {name}: {msg}")));
                }
            }
            (u, d)
        }
        _ => (
            project(model.v1(), |x| sc.velocity(x))?,
            project_scalar(model.v2(), |x| sc.depth(x))?,
        ),
    };
    if u.coeffs().iter().chain(d.coeffs()).any(|v| !v.is_finite()) {
        return Err(Error::Scenario("initial data is not finite".into()));
    }
    model.check_depth(&d)?;
    model.state(u, d, 0.0)
}

/// Two opposite Gaussian vortices: solves `Δψ = ω − mean(ω)` in the
/// continuous Lagrange space and sets `u = ∇⊥ψ`, which is divergence free.
fn vortex_pair_velocity(sc: &Scenario, model: &ShallowWater) -> Result<Field> {
    let mesh = model.mesh();
    let (lx, ly) = match mesh.periodicity() {
        Some(p) => (p.lx, p.ly),
        None => return Err(Error::Scenario("torus_vortex_pair needs a periodic mesh".into())),
    };
    let s2 = sc.vortex_width * sc.vortex_width;
    let centres = [[0.4 * lx, 0.5 * ly], [0.6 * lx, 0.5 * ly]];
    let omega = |x: [f64; 2]| -> f64 {
        centres
            .iter()
            .zip([1.0, -1.0])
            .map(|(c, s)| {
                // nearest periodic image
                let dx = (x[0] - c[0]) - lx * ((x[0] - c[0]) / lx).round();
                let dy = (x[1] - c[1]) - ly * ((x[1] - c[1]) / ly).round();
                s * sc.amplitude * (-(dx * dx + dy * dy) / s2).exp()
            })
            .sum()
    };
    let v0 = model.v0();
    let w_qp: Vec<f64> = v0.qpoints().iter().map(|&x| omega(x)).collect();
    let mean = w_qp.iter().zip(v0.jxw_all()).map(|(a, b)| a * b).sum::<f64>() / mesh.area();
    let shifted: Vec<f64> = w_qp.iter().map(|w| w - mean).collect();
    let load = assemble_vector(&LinearForm::Source(Scalar::Qp(&shifted)), v0)?;
    let stiffness = assemble_with(v0, v0, |_, t, s| t.der[0] * s.der[0] + t.der[1] * s.der[1])?;
    // pin the first DOF to remove the constant null space
    let keep: Vec<usize> = (1..v0.dim()).collect();
    let k = stiffness.select(&keep, &keep);
    let rhs: Vec<f64> = keep.iter().map(|&i| -load[i]).collect();
    let psi_r = factorize(&k, true, "streamfunction stiffness")?.solve(&rhs)?;
    let mut psi = vec![0.0; v0.dim()];
    for (i, v) in keep.iter().zip(psi_r) {
        psi[*i] = v;
    }
    let psi = Field::new(v0.clone(), psi)?;
    let gp: Vec<[f64; 2]> = psi.qp_derivs().iter().map(|g| [-g[1], g[0]]).collect();
    let rhs = assemble_vector(&LinearForm::VectorSource(Vector::Qp(&gp)), model.v1())?;
    Field::new(model.v1().clone(), model.mass1_solve(&rhs)?)
}

/// A parsed scalar expression in `x`, `y` and `pi`. Evaluation errors are
/// recorded and turn the value into NaN.
struct Expression {
    node: Node<DefaultNumericTypes>,
    ctx: RefCell<HashMapContext<DefaultNumericTypes>>,
    error: RefCell<Option<String>>,
}

impl Expression {
    fn parse(text: &str) -> Result<Self> {
        let node = build_operator_tree::<DefaultNumericTypes>(text)
            .map_err(|e| Error::Scenario(format!("cannot parse expression {text:?}: {e}")))?;
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("pi".into(), Value::Float(PI))
            .expect("fresh context accepts values");
        let e = Expression {
            node,
            ctx: RefCell::new(ctx),
            error: RefCell::new(None),
        };
        let v = e.eval([0.0, 0.0]);
        if let Some(msg) = e.error.borrow().as_ref() {
            return Err(Error::Scenario(format!("cannot evaluate expression {text:?}: {msg}")));
        }
        debug_assert!(v.is_nan() || v.is_finite() || v.is_infinite());
        Ok(e)
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        let mut ctx = self.ctx.borrow_mut();
        ctx.set_value("x".into(), Value::Float(x[0])).expect("float variable");
        ctx.set_value("y".into(), Value::Float(x[1])).expect("float variable");
        match self.node.eval_number_with_context(&*ctx) {
            Ok(v) => v,
            Err(e) => {
                self.error.borrow_mut().get_or_insert_with(|| e.to_string());
                f64::NAN
            }
        }
    }
}
