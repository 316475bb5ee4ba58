use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble, assemble_vector, factorize, Factorization, FormTag, LinearForm, Scalar, SparseOp, Vector,
};
use crate::fem::{build_space, quadrature_rule, Family, Field, FunctionSpace};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Which formulation the tendencies and time steps use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Domains without boundary; unrestricted velocity space.
    NoBoundary,
    /// Slip boundaries with `Z` as a prognostic variable.
    PrognosticZ,
    /// Slip boundaries with `q` re-diagnosed from `u` every evaluation. Does
    /// not conserve enstrophy; kept as a negative control.
    Naive,
}

/// Coriolis parameter `f = f0 + beta * y`, evaluated pointwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coriolis {
    pub f0: f64,
    #[serde(default)]
    pub beta: f64,
}

impl Coriolis {
    pub fn constant(f0: f64) -> Self {
        Coriolis { f0, beta: 0.0 }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.f0 + self.beta * x[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Physics {
    pub g: f64,
    pub coriolis: Coriolis,
}

/// Prognostic variables: velocity, depth, and mass-weighted vorticity.
#[derive(Clone, Debug)]
pub struct State {
    pub u: Field,
    pub d: Field,
    pub z: Field,
    pub t: f64,
}

/// Mass flux `F` and potential vorticity `q` diagnosed from a state.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub flux: Field,
    pub q: Field,
}

/// Energy `H`, total potential vorticity `Q`, enstrophy and mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservedSet {
    pub energy: f64,
    pub total_pv: f64,
    pub enstrophy: f64,
    pub mass: f64,
}

/// Semi-discrete time derivatives of `(u, D, Z)` together with the
/// diagnostics they were computed from and the assembled right-hand sides.
#[derive(Clone, Debug)]
pub struct Tendencies {
    pub u_t: Vec<f64>,
    pub d_t: Vec<f64>,
    pub z_t: Vec<f64>,
    pub diagnostics: Diagnostics,
    /// `M1 u_t`.
    pub rhs_u: Vec<f64>,
    /// `M0 Z_t`.
    pub rhs_z: Vec<f64>,
}

/// Spaces, operators and physics of one discretization.
pub struct ShallowWater {
    mesh: Arc<Mesh>,
    degree: usize,
    scheme: Scheme,
    physics: Physics,
    v0: Arc<FunctionSpace>,
    v0r: Arc<FunctionSpace>,
    v1: Arc<FunctionSpace>,
    v2: Arc<FunctionSpace>,
    m0: SparseOp,
    m1: SparseOp,
    m2: SparseOp,
    m0_fact: Factorization,
    m1_fact: Factorization,
    m2_fact: Factorization,
    m0r_fact: Factorization,
    div: SparseOp,
    curl: SparseOp,
    curl_r: SparseOp,
    boundary_tangent: SparseOp,
    f_qp: Vec<f64>,
    f_load: Vec<f64>,
    f_load_r: Vec<f64>,
}

impl std::fmt::Debug for ShallowWater {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShallowWater")
            .field("degree", &self.degree)
            .field("scheme", &self.scheme)
            .field("dims", &(self.v1.dim(), self.v2.dim(), self.v0.dim()))
            .finish()
    }
}

/// `Σ aᵢbᵢ` and `Σ |aᵢbᵢ|`.
fn abs_dot(a: &[f64], b: &[f64]) -> (f64, f64) {
    a.iter()
        .zip(b)
        .fold((0.0, 0.0), |(s, t), (x, y)| (s + x * y, t + (x * y).abs()))
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl ShallowWater {
    /// Builds the spaces `(CG_k, BDM_{k-1}, DG_{k-2})` on `mesh`. The
    /// velocity space is restricted to `u·n = 0` whenever the mesh has a
    /// boundary. `quad_exactness` defaults to `3k`; every integral of the
    /// model uses this one rule.
    pub fn new(
        mesh: Arc<Mesh>,
        degree: usize,
        scheme: Scheme,
        physics: Physics,
        quad_exactness: Option<usize>,
    ) -> Result<Self> {
        if !(2..=3).contains(&degree) {
            return Err(Error::Unsupported(format!(
                "polynomial degree k = {degree} (supported: 2, 3)"
            )));
        }
        if scheme == Scheme::NoBoundary && mesh.has_boundary() {
            return Err(Error::InvalidArgument(
                "scheme no_boundary needs a mesh without boundary".into(),
            ));
        }
        if !(physics.g > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gravity must be positive, got {}",
                physics.g
            )));
        }
        let rule = quadrature_rule(quad_exactness.unwrap_or(3 * degree))?;
        let slip = mesh.has_boundary();
        let space = |f, d, r| build_space(mesh.clone(), f, d, r, &rule).map(Arc::new);
        let v0 = space(Family::Lagrange, degree, false)?;
        let v0r = Arc::new(v0.with_restriction(true)?);
        let v1 = space(Family::Bdm, degree - 1, slip)?;
        let v2 = space(Family::DiscontinuousLagrange, degree - 2, false)?;

        let m0 = assemble(&FormTag::Mass, &v0, &v0)?;
        let m1 = assemble(&FormTag::Mass, &v1, &v1)?;
        let m2 = assemble(&FormTag::Mass, &v2, &v2)?;
        let m0r = assemble(&FormTag::Mass, &v0r, &v0r)?;
        let m0_fact = factorize(&m0, true, "V0 mass matrix")?;
        let m1_fact = factorize(&m1, true, "V1 mass matrix")?;
        let m2_fact = factorize(&m2, true, "V2 mass matrix")?;
        let m0r_fact = factorize(&m0r, true, "restricted V0 mass matrix")?;
        let div = assemble(&FormTag::Div, &v1, &v2)?;
        let curl = assemble(&FormTag::Curl, &v0, &v1)?;
        let curl_r = assemble(&FormTag::Curl, &v0r, &v1)?;
        let boundary_tangent = assemble(&FormTag::BoundaryTangent, &v0, &v1)?;
        let f_qp: Vec<f64> = v0.qpoints().iter().map(|&x| physics.coriolis.eval(x)).collect();
        let f_load = assemble_vector(&LinearForm::Source(Scalar::Qp(&f_qp)), &v0)?;
        let f_load_r = assemble_vector(&LinearForm::Source(Scalar::Qp(&f_qp)), &v0r)?;
        Ok(ShallowWater {
            mesh,
            degree,
            scheme,
            physics,
            v0,
            v0r,
            v1,
            v2,
            m0,
            m1,
            m2,
            m0_fact,
            m1_fact,
            m2_fact,
            m0r_fact,
            div,
            curl,
            curl_r,
            boundary_tangent,
            f_qp,
            f_load,
            f_load_r,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn physics(&self) -> &Physics {
        &self.physics
    }

    pub fn g(&self) -> f64 {
        self.physics.g
    }

    /// Vorticity space `V0` (unrestricted).
    pub fn v0(&self) -> &Arc<FunctionSpace> {
        &self.v0
    }

    /// `V̊0`: vorticity space without boundary nodes.
    pub fn v0_restricted(&self) -> &Arc<FunctionSpace> {
        &self.v0r
    }

    /// Velocity space (`V̊1` when the mesh has a boundary).
    pub fn v1(&self) -> &Arc<FunctionSpace> {
        &self.v1
    }

    /// Depth space `V2`.
    pub fn v2(&self) -> &Arc<FunctionSpace> {
        &self.v2
    }

    pub fn mass0(&self) -> &SparseOp {
        &self.m0
    }

    pub fn mass1(&self) -> &SparseOp {
        &self.m1
    }

    pub fn mass2(&self) -> &SparseOp {
        &self.m2
    }

    pub fn mass0_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.m0_fact.solve(b)
    }

    pub fn mass1_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.m1_fact.solve(b)
    }

    pub fn mass2_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.m2_fact.solve(b)
    }

    /// `⟨∇·w, φ⟩` with rows over `V1`, columns over `V2`.
    pub fn div_matrix(&self) -> &SparseOp {
        &self.div
    }

    /// `⟨∇⊥γ, u⟩` with rows over `V0`, columns over `V1`.
    pub fn curl_matrix(&self) -> &SparseOp {
        &self.curl
    }

    /// `⟪γ, n⊥·u⟫` with rows over `V0`, columns over `V1`.
    pub fn boundary_tangent_matrix(&self) -> &SparseOp {
        &self.boundary_tangent
    }

    /// Coriolis parameter at every quadrature point.
    pub fn coriolis_qp(&self) -> &[f64] {
        &self.f_qp
    }

    /// `⟨γ, f⟩` over `V0`.
    pub fn coriolis_load(&self) -> &[f64] {
        &self.f_load
    }

    pub fn num_qp(&self) -> usize {
        self.v0.jxw_all().len()
    }

    pub fn jxw(&self) -> &[f64] {
        self.v0.jxw_all()
    }

    pub(crate) fn check_field(&self, f: &Field, space: &Arc<FunctionSpace>, name: &str) -> Result<()> {
        if Arc::ptr_eq(f.space(), space) {
            Ok(())
        } else {
            Err(Error::MeshMismatch(format!(
                "{name} does not live on this model's space"
            )))
        }
    }

    /// Fails with [`Error::NonPositiveDepth`] if `D <= 0` at any quadrature
    /// point.
    pub fn check_depth_qp(&self, d_qp: &[f64]) -> Result<()> {
        let nq = self.v2.num_qp();
        let mut worst: Option<(usize, f64)> = None;
        for (k, &d) in d_qp.iter().enumerate() {
            if !(d > 0.0) && worst.is_none_or(|(_, w)| d < w || d.is_nan()) {
                worst = Some((k / nq, d));
            }
        }
        match worst {
            Some((cell, min_depth)) => Err(Error::NonPositiveDepth { cell, min_depth }),
            None => Ok(()),
        }
    }

    pub fn check_depth(&self, d: &Field) -> Result<()> {
        self.check_depth_qp(&d.qp_scalar())
    }

    /// `F` with `⟨v, F − uD⟩ = 0` for all `v` in the velocity space.
    pub fn diagnose_flux(&self, u: &Field, d: &Field) -> Result<Field> {
        self.check_field(u, &self.v1, "u")?;
        self.check_field(d, &self.v2, "D")?;
        let (uq, dq) = (u.qp_values(), d.qp_scalar());
        let ud: Vec<[f64; 2]> = uq.iter().zip(&dq).map(|(u, d)| [u[0] * d, u[1] * d]).collect();
        let b = assemble_vector(&LinearForm::VectorSource(Vector::Qp(&ud)), &self.v1)?;
        Field::new(self.v1.clone(), self.m1_fact.solve(&b)?)
    }

    /// `q` with `⟨γ, qD⟩ = ⟨γ, Z⟩` for all `γ` in `V0`.
    pub fn diagnose_q(&self, z: &Field, d: &Field) -> Result<Field> {
        self.check_field(z, &self.v0, "Z")?;
        self.check_field(d, &self.v2, "D")?;
        let dq = d.qp_scalar();
        self.check_depth_qp(&dq)?;
        let wm = assemble(&FormTag::WeightedMass(Scalar::Qp(&dq)), &self.v0, &self.v0)?;
        let rhs = self.m0.matvec(z.coeffs());
        let q = factorize(&wm, true, "depth-weighted V0 mass matrix")?.solve(&rhs)?;
        Field::new(self.v0.clone(), q)
    }

    /// `Z` with `⟨γ, Z⟩ + ⟨∇⊥γ, u⟩ − ⟪γ, n⊥·u⟫ − ⟨γ, f⟩ = 0` for all `γ` in
    /// `V0`.
    pub fn init_z(&self, u: &Field) -> Result<Field> {
        self.check_field(u, &self.v1, "u")?;
        let rhs = self.vorticity_rhs(u.coeffs());
        Field::new(self.v0.clone(), self.m0_fact.solve(&rhs)?)
    }

    /// `−⟨∇⊥γ, u⟩ + ⟪γ, n⊥·u⟫ + ⟨γ, f⟩`.
    pub(crate) fn vorticity_rhs(&self, u: &[f64]) -> Vec<f64> {
        let cu = self.curl.matvec(u);
        let tu = self.boundary_tangent.matvec(u);
        cu.iter()
            .zip(&tu)
            .zip(&self.f_load)
            .map(|((c, t), f)| f - c + t)
            .collect()
    }

    /// `Z̊ ∈ V̊0` with `⟨γ, Z̊⟩ + ⟨∇⊥γ, u⟩ − ⟨γ, f⟩ = 0` for all `γ ∈ V̊0`.
    pub fn diagnose_ring_vorticity(&self, u: &Field) -> Result<Field> {
        self.check_field(u, &self.v1, "u")?;
        let cu = self.curl_r.matvec(u.coeffs());
        let rhs: Vec<f64> = cu.iter().zip(&self.f_load_r).map(|(c, f)| f - c).collect();
        Field::new(self.v0r.clone(), self.m0r_fact.solve(&rhs)?)
    }

    /// Residual of the boundary vorticity relation,
    /// `⟨γ, Z⟩ + ⟨∇⊥γ, u⟩ − ⟪γ, n⊥·u⟫ − ⟨γ, f⟩`, for every basis `γ` of `V0`.
    pub fn vorticity_residual(&self, u: &[f64], z: &[f64]) -> Vec<f64> {
        let mz = self.m0.matvec(z);
        mz.iter().zip(self.vorticity_rhs(u)).map(|(a, b)| a - b).collect()
    }

    /// Builds a state from velocity and depth, initializing `Z` from `u`.
    pub fn state(&self, u: Field, d: Field, t: f64) -> Result<State> {
        self.check_depth(&d)?;
        let z = self.init_z(&u)?;
        Ok(State { u, d, z, t })
    }

    /// The rest state `u = 0, D = d0`.
    pub fn rest_state(&self, d0: f64) -> Result<State> {
        let u = Field::zeros(self.v1.clone());
        let d = crate::fem::project_scalar(&self.v2, |_| d0)?;
        self.state(u, d, 0.0)
    }

    pub fn diagnostics(&self, state: &State) -> Result<Diagnostics> {
        let flux = self.diagnose_flux(&state.u, &state.d)?;
        let q = match self.scheme {
            Scheme::Naive => self.diagnose_q(&self.init_z(&state.u)?, &state.d)?,
            _ => self.diagnose_q(&state.z, &state.d)?,
        };
        Ok(Diagnostics { flux, q })
    }

    /// Energy, total PV, enstrophy and mass, all with the shared rule.
    pub fn conserved(&self, state: &State) -> Result<ConservedSet> {
        let q = self.diagnostics_q(state)?;
        Ok(self.conserved_with_q(state, &q))
    }

    fn diagnostics_q(&self, state: &State) -> Result<Field> {
        match self.scheme {
            Scheme::Naive => self.diagnose_q(&self.init_z(&state.u)?, &state.d),
            _ => self.diagnose_q(&state.z, &state.d),
        }
    }

    pub(crate) fn conserved_with_q(&self, state: &State, q: &Field) -> ConservedSet {
        let g = self.physics.g;
        let (uq, dq, zq, qq) = (
            state.u.qp_values(),
            state.d.qp_scalar(),
            state.z.qp_scalar(),
            q.qp_scalar(),
        );
        let mut c = ConservedSet {
            energy: 0.0,
            total_pv: 0.0,
            enstrophy: 0.0,
            mass: 0.0,
        };
        for (k, w) in self.jxw().iter().enumerate() {
            let d = dq[k];
            c.energy += w * (0.5 * d * dot(uq[k], uq[k]) + 0.5 * g * d * d);
            c.total_pv += w * zq[k];
            c.enstrophy += w * qq[k] * qq[k] * d;
            c.mass += w * d;
        }
        c
    }

    /// `∫ ½D|u|² + ½g(D − h)²`. Differs from the energy by `g h M` plus a
    /// constant, so differences between states of equal mass match energy
    /// differences without cancellation against the mean depth.
    pub fn energy_about(&self, state: &State, h: f64) -> f64 {
        let g = self.physics.g;
        let (uq, dq) = (state.u.qp_values(), state.d.qp_scalar());
        self.jxw()
            .iter()
            .enumerate()
            .map(|(k, w)| w * (0.5 * dq[k] * dot(uq[k], uq[k]) + 0.5 * g * (dq[k] - h) * (dq[k] - h)))
            .sum()
    }

    /// `∫ (q − c)² D`. Differences of this between two states equal the
    /// enstrophy difference whenever mass and total PV agree, without the
    /// cancellation that `∫ q² D` suffers when `q` is close to `c`.
    pub fn enstrophy_about(&self, state: &State, c: f64) -> Result<f64> {
        let q = self.diagnostics_q(state)?.qp_scalar();
        let d = state.d.qp_scalar();
        Ok(self
            .jxw()
            .iter()
            .enumerate()
            .map(|(k, w)| w * (q[k] - c) * (q[k] - c) * d[k])
            .sum())
    }

    /// Bernoulli function `½|u|² + gD` at the quadrature points.
    pub fn bernoulli_qp(&self, u_qp: &[[f64; 2]], d_qp: &[f64]) -> Vec<f64> {
        u_qp.iter()
            .zip(d_qp)
            .map(|(u, d)| 0.5 * dot(*u, *u) + self.physics.g * d)
            .collect()
    }

    /// Semi-discrete tendencies of the selected scheme.
    pub fn tendencies(&self, state: &State) -> Result<Tendencies> {
        let diagnostics = self.diagnostics(state)?;
        let Diagnostics { flux, q } = &diagnostics;
        let (uq, dq) = (state.u.qp_values(), state.d.qp_scalar());
        let b = self.bernoulli_qp(&uq, &dq);
        let fq = flux.qp_values();
        let qq = q.qp_scalar();

        let perp = assemble_vector(
            &LinearForm::PerpFlux {
                q: Scalar::Qp(&qq),
                flux: Vector::Qp(&fq),
            },
            &self.v1,
        )?;
        let grad = assemble_vector(&LinearForm::DivScalar(Scalar::Qp(&b)), &self.v1)?;
        let rhs_u: Vec<f64> = perp.iter().zip(&grad).map(|(p, g)| g - p).collect();
        let u_t = self.m1_fact.solve(&rhs_u)?;

        let rhs_d: Vec<f64> = self.div.matvec_transpose(flux.coeffs()).iter().map(|v| -v).collect();
        let d_t = self.m2_fact.solve(&rhs_d)?;

        let rhs_z = match self.scheme {
            Scheme::Naive => {
                // Z follows u through the boundary vorticity relation
                let cu = self.curl.matvec(&u_t);
                let tu = self.boundary_tangent.matvec(&u_t);
                cu.iter().zip(&tu).map(|(c, t)| t - c).collect()
            }
            _ => assemble_vector(
                &LinearForm::GradFlux {
                    q: Scalar::Qp(&qq),
                    flux: Vector::Qp(&fq),
                },
                &self.v0,
            )?,
        };
        let z_t = self.m0_fact.solve(&rhs_z)?;
        Ok(Tendencies {
            u_t,
            d_t,
            z_t,
            diagnostics,
            rhs_u,
            rhs_z,
        })
    }

    /// `dH/dt = ⟨F, u_t⟩ + ⟨½|u|² + gD, D_t⟩`, returned with the sum of the
    /// absolute values of all products in it, which bounds its round-off.
    pub fn energy_rate(&self, state: &State, tend: &Tendencies) -> (f64, f64) {
        let (t1, s1) = abs_dot(tend.diagnostics.flux.coeffs(), &self.m1.matvec(&tend.u_t));
        let b = self.bernoulli_qp(&state.u.qp_values(), &state.d.qp_scalar());
        let dt = Field::new(self.v2.clone(), tend.d_t.clone()).expect("tendency length");
        let wb: Vec<f64> = self.jxw().iter().zip(&b).map(|(w, b)| w * b).collect();
        let (t2, s2) = abs_dot(&wb, &dt.qp_scalar());
        (t1 + t2, s1 + s2)
    }

    /// `dZens/dt = 2⟨q, (qD)_t⟩ − ⟨q², D_t⟩`, returned with the sum of the
    /// absolute values of all products in it.
    pub fn enstrophy_rate(&self, tend: &Tendencies) -> (f64, f64) {
        let q = &tend.diagnostics.q;
        let (t1, s1) = abs_dot(q.coeffs(), &self.m0.matvec(&tend.z_t));
        let qq = q.qp_scalar();
        let dt = Field::new(self.v2.clone(), tend.d_t.clone()).expect("tendency length");
        let wq: Vec<f64> = self.jxw().iter().zip(&qq).map(|(w, q)| w * q * q).collect();
        let (t2, s2) = abs_dot(&wq, &dt.qp_scalar());
        (2.0 * t1 - t2, 2.0 * s1 + s2)
    }

    /// `⟨1, Z_t⟩` and `⟨1, D_t⟩`.
    pub fn pv_and_mass_rates(&self, tend: &Tendencies) -> (f64, f64) {
        let zt = Field::new(self.v0.clone(), tend.z_t.clone()).expect("tendency length");
        let dt = Field::new(self.v2.clone(), tend.d_t.clone()).expect("tendency length");
        (zt.integral(), dt.integral())
    }
}
