//! One time step of the energy-conserving integrator.
//!
//! The unknowns are stacked as `X = [u, D, F, q]` with `u^{n+1}`, `D^{n+1}`,
//! the averaged flux `F^{n+1/2}` and `q^{n+1}`. The residual is
//!
//! ```text
//! R_u = ⟨w, u − uⁿ⟩ + Δt⟨w, q* F⊥⟩ − Δt⟨∇·w, g D̄ + K̄⟩
//! R_D = ⟨φ, D − Dⁿ⟩ + Δt⟨φ, ∇·F⟩
//! R_F = ⟨v, F − F̄⟩
//! R_q = ⟨γ, qD⟩ − ⟨γ, Zⁿ⟩ − Δt⟨∇γ, F q*⟩
//! ```
//!
//! with `D̄ = (Dⁿ + D)/2`, `K̄` and `F̄` the exact chord averages of `½|u|²`
//! and `uD`, and `q* = (qⁿ + q)/2` (minus the SUPG correction when enabled).
//! For the naive boundary scheme `R_q` is replaced by the boundary vorticity
//! relation evaluated at `u^{n+1}`.

use std::time::Instant;

use super::config::{Integrator, JacobianKind, StepConfig};
use crate::assembly::{
    assemble, assemble_vector, assemble_with, factorize, perp, Factorization, FormTag, LinearForm, Scalar, SparseOp,
    Vector,
};
use crate::fem::Field;
use crate::swe::{Scheme, ShallowWater, State};
use crate::{Error, Result};

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Outcome of one step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub state: State,
    /// Newton or Picard iterations performed.
    pub iterations: usize,
    /// Max-norm residual after each iteration, starting with the initial
    /// guess.
    pub residual_history: Vec<f64>,
    pub wall_time: f64,
}

impl StepResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// Chord average `F̄ = uⁿDⁿ/3 + uⁿD/6 + uDⁿ/6 + uD/3` at quadrature points.
pub fn average_flux_qp(un: &[[f64; 2]], u: &[[f64; 2]], dn: &[f64], d: &[f64]) -> Vec<[f64; 2]> {
    (0..u.len())
        .map(|k| {
            let a = d[k] / 3.0 + dn[k] / 6.0;
            let b = d[k] / 6.0 + dn[k] / 3.0;
            [a * u[k][0] + b * un[k][0], a * u[k][1] + b * un[k][1]]
        })
        .collect()
}

/// Projection of the chord-averaged flux into the velocity space.
pub fn average_flux(model: &ShallowWater, un: &Field, u: &Field, dn: &Field, d: &Field) -> Result<Field> {
    let fbar = average_flux_qp(&un.qp_values(), &u.qp_values(), &dn.qp_scalar(), &d.qp_scalar());
    let b = assemble_vector(&LinearForm::VectorSource(Vector::Qp(&fbar)), model.v1())?;
    Field::new(model.v1().clone(), model.mass1_solve(&b)?)
}

/// Chord average of `½|u|²`: `(|uⁿ|² + uⁿ·u + |u|²)/6`.
pub fn average_kinetic(un: &[[f64; 2]], u: &[[f64; 2]]) -> Vec<f64> {
    un.iter()
        .zip(u)
        .map(|(a, b)| (dot(*a, *a) + dot(*a, *b) + dot(*b, *b)) / 6.0)
        .collect()
}

/// `q* = q̄ − τ((q − qⁿ)/Δt + (F/D̄)·∇q̄)` at quadrature points, with
/// `q̄ = (qⁿ + q)/2` and `D̄ = (Dⁿ + D)/2`. Returns `q̄` unchanged when
/// `tau == 0`.
#[allow(clippy::too_many_arguments)]
pub fn supg_q_star(
    qn: &[f64],
    q: &[f64],
    grad_qn: &[[f64; 2]],
    grad_q: &[[f64; 2]],
    dn: &[f64],
    d: &[f64],
    flux: &[[f64; 2]],
    dt: f64,
    tau: f64,
) -> Vec<f64> {
    (0..q.len())
        .map(|k| {
            let qbar = 0.5 * (qn[k] + q[k]);
            if tau == 0.0 {
                return qbar;
            }
            let dbar = 0.5 * (dn[k] + d[k]);
            let gq = [
                0.5 * (grad_qn[k][0] + grad_q[k][0]),
                0.5 * (grad_qn[k][1] + grad_q[k][1]),
            ];
            qbar - tau * ((q[k] - qn[k]) / dt + dot(flux[k], gq) / dbar)
        })
        .collect()
}

/// The SUPG dissipation form `⟨(τ/D) F·∇q, F·∇q⟩`.
pub fn supg_dissipation(model: &ShallowWater, q: &Field, d: &Field, flux: &Field, tau: f64) -> f64 {
    let (gq, dq, fq) = (q.qp_derivs(), d.qp_scalar(), flux.qp_values());
    model
        .jxw()
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let a = dot(fq[k], gq[k]);
            w * tau / dq[k] * a * a
        })
        .sum()
}

/// Quadrature-point data of an iterate.
struct Iterate {
    u: Vec<[f64; 2]>,
    d: Vec<f64>,
    f: Vec<[f64; 2]>,
    q: Vec<f64>,
    gq: Vec<[f64; 2]>,
}

/// The nonlinear system of one step from a fixed level-`n` state.
pub struct StepProblem<'a> {
    model: &'a ShallowWater,
    dt: f64,
    tau: f64,
    n1: usize,
    n2: usize,
    n0: usize,
    un: Vec<f64>,
    dn_c: Vec<f64>,
    qn_c: Vec<f64>,
    mzn: Vec<f64>,
    un_qp: Vec<[f64; 2]>,
    dn_qp: Vec<f64>,
    qn_qp: Vec<f64>,
    gqn_qp: Vec<[f64; 2]>,
    fn_c: Vec<f64>,
}

impl<'a> StepProblem<'a> {
    pub fn new(model: &'a ShallowWater, state: &State, dt: f64, tau: f64) -> Result<Self> {
        let diag = model.diagnostics(state)?;
        let mzn = match model.scheme() {
            Scheme::Naive => model.mass0().matvec(model.init_z(&state.u)?.coeffs()),
            _ => model.mass0().matvec(state.z.coeffs()),
        };
        Ok(StepProblem {
            model,
            dt,
            tau,
            n1: model.v1().dim(),
            n2: model.v2().dim(),
            n0: model.v0().dim(),
            un: state.u.coeffs().to_vec(),
            dn_c: state.d.coeffs().to_vec(),
            qn_c: diag.q.coeffs().to_vec(),
            mzn,
            un_qp: state.u.qp_values(),
            dn_qp: state.d.qp_scalar(),
            qn_qp: diag.q.qp_scalar(),
            gqn_qp: diag.q.qp_derivs(),
            fn_c: diag.flux.coeffs().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n1 + self.n2 + self.n0
    }

    /// Block sizes `(n_u, n_D, n_F, n_q)`.
    pub fn block_sizes(&self) -> [usize; 4] {
        [self.n1, self.n2, self.n1, self.n0]
    }

    /// Initial guess: level-`n` values and diagnostics.
    pub fn initial_guess(&self) -> Vec<f64> {
        [&self.un[..], &self.dn_c, &self.fn_c, &self.qn_c].concat()
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64], &'x [f64], &'x [f64]) {
        let (u, rest) = x.split_at(self.n1);
        let (d, rest) = rest.split_at(self.n2);
        let (f, q) = rest.split_at(self.n1);
        (u, d, f, q)
    }

    fn field(&self, space: &std::sync::Arc<crate::fem::FunctionSpace>, c: &[f64]) -> Field {
        Field::new(space.clone(), c.to_vec()).expect("block length matches space")
    }

    fn iterate(&self, x: &[f64]) -> Result<Iterate> {
        let m = self.model;
        let (u, d, f, q) = self.split(x);
        let qf = self.field(m.v0(), q);
        let it = Iterate {
            u: self.field(m.v1(), u).qp_values(),
            d: self.field(m.v2(), d).qp_scalar(),
            f: self.field(m.v1(), f).qp_values(),
            q: qf.qp_scalar(),
            gq: qf.qp_derivs(),
        };
        m.check_depth_qp(&it.d)?;
        Ok(it)
    }

    fn q_star(&self, it: &Iterate) -> Vec<f64> {
        supg_q_star(
            &self.qn_qp,
            &it.q,
            &self.gqn_qp,
            &it.gq,
            &self.dn_qp,
            &it.d,
            &it.f,
            self.dt,
            self.tau,
        )
    }

    /// Full residual `[R_u, R_D, R_F, R_q]`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let it = self.iterate(x)?;
        let mut r = self.momentum_and_depth_residual(x, &it)?;
        r.extend(self.flux_residual(x, &it)?);
        r.extend(self.pv_residual(x, &it)?);
        Ok(r)
    }

    fn momentum_and_depth_residual(&self, x: &[f64], it: &Iterate) -> Result<Vec<f64>> {
        let m = self.model;
        let (u, d, f, _) = self.split(x);
        let dt = self.dt;
        let g = m.g();
        let qs = self.q_star(it);
        let kbar = average_kinetic(&self.un_qp, &it.u);
        let bern: Vec<f64> = (0..kbar.len())
            .map(|k| g * 0.5 * (self.dn_qp[k] + it.d[k]) + kbar[k])
            .collect();
        let du: Vec<f64> = u.iter().zip(&self.un).map(|(a, b)| a - b).collect();
        let mdu = m.mass1().matvec(&du);
        let pf = assemble_vector(
            &LinearForm::PerpFlux {
                q: Scalar::Qp(&qs),
                flux: Vector::Qp(&it.f),
            },
            m.v1(),
        )?;
        let gb = assemble_vector(&LinearForm::DivScalar(Scalar::Qp(&bern)), m.v1())?;
        let mut r: Vec<f64> = (0..self.n1).map(|i| mdu[i] + dt * pf[i] - dt * gb[i]).collect();

        let dd: Vec<f64> = d.iter().zip(&self.dn_c).map(|(a, b)| a - b).collect();
        let mdd = m.mass2().matvec(&dd);
        let divf = m.div_matrix().matvec_transpose(f);
        r.extend((0..self.n2).map(|i| mdd[i] + dt * divf[i]));
        Ok(r)
    }

    fn flux_residual(&self, x: &[f64], it: &Iterate) -> Result<Vec<f64>> {
        let m = self.model;
        let (_, _, f, _) = self.split(x);
        let fbar = average_flux_qp(&self.un_qp, &it.u, &self.dn_qp, &it.d);
        let b = assemble_vector(&LinearForm::VectorSource(Vector::Qp(&fbar)), m.v1())?;
        let mf = m.mass1().matvec(f);
        Ok(mf.iter().zip(&b).map(|(a, b)| a - b).collect())
    }

    fn pv_residual(&self, x: &[f64], it: &Iterate) -> Result<Vec<f64>> {
        let m = self.model;
        let (u, _, _, _) = self.split(x);
        let qd: Vec<f64> = it.q.iter().zip(&it.d).map(|(q, d)| q * d).collect();
        let mqd = assemble_vector(&LinearForm::Source(Scalar::Qp(&qd)), m.v0())?;
        Ok(match m.scheme() {
            Scheme::Naive => {
                let rhs = m.vorticity_rhs(u);
                mqd.iter().zip(&rhs).map(|(a, b)| a - b).collect()
            }
            _ => {
                let qs = self.q_star(it);
                let gf = assemble_vector(
                    &LinearForm::GradFlux {
                        q: Scalar::Qp(&qs),
                        flux: Vector::Qp(&it.f),
                    },
                    m.v0(),
                )?;
                (0..self.n0).map(|i| mqd[i] - self.mzn[i] - self.dt * gf[i]).collect()
            }
        })
    }

    /// Analytic Jacobian of [`Self::residual`].
    pub fn jacobian(&self, x: &[f64]) -> Result<SparseOp> {
        let m = self.model;
        let it = self.iterate(x)?;
        let (dt, tau, g) = (self.dt, self.tau, m.g());
        let (v0, v1, v2) = (m.v0().as_ref(), m.v1().as_ref(), m.v2().as_ref());
        let qs = self.q_star(&it);
        let supg = tau != 0.0;
        let nqp = it.d.len();
        // q* = c0 η + cv·∇η for a q-perturbation η; cd χ for a D-perturbation;
        // cf·ψ for an F-perturbation.
        let c0 = 0.5 - tau / dt;
        let mut cv = vec![[0.0; 2]; nqp];
        let mut cd = vec![0.0; nqp];
        let mut cf = vec![[0.0; 2]; nqp];
        if supg {
            for k in 0..nqp {
                let dbar = 0.5 * (self.dn_qp[k] + it.d[k]);
                let gq = [
                    0.5 * (self.gqn_qp[k][0] + it.gq[k][0]),
                    0.5 * (self.gqn_qp[k][1] + it.gq[k][1]),
                ];
                cv[k] = [-0.5 * tau * it.f[k][0] / dbar, -0.5 * tau * it.f[k][1] / dbar];
                cd[k] = tau * dot(it.f[k], gq) / (2.0 * dbar * dbar);
                cf[k] = [-tau * gq[0] / dbar, -tau * gq[1] / dbar];
            }
        }
        let fperp: Vec<[f64; 2]> = it.f.iter().map(|f| perp(*f)).collect();
        let un = &self.un_qp;

        let j_uu = assemble_with(v1, v1, |k, t, s| {
            let a = [un[k][0] + 2.0 * it.u[k][0], un[k][1] + 2.0 * it.u[k][1]];
            dot(t.val, s.val) - dt * t.der[0] * dot(a, s.val) / 6.0
        })?;
        let j_ud = assemble_with(v1, v2, |k, t, s| {
            -0.5 * dt * g * t.der[0] * s.val[0] + dt * dot(t.val, fperp[k]) * cd[k] * s.val[0]
        })?;
        let j_uf = assemble_with(v1, v1, |k, t, s| {
            dt * qs[k] * dot(t.val, perp(s.val)) + dt * dot(t.val, fperp[k]) * dot(cf[k], s.val)
        })?;
        let j_uq = assemble_with(v1, v0, |k, t, s| {
            dt * dot(t.val, fperp[k]) * (c0 * s.val[0] + dot(cv[k], s.der))
        })?;
        let j_df = m.div_matrix().transpose().scale(dt);
        let j_fu = assemble_with(v1, v1, |k, t, s| {
            -dot(t.val, s.val) * (it.d[k] / 3.0 + self.dn_qp[k] / 6.0)
        })?;
        let j_fd = assemble_with(v1, v2, |k, t, s| {
            let a = [it.u[k][0] / 3.0 + un[k][0] / 6.0, it.u[k][1] / 3.0 + un[k][1] / 6.0];
            -dot(t.val, a) * s.val[0]
        })?;
        let (j_qu, j_qd, j_qf, j_qq) = match m.scheme() {
            Scheme::Naive => (
                Some(m.curl_matrix().add(m.boundary_tangent_matrix(), -1.0)),
                assemble_with(v0, v2, |k, t, s| t.val[0] * it.q[k] * s.val[0])?,
                None,
                assemble(&FormTag::WeightedMass(Scalar::Qp(&it.d)), v0, v0)?,
            ),
            _ => (
                None,
                assemble_with(v0, v2, |k, t, s| {
                    t.val[0] * it.q[k] * s.val[0] - dt * dot(t.der, it.f[k]) * cd[k] * s.val[0]
                })?,
                Some(assemble_with(v0, v1, |k, t, s| {
                    -dt * qs[k] * dot(t.der, s.val) - dt * dot(t.der, it.f[k]) * dot(cf[k], s.val)
                })?),
                self.pv_matrix(&it, &cv, c0)?,
            ),
        };
        Ok(SparseOp::block(&[
            vec![Some(&j_uu), Some(&j_ud), Some(&j_uf), Some(&j_uq)],
            vec![None, Some(m.mass2()), Some(&j_df), None],
            vec![Some(&j_fu), Some(&j_fd), Some(m.mass1()), None],
            vec![j_qu.as_ref(), Some(&j_qd), j_qf.as_ref(), Some(&j_qq)],
        ]))
    }

    /// `∂R_q/∂q`, which does not depend on `q`.
    fn pv_matrix(&self, it: &Iterate, cv: &[[f64; 2]], c0: f64) -> Result<SparseOp> {
        let m = self.model;
        let dt = self.dt;
        assemble_with(m.v0(), m.v0(), |k, t, s| {
            t.val[0] * it.d[k] * s.val[0] - dt * dot(t.der, it.f[k]) * (c0 * s.val[0] + dot(cv[k], s.der))
        })
    }

    /// Column-wise central finite-difference Jacobian with step
    /// `1e-7 · max(1, |x_j|)`.
    pub fn jacobian_fd(&self, x: &[f64]) -> Result<SparseOp> {
        let n = x.len();
        let mut t = Vec::new();
        let mut xp = x.to_vec();
        for j in 0..n {
            let h = 1e-7 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let rp = self.residual(&xp)?;
            xp[j] = x[j] - h;
            let rm = self.residual(&xp)?;
            xp[j] = x[j];
            for (i, (a, b)) in rp.iter().zip(&rm).enumerate() {
                let v = (a - b) / (2.0 * h);
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Ok(SparseOp::from_triplets(n, n, &t))
    }

    /// Averaged flux of a velocity/depth pair: `M1⁻¹⟨v, F̄⟩`.
    fn flux_of(&self, u: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        let m = self.model;
        let fbar = average_flux_qp(
            &self.un_qp,
            &self.field(m.v1(), u).qp_values(),
            &self.dn_qp,
            &self.field(m.v2(), d).qp_scalar(),
        );
        m.mass1_solve(&assemble_vector(&LinearForm::VectorSource(Vector::Qp(&fbar)), m.v1())?)
    }

    /// Solves the (affine in `q`) PV equation for given `u, D, F`.
    fn q_of(&self, u: &[f64], d: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let zero_q = vec![0.0; self.n0];
        let x = [u, d, f, &zero_q[..]].concat();
        let it = self.iterate(&x)?;
        let r0 = self.pv_residual(&x, &it)?;
        let rhs: Vec<f64> = r0.iter().map(|v| -v).collect();
        let a = match self.model.scheme() {
            Scheme::Naive => assemble(
                &FormTag::WeightedMass(Scalar::Qp(&it.d)),
                self.model.v0(),
                self.model.v0(),
            )?,
            _ => {
                let mut cv = vec![[0.0; 2]; it.d.len()];
                if self.tau != 0.0 {
                    for (k, c) in cv.iter_mut().enumerate() {
                        let dbar = 0.5 * (self.dn_qp[k] + it.d[k]);
                        *c = [-0.5 * self.tau * it.f[k][0] / dbar, -0.5 * self.tau * it.f[k][1] / dbar];
                    }
                }
                self.pv_matrix(&it, &cv, 0.5 - self.tau / self.dt)?
            }
        };
        factorize(&a, false, "PV update system")?.solve(&rhs)
    }

    /// Builds the next state from converged `(u, F, q)`: depth and `Z` are
    /// advanced in flux form so that mass and total PV change only by
    /// round-off.
    fn finish(&self, state: &State, x: &[f64]) -> Result<State> {
        let m = self.model;
        let (u, _, f, _) = self.split(x);
        let divf = m.div_matrix().matvec_transpose(f);
        let dd = m.mass2_solve(&divf)?;
        let d: Vec<f64> = self.dn_c.iter().zip(&dd).map(|(a, b)| a - self.dt * b).collect();
        let u = self.field(m.v1(), u);
        let d = self.field(m.v2(), &d);
        m.check_depth(&d)?;
        let z = match m.scheme() {
            Scheme::Naive => m.init_z(&u)?,
            _ => {
                let it = self.iterate(x)?;
                let qs = self.q_star(&it);
                let gf = assemble_vector(
                    &LinearForm::GradFlux {
                        q: Scalar::Qp(&qs),
                        flux: Vector::Qp(&it.f),
                    },
                    m.v0(),
                )?;
                let dz = m.mass0_solve(&gf)?;
                let z: Vec<f64> = state.z.coeffs().iter().zip(&dz).map(|(a, b)| a + self.dt * b).collect();
                self.field(m.v0(), &z)
            }
        };
        Ok(State {
            u,
            d,
            z,
            t: state.t + self.dt,
        })
    }
}

/// Stepper for one model and configuration. Caches the Picard operator.
pub struct Stepper<'a> {
    model: &'a ShallowWater,
    cfg: StepConfig,
    h_ref: f64,
    picard: Option<Factorization>,
}

impl<'a> Stepper<'a> {
    /// `h_ref` is used by the Picard operator when the configuration does
    /// not fix it.
    pub fn new(model: &'a ShallowWater, cfg: StepConfig, h_ref: f64) -> Result<Self> {
        cfg.validate()?;
        let h_ref = cfg.h_ref.unwrap_or(h_ref);
        let picard = match cfg.integrator {
            Integrator::Picard => Some(picard_operator(model, cfg.dt, h_ref)?),
            Integrator::Poisson => None,
        };
        Ok(Stepper {
            model,
            cfg,
            h_ref,
            picard,
        })
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn h_ref(&self) -> f64 {
        self.h_ref
    }

    pub fn step(&self, state: &State) -> Result<StepResult> {
        match &self.picard {
            None => newton_solve(self.model, state, &self.cfg),
            Some(op) => picard_solve(self.model, state, &self.cfg, op),
        }
    }
}

/// The constant rotating gravity-wave operator
/// `[[M1 + Δt/2 P(f), −gΔt/2 Div], [HΔt/2 Divᵀ, M2]]`.
fn picard_operator(model: &ShallowWater, dt: f64, h: f64) -> Result<Factorization> {
    let pf = assemble(
        &FormTag::PerpProj(Scalar::Qp(model.coriolis_qp())),
        model.v1(),
        model.v1(),
    )?;
    let a = model.mass1().add(&pf, 0.5 * dt);
    let b = model.div_matrix().scale(-0.5 * dt * model.g());
    let c = model.div_matrix().transpose().scale(0.5 * dt * h);
    let op = SparseOp::block(&[vec![Some(&a), Some(&b)], vec![Some(&c), Some(model.mass2())]]);
    factorize(&op, false, "Picard linear operator")
}

fn newton_solve(model: &ShallowWater, state: &State, cfg: &StepConfig) -> Result<StepResult> {
    let start = Instant::now();
    let problem = StepProblem::new(model, state, cfg.dt, cfg.tau())?;
    let mut x = problem.initial_guess();
    let mut r = problem.residual(&x)?;
    let r0 = max_norm(&r);
    let tol = cfg.newton.abs_tol + cfg.newton.rel_tol * r0;
    let mut history = vec![r0];
    let mut iterations = 0;
    while max_norm(&r) > tol {
        if iterations == cfg.newton.max_iters {
            return Err(Error::NewtonDiverged { iterations, history });
        }
        let j = match cfg.newton.jacobian {
            JacobianKind::Analytic => problem.jacobian(&x)?,
            JacobianKind::FiniteDifference => problem.jacobian_fd(&x)?,
        };
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = factorize(&j, false, "Newton Jacobian")?.solve(&neg)?;
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        r = problem.residual(&x)?;
        iterations += 1;
        let rn = max_norm(&r);
        history.push(rn);
        log::debug!("newton iteration {iterations}: residual {rn:.3e}");
        if !rn.is_finite() {
            return Err(Error::NewtonDiverged { iterations, history });
        }
    }
    let new = problem.finish(state, &x)?;
    Ok(StepResult {
        state: new,
        iterations,
        residual_history: history,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn picard_solve(model: &ShallowWater, state: &State, cfg: &StepConfig, op: &Factorization) -> Result<StepResult> {
    let start = Instant::now();
    let problem = StepProblem::new(model, state, cfg.dt, cfg.tau())?;
    let [n1, n2, _, _] = problem.block_sizes();
    let mut u = state.u.coeffs().to_vec();
    let mut d = state.d.coeffs().to_vec();
    let mut history = Vec::with_capacity(cfg.picard_iters + 1);
    let mut x = Vec::new();
    for k in 0..=cfg.picard_iters {
        let f = problem.flux_of(&u, &d)?;
        let q = problem.q_of(&u, &d, &f)?;
        x = [&u[..], &d, &f, &q].concat();
        let it = problem.iterate(&x)?;
        let r = problem.momentum_and_depth_residual(&x, &it)?;
        history.push(max_norm(&r));
        if k == cfg.picard_iters {
            break;
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let dx = op.solve(&neg)?;
        u.iter_mut().zip(&dx[..n1]).for_each(|(a, b)| *a += b);
        d.iter_mut().zip(&dx[n1..n1 + n2]).for_each(|(a, b)| *a += b);
    }
    let new = problem.finish(state, &x)?;
    Ok(StepResult {
        state: new,
        iterations: cfg.picard_iters,
        residual_history: history,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// One Newton-solved step of the energy-conserving integrator.
pub fn poisson_step(model: &ShallowWater, state: &State, cfg: &StepConfig) -> Result<StepResult> {
    cfg.validate()?;
    newton_solve(model, state, cfg)
}

/// One semi-implicit Picard step. The reference depth defaults to the mean
/// depth of `state`.
pub fn picard_step(model: &ShallowWater, state: &State, cfg: &StepConfig) -> Result<StepResult> {
    cfg.validate()?;
    let h = cfg.h_ref.unwrap_or_else(|| state.d.integral() / model.mesh().area());
    let op = picard_operator(model, cfg.dt, h)?;
    picard_solve(model, state, cfg, &op)
}
