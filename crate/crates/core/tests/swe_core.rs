use std::f64::consts::PI;
use std::sync::Arc;

use cfswe::driver::{setup, Config, ScenarioKind};
use cfswe::fem::{project, project_scalar, Field};
use cfswe::mesh::{build_disk, build_periodic_rectangle, Mesh};
use cfswe::swe::{random_state, Coriolis, Physics, Scheme, ShallowWater, State};

fn physics(g: f64, f0: f64) -> Physics {
    Physics {
        g,
        coriolis: Coriolis::constant(f0),
    }
}

fn torus(n: usize) -> Arc<Mesh> {
    Arc::new(build_periodic_rectangle(n, n, 1.0, 1.0, true, true).unwrap())
}

fn disk(level: usize) -> Arc<Mesh> {
    Arc::new(build_disk(level).unwrap())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn constant_depth(m: &ShallowWater, d0: f64) -> Field {
    project_scalar(m.v2(), |_| d0).unwrap()
}

/// Largest deviation of a scalar field from `exact` at quadrature points
/// within radius `r` of the origin.
fn max_error_within(q: &Field, exact: f64, r: f64) -> f64 {
    let vals = q.qp_scalar();
    q.space()
        .qpoints()
        .iter()
        .zip(&vals)
        .filter(|(x, _)| x[0].hypot(x[1]) < r)
        .fold(0.0, |a, (_, v)| a.max((v - exact).abs()))
}

#[test]
fn flux_of_rest_is_zero() {
    let m = ShallowWater::new(disk(1), 2, Scheme::PrognosticZ, physics(1.0, 1.0), None).unwrap();
    let s = m.rest_state(1.5).unwrap();
    let f = m.diagnose_flux(&s.u, &s.d).unwrap();
    assert_eq!(max_abs(f.coeffs()), 0.0);
}

#[test]
fn flux_of_constant_fields_is_exact() {
    let m = ShallowWater::new(torus(3), 2, Scheme::NoBoundary, physics(1.0, 0.0), None).unwrap();
    let u = project(m.v1(), |_| [1.0, 0.0]).unwrap();
    let f = m.diagnose_flux(&u, &constant_depth(&m, 2.0)).unwrap();
    assert!(f.l2_error(|_| [2.0, 0.0]) < 1e-12);
}

#[test]
fn flux_satisfies_its_projection_equations() {
    let cfg = Config::new(ScenarioKind::ChannelJet, 2, 0.05, 1.0);
    let s = setup(&cfg).unwrap();
    let m = &s.model;
    let f = m.diagnose_flux(&s.state.u, &s.state.d).unwrap();
    // ⟨v, F⟩ against ⟨v, uD⟩ for every basis v
    let (uq, dq) = (s.state.u.qp_values(), s.state.d.qp_scalar());
    let ud: Vec<[f64; 2]> = uq.iter().zip(&dq).map(|(u, d)| [u[0] * d, u[1] * d]).collect();
    let v1 = m.v1();
    let mut b = vec![0.0; v1.dim()];
    let nq = v1.num_qp();
    for c in 0..m.mesh().num_cells() {
        for p in 0..nq {
            let w = v1.jxw(c, p);
            for (dof, phi) in v1.cell_dofs(c).iter().zip(v1.values(c, p)) {
                if let Some(i) = dof {
                    b[*i] += w * (phi[0] * ud[c * nq + p][0] + phi[1] * ud[c * nq + p][1]);
                }
            }
        }
    }
    let mf = m.mass1().matvec(f.coeffs());
    let res: Vec<f64> = mf.iter().zip(&b).map(|(a, b)| a - b).collect();
    assert!(max_abs(&res) <= 1e-12 * max_abs(&b).max(1.0), "{:e}", max_abs(&res));
}

#[test]
fn q_of_constant_ratio() {
    let m = ShallowWater::new(torus(3), 2, Scheme::NoBoundary, physics(1.0, 0.0), None).unwrap();
    let d = constant_depth(&m, 4.0);
    let z = project_scalar(m.v0(), |_| 3.0).unwrap();
    let q = m.diagnose_q(&z, &d).unwrap();
    assert!(q.coeffs().iter().all(|v| (v - 0.75).abs() < 1e-12));
}

#[test]
fn q_at_rest_is_f_over_depth() {
    let m = ShallowWater::new(disk(2), 2, Scheme::PrognosticZ, physics(1.0, 3.0), None).unwrap();
    let s = m.rest_state(2.0).unwrap();
    let q = m.diagnostics(&s).unwrap().q;
    assert!(q.coeffs().iter().all(|v| (v - 1.5).abs() < 1e-12));
}

#[test]
fn q_rejects_negative_depth() {
    let m = ShallowWater::new(disk(1), 2, Scheme::PrognosticZ, physics(1.0, 1.0), None).unwrap();
    let d = project_scalar(m.v2(), |x| x[0]).unwrap();
    let z = project_scalar(m.v0(), |_| 1.0).unwrap();
    assert!(m.diagnose_q(&z, &d).is_err());
}

#[test]
fn solid_rotation_pv_converges_away_from_the_wall() {
    // the polygonal wall leaves an O(1) vorticity error in the first layer of
    // cells, so both diagnoses are measured inside it
    let (omega, f0, d0) = (0.5, 1.0, 1.0);
    let exact = (2.0 * omega + f0) / d0;
    let errs: Vec<(f64, f64)> = (1..=3)
        .map(|level| {
            let m = ShallowWater::new(disk(level), 2, Scheme::PrognosticZ, physics(1.0, f0), None).unwrap();
            let u = project(m.v1(), |x| [-omega * x[1], omega * x[0]]).unwrap();
            let s = m.state(u, constant_depth(&m, d0), 0.0).unwrap();
            let q = m.diagnostics(&s).unwrap().q;
            // Z̊ vanishes on the wall, so it is only compared away from it
            let ring = m.diagnose_ring_vorticity(&s.u).unwrap();
            let r = m.v0_restricted();
            let vals = ring.qp_scalar();
            let ring_err = r
                .qpoints()
                .iter()
                .zip(r.jxw_all())
                .zip(&vals)
                .filter(|((x, _), _)| x[0].hypot(x[1]) < 0.5)
                .map(|((_, w), v)| w * (v - (2.0 * omega + f0)).powi(2))
                .sum::<f64>()
                .sqrt();
            (max_error_within(&q, exact, 0.7), ring_err)
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{errs:?}");
    }
    assert!(errs[2].0 < 0.05, "{errs:?}");
}

#[test]
fn init_z_of_rest_projects_f() {
    let p = Physics {
        g: 1.0,
        coriolis: Coriolis { f0: 1.0, beta: 0.5 },
    };
    let m = ShallowWater::new(disk(1), 2, Scheme::PrognosticZ, p, None).unwrap();
    let z = m.init_z(&Field::zeros(m.v1().clone())).unwrap();
    let pf = project_scalar(m.v0(), |x| 1.0 + 0.5 * x[1]).unwrap();
    let diff: Vec<f64> = z.coeffs().iter().zip(pf.coeffs()).map(|(a, b)| a - b).collect();
    assert!(max_abs(&diff) < 1e-12);
}

#[test]
fn init_z_recovers_laplacian_on_torus() {
    let f0 = 0.7;
    let psi_lap = |x: [f64; 2]| -8.0 * PI * PI * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
    let errs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let m = ShallowWater::new(torus(n), 2, Scheme::NoBoundary, physics(1.0, f0), None).unwrap();
            // u = ∇⊥ψ = (−ψ_y, ψ_x) with ψ = sin 2πx sin 2πy
            let u = project(m.v1(), |x| {
                let (s0, c0) = (2.0 * PI * x[0]).sin_cos();
                let (s1, c1) = (2.0 * PI * x[1]).sin_cos();
                [-2.0 * PI * s0 * c1, 2.0 * PI * c0 * s1]
            })
            .unwrap();
            m.init_z(&u).unwrap().l2_error(|x| [psi_lap(x) + f0, 0.0])
        })
        .collect();
    assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
}

#[test]
fn kelvin_z_satisfies_vorticity_relation() {
    let s = setup(&Config::new(ScenarioKind::KelvinDisk, 2, 0.02, 1.0)).unwrap();
    let r = s.model.vorticity_residual(s.state.u.coeffs(), s.state.z.coeffs());
    assert!(max_abs(&r) <= 1e-11, "{:e}", max_abs(&r));
}

#[test]
fn ring_vorticity_vanishes_at_rest_without_rotation() {
    let m = ShallowWater::new(disk(1), 2, Scheme::PrognosticZ, physics(1.0, 0.0), None).unwrap();
    let z = m.diagnose_ring_vorticity(&Field::zeros(m.v1().clone())).unwrap();
    assert_eq!(max_abs(z.coeffs()), 0.0);
}

#[test]
fn ring_and_full_vorticity_agree_on_interior_rows() {
    let m = ShallowWater::new(disk(2), 2, Scheme::PrognosticZ, physics(1.0, 1.3), None).unwrap();
    let s = random_state(&m, 3, 2.0).unwrap();
    let z = m.init_z(&s.u).unwrap();
    let ring = m.diagnose_ring_vorticity(&s.u).unwrap();
    // with γ ∈ V̊0, ⟨γ, Z⟩ equals ⟨γ, Z̊⟩
    let r = m.v0_restricted();
    let mz = m.mass0().matvec(z.coeffs());
    let ring_full = r.to_full(ring.coeffs());
    let mr = m.mass0().matvec(&ring_full);
    let worst = (0..r.dim())
        .map(|i| (mz[r.full_index(i)] - mr[r.full_index(i)]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst:e}");
}

#[test]
fn conserved_at_rest() {
    let (g, f0, d0) = (9.81, 1.5, 2.0);
    let m = ShallowWater::new(torus(4), 2, Scheme::NoBoundary, physics(g, f0), None).unwrap();
    let s = m.rest_state(d0).unwrap();
    let c = m.conserved(&s).unwrap();
    let a = 1.0;
    assert!((c.energy - 0.5 * g * d0 * d0 * a).abs() < 1e-12);
    assert!((c.mass - d0 * a).abs() < 1e-12);
    assert!((c.total_pv - f0 * a).abs() < 1e-12);
    assert!((c.enstrophy - f0 * f0 * a / d0).abs() < 1e-12);
}

#[test]
fn total_pv_equals_integral_of_q_d() {
    let m = ShallowWater::new(disk(2), 2, Scheme::PrognosticZ, physics(1.0, 1.0), None).unwrap();
    let s = random_state(&m, 11, 2.0).unwrap();
    let q = m.diagnostics(&s).unwrap().q.qp_scalar();
    let d = s.d.qp_scalar();
    let qd: f64 = m.jxw().iter().enumerate().map(|(k, w)| w * q[k] * d[k]).sum();
    let c = m.conserved(&s).unwrap();
    assert!((qd - c.total_pv).abs() < 1e-12 * (1.0 + c.total_pv.abs()));
    let zq: f64 = q
        .iter()
        .zip(s.z.qp_scalar())
        .zip(m.jxw())
        .map(|((q, z), w)| w * q * z)
        .sum();
    assert!((zq - c.enstrophy).abs() < 1e-12 * c.enstrophy);
}

fn conserved_with_rule(s: &State, model: &ShallowWater, exactness: Option<usize>) -> [f64; 4] {
    let m = ShallowWater::new(model.mesh().clone(), 2, model.scheme(), *model.physics(), exactness).unwrap();
    let u = Field::new(m.v1().clone(), s.u.coeffs().to_vec()).unwrap();
    let d = Field::new(m.v2().clone(), s.d.coeffs().to_vec()).unwrap();
    let z = Field::new(m.v0().clone(), s.z.coeffs().to_vec()).unwrap();
    let c = m.conserved(&State { u, d, z, t: 0.0 }).unwrap();
    [c.energy, c.total_pv, c.enstrophy, c.mass]
}

#[test]
fn kelvin_initial_invariants_baseline() {
    let s = setup(&Config::new(ScenarioKind::KelvinDisk, 3, 0.02, 1.0)).unwrap();
    let c = s.model.conserved(&s.state).unwrap();
    let got = [c.energy, c.total_pv, c.enstrophy, c.mass];
    let oracle = conserved_with_rule(&s.state, &s.model, Some(14));
    for (a, b) in got.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12 * b.abs(), "{got:?} vs {oracle:?}");
    }
    let baseline = [KELVIN_H, KELVIN_Q, KELVIN_ZENS];
    for (a, b) in got.iter().zip(&baseline) {
        assert!((a - b).abs() <= 1e-10 * b.abs(), "{got:?} vs baseline {baseline:?}");
    }
}

const KELVIN_H: f64 = 1.5663267376019703;
const KELVIN_Q: f64 = 31.326286132812385;
const KELVIN_ZENS: f64 = 313.26297611878414;

#[test]
fn rest_state_is_steady() {
    for (mesh, scheme) in [
        (disk(2), Scheme::PrognosticZ),
        (disk(2), Scheme::Naive),
        (torus(4), Scheme::NoBoundary),
    ] {
        let m = ShallowWater::new(mesh, 2, scheme, physics(1.0, 2.0), None).unwrap();
        let t = m.tendencies(&m.rest_state(1.5).unwrap()).unwrap();
        assert!(
            max_abs(&t.u_t) < 1e-12 && max_abs(&t.d_t) < 1e-12 && max_abs(&t.z_t) < 1e-12,
            "{scheme:?}"
        );
    }
}

fn tendency_norms(m: &ShallowWater, s: &State) -> (f64, f64) {
    let t = m.tendencies(s).unwrap();
    let norm =
        |op: &cfswe::assembly::SparseOp, x: &[f64]| op.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum::<f64>().sqrt();
    (norm(m.mass1(), &t.u_t), norm(m.mass2(), &t.d_t))
}

#[test]
fn steady_states_have_vanishing_tendencies() {
    for kind in [ScenarioKind::ChannelJet, ScenarioKind::DiskSolidRotation] {
        // the polygonal disk boundary limits the decay to about h^(1/2),
        // which only shows from level 2 on
        let norms: Vec<(f64, f64)> = [2, 3, 4]
            .iter()
            .map(|&level| {
                let mut cfg = Config::new(kind, level, 0.05, 1.0);
                if kind == ScenarioKind::ChannelJet {
                    cfg.mesh.cells = Some(2 << level);
                }
                let s = setup(&cfg).unwrap();
                tendency_norms(&s.model, &s.state)
            })
            .collect();
        for w in norms.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 <= w[0].1 + 1e-14, "{kind:?}: {norms:?}");
        }
    }
}

fn random_models() -> Vec<ShallowWater> {
    let p = Physics {
        g: 1.0,
        coriolis: Coriolis { f0: 1.0, beta: 0.3 },
    };
    vec![
        ShallowWater::new(torus(4), 2, Scheme::NoBoundary, p, None).unwrap(),
        ShallowWater::new(disk(2), 2, Scheme::PrognosticZ, p, None).unwrap(),
        ShallowWater::new(disk(1), 3, Scheme::PrognosticZ, p, None).unwrap(),
    ]
}

#[test]
fn energy_and_enstrophy_rates_vanish() {
    for m in random_models() {
        for seed in 0..5 {
            let s = random_state(&m, seed, 2.0).unwrap();
            let t = m.tendencies(&s).unwrap();
            let (h, _) = m.energy_rate(&s, &t);
            let (z, zs) = m.enstrophy_rate(&t);
            let energy = m.conserved(&s).unwrap().energy;
            assert!(
                h.abs() <= 1e-10 * energy.abs().max(1.0),
                "{:?} energy rate {h:e}",
                m.scheme()
            );
            assert!(
                z.abs() <= 1e-10 * zs,
                "{:?} enstrophy rate {z:e} (scale {zs:e})",
                m.scheme()
            );
        }
    }
}

#[test]
fn naive_scheme_produces_enstrophy() {
    let m = ShallowWater::new(disk(2), 2, Scheme::Naive, physics(1.0, 1.0), None).unwrap();
    let worst = (0..5)
        .map(|seed| {
            let s = random_state(&m, seed, 2.0).unwrap();
            let t = m.tendencies(&s).unwrap();
            let (z, zs) = m.enstrophy_rate(&t);
            z.abs() / zs
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-6, "{worst:e}");
}

#[test]
fn pv_and_mass_rates_vanish() {
    for m in random_models() {
        for seed in 0..3 {
            let s = random_state(&m, seed, 2.0).unwrap();
            let t = m.tendencies(&s).unwrap();
            let (q, d) = m.pv_and_mass_rates(&t);
            let scale = max_abs(&t.z_t).max(max_abs(&t.d_t)).max(1.0);
            assert!(
                q.abs() <= 1e-12 * scale && d.abs() <= 1e-12 * scale,
                "{:?}: {q:e} {d:e}",
                m.scheme()
            );
        }
    }
}

#[test]
fn naive_scheme_conserves_mass_but_not_total_pv() {
    // the boundary circulation of u_t is not conserved by the Galerkin
    // momentum equation, and the naive Z follows it
    let m = ShallowWater::new(disk(2), 2, Scheme::Naive, physics(1.0, 1.0), None).unwrap();
    let s = random_state(&m, 0, 2.0).unwrap();
    let t = m.tendencies(&s).unwrap();
    let (q, d) = m.pv_and_mass_rates(&t);
    assert!(d.abs() <= 1e-12 * max_abs(&t.d_t).max(1.0), "{d:e}");
    assert!(q.abs() > 1e-6, "{q:e}");
}

#[test]
fn vorticity_relation_is_preserved_at_interior_nodes() {
    let p = Physics {
        g: 1.0,
        coriolis: Coriolis { f0: 1.0, beta: 0.3 },
    };
    let m = ShallowWater::new(disk(2), 2, Scheme::PrognosticZ, p, None).unwrap();
    let r = m.v0_restricted().clone();
    for seed in 0..3 {
        let s = random_state(&m, seed, 2.0).unwrap();
        let t = m.tendencies(&s).unwrap();
        // time derivative of the residual; the Coriolis load is constant
        let dr: Vec<f64> = m
            .vorticity_residual(&t.u_t, &t.z_t)
            .iter()
            .zip(m.coriolis_load())
            .map(|(a, f)| a + f)
            .collect();
        let scale = max_abs(&t.rhs_z).max(max_abs(&t.rhs_u)).max(1.0);
        let worst = (0..r.dim()).map(|i| dr[r.full_index(i)].abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-10 * scale, "{worst:e}");
    }
}

#[test]
fn non_positive_depth_is_rejected() {
    let m = ShallowWater::new(disk(1), 2, Scheme::PrognosticZ, physics(1.0, 1.0), None).unwrap();
    let u = Field::zeros(m.v1().clone());
    let d = project_scalar(m.v2(), |_| -1.0).unwrap();
    assert!(m.state(u, d, 0.0).is_err());
}
