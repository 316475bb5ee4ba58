use std::sync::Arc;

use cfswe::fem::{project, project_scalar};
use cfswe::mesh::{build_disk, build_periodic_rectangle, Mesh};
use cfswe::swe::{random_state, Coriolis, Physics, Scheme, ShallowWater, State};
use cfswe::timestepping::{picard_step, poisson_step, run, Integrator, JacobianKind, StepConfig, StepProblem};

fn physics(f0: f64) -> Physics {
    Physics {
        g: 1.0,
        coriolis: Coriolis { f0, beta: 0.0 },
    }
}

fn torus(n: usize) -> Arc<Mesh> {
    Arc::new(build_periodic_rectangle(n, n, 1.0, 1.0, true, true).unwrap())
}

fn disk(level: usize) -> Arc<Mesh> {
    Arc::new(build_disk(level).unwrap())
}

fn model(mesh: Arc<Mesh>, scheme: Scheme, k: usize) -> ShallowWater {
    ShallowWater::new(mesh, k, scheme, physics(2.0), None).unwrap()
}

/// A smooth state on the unit torus.
fn smooth_torus_state(m: &ShallowWater) -> State {
    use std::f64::consts::PI;
    let u = project(m.v1(), |x| [(2.0 * PI * x[1]).sin(), 0.5 * (2.0 * PI * x[0]).sin()]).unwrap();
    let d = project_scalar(m.v2(), |x| {
        2.0 + 0.2 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin()
    })
    .unwrap();
    m.state(u, d, 0.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// A point away from the initial guess so every Jacobian block is exercised.
fn perturbed_guess(p: &StepProblem, seed: u64) -> Vec<f64> {
    let mut x = p.initial_guess();
    let [nu, nd, _, _] = p.block_sizes();
    for (i, v) in x.iter_mut().enumerate() {
        let s = ((i as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0 - 0.5;
        // keep the depth block safely positive
        *v += if (nu..nu + nd).contains(&i) { 0.05 * s } else { 0.2 * s };
    }
    x
}

fn check_jacobian(m: &ShallowWater, state: &State, dt: f64, tau: f64) {
    let p = StepProblem::new(m, state, dt, tau).unwrap();
    let x = perturbed_guess(&p, 7);
    let ja = p.jacobian(&x).unwrap().to_dense();
    let jf = p.jacobian_fd(&x).unwrap().to_dense();
    let scale = jf.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let diff = ja
        .iter()
        .flatten()
        .zip(jf.iter().flatten())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(diff <= 1e-6 * scale, "jacobian mismatch {diff:e} (scale {scale:e})");
}

#[test]
fn analytic_jacobian_matches_finite_differences_on_torus() {
    let m = model(torus(2), Scheme::NoBoundary, 2);
    let s = random_state(&m, 3, 1.0).unwrap();
    check_jacobian(&m, &s, 0.05, 0.0);
    check_jacobian(&m, &s, 0.05, 0.05);
}

#[test]
fn analytic_jacobian_matches_finite_differences_on_disk() {
    for scheme in [Scheme::PrognosticZ, Scheme::Naive] {
        let m = model(disk(0), scheme, 2);
        let s = random_state(&m, 11, 1.0).unwrap();
        check_jacobian(&m, &s, 0.05, 0.0);
        check_jacobian(&m, &s, 0.05, 0.1);
    }
}

#[test]
fn analytic_jacobian_matches_finite_differences_for_cubic_spaces() {
    let m = model(disk(0), Scheme::PrognosticZ, 3);
    let s = random_state(&m, 5, 1.0).unwrap();
    check_jacobian(&m, &s, 0.02, 0.02);
}

fn assert_step_conserves(m: &ShallowWater, s: &State, dt: f64) {
    let cfg = StepConfig::new(dt, Integrator::Poisson);
    let c0 = m.conserved(s).unwrap();
    let r = poisson_step(m, s, &cfg).unwrap();
    let c1 = m.conserved(&r.state).unwrap();
    assert!(r.iterations >= 1 && r.iterations <= 10, "iterations {}", r.iterations);
    assert!(
        rel(c1.energy, c0.energy) < 1e-12,
        "energy {:e}",
        rel(c1.energy, c0.energy)
    );
    assert!(rel(c1.mass, c0.mass) < 1e-13);
    assert!((c1.total_pv - c0.total_pv).abs() < 1e-12 * c0.total_pv.abs().max(1.0));
    assert!((r.state.t - dt).abs() < 1e-15);
}

#[test]
fn newton_step_conserves_invariants_on_torus() {
    let m = model(torus(3), Scheme::NoBoundary, 2);
    let s = random_state(&m, 1, 2.0).unwrap();
    assert_step_conserves(&m, &s, 0.01);
}

#[test]
fn newton_step_conserves_invariants_on_disk() {
    let m = model(disk(1), Scheme::PrognosticZ, 2);
    let s = random_state(&m, 2, 2.0).unwrap();
    assert_step_conserves(&m, &s, 0.01);
}

#[test]
fn naive_step_still_conserves_energy_but_not_enstrophy() {
    let m = model(disk(1), Scheme::Naive, 2);
    let s = random_state(&m, 2, 2.0).unwrap();
    let cfg = StepConfig::new(0.01, Integrator::Poisson);
    let c0 = m.conserved(&s).unwrap();
    let c1 = m.conserved(&poisson_step(&m, &s, &cfg).unwrap().state).unwrap();
    assert!(rel(c1.energy, c0.energy) < 1e-12);
    assert!(rel(c1.enstrophy, c0.enstrophy) > 1e-9);
}

#[test]
fn enstrophy_change_per_step_is_third_order() {
    let m = model(torus(4), Scheme::NoBoundary, 2);
    let s = smooth_torus_state(&m);
    let c0 = m.conserved(&s).unwrap();
    let change = |dt: f64| {
        let r = poisson_step(&m, &s, &StepConfig::new(dt, Integrator::Poisson)).unwrap();
        (m.conserved(&r.state).unwrap().enstrophy - c0.enstrophy).abs()
    };
    let (a, b) = (change(0.02), change(0.01));
    assert!(a > 0.0 && (a / b).log2() > 2.5, "{a:e} {b:e}");
}

#[test]
fn supg_dissipates_enstrophy_and_keeps_energy() {
    let m = model(torus(3), Scheme::NoBoundary, 2);
    let s = smooth_torus_state(&m);
    let cfg = StepConfig::new(0.01, Integrator::Poisson).with_supg(None);
    let c0 = m.conserved(&s).unwrap();
    let c1 = m.conserved(&poisson_step(&m, &s, &cfg).unwrap().state).unwrap();
    assert!(rel(c1.energy, c0.energy) < 1e-12);
    assert!(c1.enstrophy < c0.enstrophy);
}

#[test]
fn finite_difference_newton_agrees_with_analytic() {
    let m = model(torus(2), Scheme::NoBoundary, 2);
    let s = random_state(&m, 9, 2.0).unwrap();
    let mut cfg = StepConfig::new(0.01, Integrator::Poisson);
    let a = poisson_step(&m, &s, &cfg).unwrap();
    cfg.newton.jacobian = JacobianKind::FiniteDifference;
    let b = poisson_step(&m, &s, &cfg).unwrap();
    for (x, y) in a.state.u.coeffs().iter().zip(b.state.u.coeffs()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn newton_converges_quadratically() {
    let m = model(disk(1), Scheme::PrognosticZ, 2);
    let s = random_state(&m, 6, 2.0).unwrap();
    let r = poisson_step(&m, &s, &StepConfig::new(0.02, Integrator::Poisson)).unwrap();
    let h = &r.residual_history;
    assert!(h.len() >= 3, "{h:?}");
    // once in the asymptotic regime the exponent of the residual roughly doubles
    let k = h.iter().position(|&v| v < 1e-3 * h[0]).unwrap_or(1).max(1);
    if k + 1 < h.len() && h[k + 1] > 1e-13 {
        assert!(h[k + 1] < 10.0 * h[k] * h[k] / h[k - 1], "{h:?}");
    }
}

#[test]
fn rest_state_is_a_fixed_point() {
    let m = model(disk(1), Scheme::PrognosticZ, 2);
    let s = m.rest_state(1.0).unwrap();
    let r = poisson_step(&m, &s, &StepConfig::new(0.1, Integrator::Poisson)).unwrap();
    assert!(r.state.u.coeffs().iter().all(|v| v.abs() < 1e-12));
    assert!(r
        .state
        .d
        .coeffs()
        .iter()
        .zip(s.d.coeffs())
        .all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn picard_conserves_mass_and_approximates_energy() {
    let m = model(torus(3), Scheme::NoBoundary, 2);
    let s = random_state(&m, 8, 2.0).unwrap();
    let mut cfg = StepConfig::new(0.005, Integrator::Picard);
    cfg.picard_iters = 16;
    let c0 = m.conserved(&s).unwrap();
    let r = picard_step(&m, &s, &cfg).unwrap();
    let c1 = m.conserved(&r.state).unwrap();
    assert!(rel(c1.mass, c0.mass) < 1e-13);
    assert!((c1.total_pv - c0.total_pv).abs() < 1e-12);
    assert!(rel(c1.energy, c0.energy) < 1e-8, "{:e}", rel(c1.energy, c0.energy));
    let h = &r.residual_history;
    assert!(h.last().unwrap() < &h[0], "{h:?}");
}

#[test]
fn run_records_every_step() {
    let m = model(disk(1), Scheme::PrognosticZ, 2);
    let s = random_state(&m, 12, 2.0).unwrap();
    let mut seen = Vec::new();
    let series = run(&m, &s, &StepConfig::new(0.01, Integrator::Poisson), 3, |n, _, _| {
        seen.push(n);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
    assert_eq!(series.records.len(), 4);
    assert!(series.max_rel_energy_error() < 1e-12);
}

#[test]
fn invalid_step_configuration_is_rejected() {
    let m = model(torus(2), Scheme::NoBoundary, 2);
    let s = m.rest_state(1.0).unwrap();
    assert!(poisson_step(&m, &s, &StepConfig::new(0.0, Integrator::Poisson)).is_err());
    assert!(poisson_step(&m, &s, &StepConfig::new(f64::NAN, Integrator::Poisson)).is_err());
}

#[test]
fn failing_step_reports_its_index() {
    let m = model(torus(2), Scheme::NoBoundary, 2);
    let s = random_state(&m, 1, 1.0).unwrap();
    let mut cfg = StepConfig::new(50.0, Integrator::Poisson);
    cfg.newton.max_iters = 1;
    match run(&m, &s, &cfg, 3, |_, _, _| Ok(())) {
        Err(cfswe::Error::StepFailed { step, .. }) => assert_eq!(step, 1),
        other => panic!("expected a step failure, got {other:?}"),
    }
}
