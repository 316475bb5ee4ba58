//! Bilinear and linear forms of the shallow water discretization.
//!
//! All volume integrals use the quadrature rule shared by the spaces
//! involved; boundary integrals use Gauss-Legendre points on each facet.

use std::borrow::Cow;

use rayon::prelude::*;

use super::sparse::SparseOp;
use crate::fem::{gauss_legendre, Family, Field, FunctionSpace};
use crate::{Error, Result};

/// Scalar coefficient sampled at the volume quadrature points.
#[derive(Clone, Copy, Debug)]
pub enum Scalar<'a> {
    Const(f64),
    Field(&'a Field),
    /// Values at every quadrature point, `[cell][point]`.
    Qp(&'a [f64]),
}

/// Vector coefficient sampled at the volume quadrature points.
#[derive(Clone, Copy, Debug)]
pub enum Vector<'a> {
    Const([f64; 2]),
    Field(&'a Field),
    Qp(&'a [[f64; 2]]),
}

impl Scalar<'_> {
    pub fn resolve(&self, n: usize) -> Result<Cow<'_, [f64]>> {
        let v: Cow<'_, [f64]> = match self {
            Scalar::Const(c) => Cow::Owned(vec![*c; n]),
            Scalar::Field(f) => Cow::Owned(f.qp_scalar()),
            Scalar::Qp(v) => Cow::Borrowed(v),
        };
        check_len(v.len(), n)?;
        Ok(v)
    }
}

impl Vector<'_> {
    pub fn resolve(&self, n: usize) -> Result<Cow<'_, [[f64; 2]]>> {
        let v: Cow<'_, [[f64; 2]]> = match self {
            Vector::Const(c) => Cow::Owned(vec![*c; n]),
            Vector::Field(f) => Cow::Owned(f.qp_values()),
            Vector::Qp(v) => Cow::Borrowed(v),
        };
        check_len(v.len(), n)?;
        Ok(v)
    }
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got,
            context: "quadrature-point coefficient data".into(),
        })
    }
}

/// Pairings of the discretization. Test space first, trial space second.
#[derive(Clone, Copy, Debug)]
pub enum FormTag<'a> {
    /// `⟨v, u⟩` on one space.
    Mass,
    /// `⟨∇·w, φ⟩`, test in BDM, trial discontinuous.
    Div,
    /// `⟨∇⊥γ, u⟩`, test Lagrange, trial BDM.
    Curl,
    /// `⟨w, q̂ v⊥⟩` on BDM.
    PerpProj(Scalar<'a>),
    /// `⟨∇γ, q̂ F⟩`, test Lagrange, trial BDM.
    GradScalar(Scalar<'a>),
    /// `⟨γ, D̂ q⟩` on one scalar or vector space.
    WeightedMass(Scalar<'a>),
    /// Boundary pairing `⟪γ, n⊥·u⟫`, test Lagrange, trial BDM.
    BoundaryTangent,
}

/// Basis data of one function at one quadrature point: value, and gradient
/// (scalar spaces) or `[div, 0]` (BDM).
#[derive(Clone, Copy, Debug)]
pub struct BasisEval {
    pub val: [f64; 2],
    pub der: [f64; 2],
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn perp(a: [f64; 2]) -> [f64; 2] {
    [-a[1], a[0]]
}

fn expect_families(tag: &str, test: &FunctionSpace, trial: &FunctionSpace, want: (Family, Family)) -> Result<()> {
    if (test.family(), trial.family()) == want {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{tag} pairs {:?} x {:?}, got {:?} x {:?}",
            want.0,
            want.1,
            test.family(),
            trial.family()
        )))
    }
}

/// Assembles a bilinear form. Rows and columns of DOFs eliminated by
/// restricted spaces are dropped.
pub fn assemble(tag: &FormTag<'_>, test: &FunctionSpace, trial: &FunctionSpace) -> Result<SparseOp> {
    test.check_compatible(trial, "bilinear form arguments")?;
    let nqp = test.mesh().num_cells() * test.num_qp();
    match tag {
        FormTag::Mass => {
            if test.family() != trial.family() {
                return Err(Error::InvalidArgument("mass matrix needs one family".into()));
            }
            assemble_with(test, trial, |_, t, s| dot(t.val, s.val))
        }
        FormTag::Div => {
            expect_families("Div", test, trial, (Family::Bdm, Family::DiscontinuousLagrange))?;
            assemble_with(test, trial, |_, t, s| t.der[0] * s.val[0])
        }
        FormTag::Curl => {
            expect_families("Curl", test, trial, (Family::Lagrange, Family::Bdm))?;
            assemble_with(test, trial, |_, t, s| dot(perp(t.der), s.val))
        }
        FormTag::PerpProj(q) => {
            expect_families("PerpProj", test, trial, (Family::Bdm, Family::Bdm))?;
            let q = q.resolve(nqp)?;
            assemble_with(test, trial, |k, t, s| q[k] * dot(t.val, perp(s.val)))
        }
        FormTag::GradScalar(q) => {
            expect_families("GradScalar", test, trial, (Family::Lagrange, Family::Bdm))?;
            let q = q.resolve(nqp)?;
            assemble_with(test, trial, |k, t, s| q[k] * dot(t.der, s.val))
        }
        FormTag::WeightedMass(d) => {
            if test.family() != trial.family() {
                return Err(Error::InvalidArgument("weighted mass matrix needs one family".into()));
            }
            let d = d.resolve(nqp)?;
            assemble_with(test, trial, |k, t, s| d[k] * dot(t.val, s.val))
        }
        FormTag::BoundaryTangent => {
            expect_families("BoundaryTangent", test, trial, (Family::Lagrange, Family::Bdm))?;
            Ok(boundary_tangent(test, trial))
        }
    }
}

/// Assembles `Σ_cells Σ_qp w · kernel(qp, test_i, trial_j)` where `qp` is the
/// global quadrature index `cell * nq + point`.
///
/// Cells are processed in parallel but contributions are summed in a fixed
/// order, so the result does not depend on the thread count.
pub fn assemble_with<K>(test: &FunctionSpace, trial: &FunctionSpace, kernel: K) -> Result<SparseOp>
where
    K: Fn(usize, BasisEval, BasisEval) -> f64 + Sync,
{
    test.check_compatible(trial, "bilinear form arguments")?;
    let nq = test.num_qp();
    let (nt, ns) = (test.local_dim(), trial.local_dim());
    let locals: Vec<Vec<(usize, usize, f64)>> = (0..test.mesh().num_cells())
        .into_par_iter()
        .map(|c| {
            let mut local = vec![0.0; nt * ns];
            for p in 0..nq {
                let w = test.jxw(c, p);
                let k = c * nq + p;
                let (tv, td) = (test.values(c, p), test.derivs(c, p));
                let (sv, sd) = (trial.values(c, p), trial.derivs(c, p));
                for i in 0..nt {
                    let t = BasisEval { val: tv[i], der: td[i] };
                    for j in 0..ns {
                        local[i * ns + j] += w * kernel(k, t, BasisEval { val: sv[j], der: sd[j] });
                    }
                }
            }
            let mut out = Vec::with_capacity(nt * ns);
            for (i, ri) in test.cell_dofs(c).iter().enumerate() {
                let Some(ri) = ri else { continue };
                for (j, cj) in trial.cell_dofs(c).iter().enumerate() {
                    if let Some(cj) = cj {
                        out.push((*ri, *cj, local[i * ns + j]));
                    }
                }
            }
            out
        })
        .collect();
    let triplets: Vec<(usize, usize, f64)> = locals.into_iter().flatten().collect();
    Ok(SparseOp::from_triplets(test.dim(), trial.dim(), &triplets))
}

/// Assembles the vector `Σ_qp w · kernel(qp, test_i)`.
pub fn assemble_vector_with<K>(test: &FunctionSpace, kernel: K) -> Vec<f64>
where
    K: Fn(usize, BasisEval) -> f64 + Sync,
{
    let nq = test.num_qp();
    let nt = test.local_dim();
    let locals: Vec<Vec<f64>> = (0..test.mesh().num_cells())
        .into_par_iter()
        .map(|c| {
            let mut local = vec![0.0; nt];
            for p in 0..nq {
                let w = test.jxw(c, p);
                let k = c * nq + p;
                let (tv, td) = (test.values(c, p), test.derivs(c, p));
                for i in 0..nt {
                    local[i] += w * kernel(k, BasisEval { val: tv[i], der: td[i] });
                }
            }
            local
        })
        .collect();
    let mut b = vec![0.0; test.dim()];
    for (c, local) in locals.iter().enumerate() {
        for (d, v) in test.cell_dofs(c).iter().zip(local) {
            if let Some(d) = d {
                b[*d] += v;
            }
        }
    }
    b
}

/// Linear forms evaluated at given coefficients.
#[derive(Clone, Copy, Debug)]
pub enum LinearForm<'a> {
    /// `⟨w, q F⊥⟩` over BDM.
    PerpFlux { q: Scalar<'a>, flux: Vector<'a> },
    /// `⟨∇·w, b⟩` over BDM.
    DivScalar(Scalar<'a>),
    /// `⟨∇γ, q F⟩` over Lagrange.
    GradFlux { q: Scalar<'a>, flux: Vector<'a> },
    /// `⟨v, f⟩` for a scalar coefficient.
    Source(Scalar<'a>),
    /// `⟨w, a⟩` for a vector coefficient.
    VectorSource(Vector<'a>),
}

pub fn assemble_vector(form: &LinearForm<'_>, test: &FunctionSpace) -> Result<Vec<f64>> {
    let nqp = test.mesh().num_cells() * test.num_qp();
    let want = |f: Family, name: &str| {
        if test.family() == f {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{name} needs a {f:?} test space, got {:?}",
                test.family()
            )))
        }
    };
    Ok(match form {
        LinearForm::PerpFlux { q, flux } => {
            want(Family::Bdm, "PerpFlux")?;
            let (q, f) = (q.resolve(nqp)?, flux.resolve(nqp)?);
            assemble_vector_with(test, |k, t| q[k] * dot(t.val, perp(f[k])))
        }
        LinearForm::DivScalar(b) => {
            want(Family::Bdm, "DivScalar")?;
            let b = b.resolve(nqp)?;
            assemble_vector_with(test, |k, t| t.der[0] * b[k])
        }
        LinearForm::GradFlux { q, flux } => {
            want(Family::Lagrange, "GradFlux")?;
            let (q, f) = (q.resolve(nqp)?, flux.resolve(nqp)?);
            assemble_vector_with(test, |k, t| q[k] * dot(t.der, f[k]))
        }
        LinearForm::Source(s) => {
            if test.is_vector() {
                return Err(Error::InvalidArgument("scalar source needs a scalar test space".into()));
            }
            let s = s.resolve(nqp)?;
            assemble_vector_with(test, |k, t| t.val[0] * s[k])
        }
        LinearForm::VectorSource(a) => {
            want(Family::Bdm, "VectorSource")?;
            let a = a.resolve(nqp)?;
            assemble_vector_with(test, |k, t| dot(t.val, a[k]))
        }
    })
}

fn boundary_tangent(test: &FunctionSpace, trial: &FunctionSpace) -> SparseOp {
    let mesh = test.mesh();
    let (s, w) = gauss_legendre(test.rule().degree() / 2 + 1);
    const RV: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut triplets = Vec::new();
    for f in mesh.boundary_facets() {
        let (a, b) = (RV[(f.local_edge + 1) % 3], RV[(f.local_edge + 2) % 3]);
        let pts: Vec<[f64; 2]> = s
            .iter()
            .map(|&s| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
            .collect();
        let len = mesh.edges()[f.edge].length();
        let np = perp(f.normal);
        let (tv, _) = test.tabulate_cell(f.cell, &pts);
        let (sv, _) = trial.tabulate_cell(f.cell, &pts);
        let (nt, ns) = (test.local_dim(), trial.local_dim());
        for (i, ri) in test.cell_dofs(f.cell).iter().enumerate() {
            let Some(ri) = ri else { continue };
            for (j, cj) in trial.cell_dofs(f.cell).iter().enumerate() {
                let Some(cj) = cj else { continue };
                let v: f64 = (0..pts.len())
                    .map(|p| w[p] * len * tv[p * nt + i][0] * dot(np, sv[p * ns + j]))
                    .sum();
                triplets.push((*ri, *cj, v));
            }
        }
    }
    SparseOp::from_triplets(test.dim(), trial.dim(), &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::solve;
    use crate::fem::{build_space, interpolate, project, quadrature_rule};
    use crate::mesh::{build_disk, build_periodic_rectangle, Mesh};
    use std::sync::Arc;

    struct Spaces {
        v0: Arc<FunctionSpace>,
        v0r: Arc<FunctionSpace>,
        v1: Arc<FunctionSpace>,
        v1r: Arc<FunctionSpace>,
        v2: Arc<FunctionSpace>,
    }

    fn spaces(mesh: Mesh) -> Spaces {
        let mesh = Arc::new(mesh);
        let rule = quadrature_rule(6).unwrap();
        let b = |f, d, r| Arc::new(build_space(mesh.clone(), f, d, r, &rule).unwrap());
        Spaces {
            v0: b(Family::Lagrange, 2, false),
            v0r: b(Family::Lagrange, 2, true),
            v1: b(Family::Bdm, 1, false),
            v1r: b(Family::Bdm, 1, true),
            v2: b(Family::DiscontinuousLagrange, 0, false),
        }
    }

    #[test]
    fn dg0_mass_is_cell_areas() {
        let s = spaces(build_disk(2).unwrap());
        let m = assemble(&FormTag::Mass, &s.v2, &s.v2).unwrap();
        let mesh = s.v2.mesh();
        assert_eq!(m.nnz(), mesh.num_cells());
        for c in 0..mesh.num_cells() {
            assert!((m.get(c, c) - mesh.cell_area(c)).abs() < 1e-15);
        }
        let x = solve(
            &m,
            &(0..mesh.num_cells()).map(|c| mesh.cell_area(c)).collect::<Vec<_>>(),
            true,
        )
        .unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn curl_of_compact_support_against_constant() {
        let s = spaces(build_disk(2).unwrap());
        let c = assemble(&FormTag::Curl, &s.v0r, &s.v1).unwrap();
        let one = project(&s.v1, |_| [1.0, 0.0]).unwrap();
        for v in c.matvec(one.coeffs()) {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_tangent_empty_on_torus() {
        let s = spaces(build_periodic_rectangle(3, 3, 1.0, 1.0, true, true).unwrap());
        let t = assemble(&FormTag::BoundaryTangent, &s.v0, &s.v1).unwrap();
        assert_eq!(t.nnz(), 0);
    }

    #[test]
    fn unit_weight_is_mass() {
        let s = spaces(build_disk(1).unwrap());
        let m = assemble(&FormTag::Mass, &s.v0, &s.v0).unwrap();
        let w = assemble(&FormTag::WeightedMass(Scalar::Const(1.0)), &s.v0, &s.v0).unwrap();
        assert_eq!(m, w);
    }

    #[test]
    fn perp_proj_is_antisymmetric() {
        let s = spaces(build_disk(2).unwrap());
        let q = interpolate(&s.v0, |x| 1.0 + x[0] * x[1] + x[1].sin()).unwrap();
        let p = assemble(&FormTag::PerpProj(Scalar::Field(&q)), &s.v1r, &s.v1r).unwrap();
        assert!(p.symmetry_defect(-1.0) <= 1e-12 * p.max_abs());
    }

    #[test]
    fn mass_matrices_are_symmetric() {
        let s = spaces(build_disk(2).unwrap());
        for sp in [&s.v0, &s.v1, &s.v2] {
            let m = assemble(&FormTag::Mass, sp, sp).unwrap();
            assert!(m.symmetry_defect(1.0) <= 1e-13 * m.max_abs());
        }
    }

    #[test]
    fn div_adjointness() {
        let s = spaces(build_disk(1).unwrap());
        let div = assemble(&FormTag::Div, &s.v1r, &s.v2).unwrap();
        let w: Vec<f64> = (0..s.v1r.dim()).map(|i| (i as f64).sin()).collect();
        let phi: Vec<f64> = (0..s.v2.dim()).map(|i| (i as f64 * 0.3).cos()).collect();
        let a: f64 = div.matvec(&phi).iter().zip(&w).map(|(x, y)| x * y).sum();
        let b: f64 = div.transpose().matvec(&w).iter().zip(&phi).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn restriction_consistency() {
        let s = spaces(build_disk(1).unwrap());
        let full = assemble(&FormTag::Curl, &s.v0, &s.v1).unwrap();
        let restricted = assemble(&FormTag::Curl, &s.v0r, &s.v1r).unwrap();
        let rows: Vec<usize> = (0..s.v0r.dim()).map(|r| s.v0r.full_index(r)).collect();
        let cols: Vec<usize> = (0..s.v1r.dim()).map(|r| s.v1r.full_index(r)).collect();
        assert_eq!(full.select(&rows, &cols), restricted);
    }

    #[test]
    fn zero_flux_gives_zero_vector() {
        let s = spaces(build_disk(1).unwrap());
        let b = assemble_vector(
            &LinearForm::PerpFlux {
                q: Scalar::Const(2.0),
                flux: Vector::Const([0.0, 0.0]),
            },
            &s.v1r,
        )
        .unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_slip_fields_integrates_to_zero() {
        let s = spaces(build_disk(2).unwrap());
        let b = assemble_vector(&LinearForm::DivScalar(Scalar::Const(3.0)), &s.v1r).unwrap();
        assert!(b.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn grad_flux_integration_by_parts() {
        let s = spaces(build_disk(2).unwrap());
        let f = project(&s.v1r, |x| [x[1] * (1.0 - x[0] * x[0]), x[0].cos()]).unwrap();
        let g = assemble_vector(
            &LinearForm::GradFlux {
                q: Scalar::Const(1.0),
                flux: Vector::Field(&f),
            },
            &s.v0,
        )
        .unwrap();
        let divf: Vec<f64> = f.qp_derivs().iter().map(|d| d[0]).collect();
        let h = assemble_vector(&LinearForm::Source(Scalar::Qp(&divf)), &s.v0).unwrap();
        for (a, b) in g.iter().zip(&h) {
            assert!((a + b).abs() < 1e-13);
        }
    }

    #[test]
    fn wrong_spaces_rejected() {
        let s = spaces(build_disk(0).unwrap());
        assert!(assemble(&FormTag::Div, &s.v0, &s.v2).is_err());
        assert!(assemble(&FormTag::Mass, &s.v0, &s.v1).is_err());
    }

    #[test]
    fn boundary_tangent_measures_circulation() {
        // ⟪1, n⊥·u⟫ is the circulation of u around the boundary
        let s = spaces(build_disk(2).unwrap());
        let t = assemble(&FormTag::BoundaryTangent, &s.v0, &s.v1).unwrap();
        let u = project(&s.v1, |x| [-x[1], x[0]]).unwrap();
        let ones = vec![1.0; s.v0.dim()];
        let circ: f64 = t.matvec(u.coeffs()).iter().zip(&ones).map(|(a, b)| a * b).sum();
        // polygon: 2 * area
        assert!((circ - 2.0 * s.v0.mesh().area()).abs() < 1e-12);
    }
}
