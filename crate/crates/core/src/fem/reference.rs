//! Reference elements of the compatible triple: continuous Lagrange,
//! Brezzi-Douglas-Marini and discontinuous Lagrange on the unit triangle
//! with vertices `(0,0)`, `(1,0)`, `(0,1)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::poly::{eval_monomials, monomial_exponents, shifted_legendre};
use super::quadrature::{gauss_legendre, quadrature_rule, QuadratureRule};
use crate::{Error, Result};

pub(crate) const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Lagrange,
    Bdm,
    DiscontinuousLagrange,
}

impl Family {
    pub fn is_vector(self) -> bool {
        matches!(self, Family::Bdm)
    }
}

/// Topological entity a degree of freedom is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Vertex(usize),
    Edge(usize),
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalDof {
    pub entity: Entity,
    /// Position of the DOF among those on the same entity.
    pub index: usize,
}

/// Basis values and first derivatives at a set of reference points, stored
/// point-major: entry `p * ndofs + i`.
///
/// Scalar elements use component 0 only.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub npoints: usize,
    pub ndofs: usize,
    pub values: Vec<[f64; 2]>,
    /// `grads[k][c]` is the reference gradient of component `c`.
    pub grads: Vec<[[f64; 2]; 2]>,
}

impl Tabulation {
    pub fn value(&self, p: usize, i: usize) -> [f64; 2] {
        self.values[p * self.ndofs + i]
    }

    pub fn grad(&self, p: usize, i: usize) -> [f64; 2] {
        self.grads[p * self.ndofs + i][0]
    }

    pub fn div(&self, p: usize, i: usize) -> f64 {
        let g = self.grads[p * self.ndofs + i];
        g[0][0] + g[1][1]
    }
}

enum Functional {
    Point([f64; 2]),
    /// Normal moment against the shifted Legendre polynomial `order` along a
    /// local edge.
    EdgeMoment {
        edge: usize,
        order: usize,
    },
    /// Interior moment against a fixed vector polynomial (`[1,0]`, `[0,1]`, or
    /// the rotation field `[-y, x]`).
    InteriorMoment(usize),
}

#[derive(Clone, Debug)]
pub struct ReferenceElement {
    family: Family,
    degree: usize,
    dofs: Vec<LocalDof>,
    exps: Vec<(usize, usize)>,
    /// Column `k` holds the polynomial coefficients of basis function `k`.
    coeffs: DMatrix<f64>,
    rule: QuadratureRule,
    tabulation: Tabulation,
    condition: f64,
}

/// Builds a reference element and tabulates it at the points of `rule`.
///
/// Supported: Lagrange degree 1-3, BDM degree 1-2, discontinuous Lagrange
/// degree 0-1.
pub fn build_reference(family: Family, degree: usize, rule: &QuadratureRule) -> Result<ReferenceElement> {
    let supported = match family {
        Family::Lagrange => (1..=3).contains(&degree),
        Family::Bdm => (1..=2).contains(&degree),
        Family::DiscontinuousLagrange => degree <= 1,
    };
    if !supported {
        return Err(Error::Unsupported(format!("{family:?} element of degree {degree}")));
    }
    let exps = monomial_exponents(degree);
    let (dofs, functionals) = match family {
        Family::Lagrange => lagrange_dofs(degree),
        Family::DiscontinuousLagrange => dg_dofs(degree),
        Family::Bdm => bdm_dofs(degree),
    };
    let npoly = if family.is_vector() { 2 * exps.len() } else { exps.len() };
    debug_assert_eq!(npoly, dofs.len());

    let mut vandermonde = DMatrix::zeros(npoly, npoly);
    for (i, f) in functionals.iter().enumerate() {
        for j in 0..npoly {
            vandermonde[(i, j)] = apply_functional(f, &exps, family.is_vector(), j);
        }
    }
    let sv = vandermonde.clone().singular_values();
    let condition = sv.max() / sv.min();
    let coeffs = vandermonde
        .try_inverse()
        .filter(|_| condition.is_finite() && condition < 1e12)
        .ok_or_else(|| Error::InvalidArgument(format!("{family:?}{degree}: DOF functionals are not unisolvent")))?;

    let mut element = ReferenceElement {
        family,
        degree,
        dofs,
        exps,
        coeffs,
        rule: rule.clone(),
        tabulation: Tabulation {
            npoints: 0,
            ndofs: 0,
            values: vec![],
            grads: vec![],
        },
        condition,
    };
    element.tabulation = element.tabulate(&rule.reference_points());
    Ok(element)
}

fn lagrange_nodes(degree: usize) -> (Vec<LocalDof>, Vec<[f64; 2]>) {
    let mut dofs = Vec::new();
    let mut nodes = Vec::new();
    for (v, p) in REFERENCE_VERTICES.iter().enumerate() {
        dofs.push(LocalDof {
            entity: Entity::Vertex(v),
            index: 0,
        });
        nodes.push(*p);
    }
    for e in 0..3 {
        let a = REFERENCE_VERTICES[(e + 1) % 3];
        let b = REFERENCE_VERTICES[(e + 2) % 3];
        for j in 0..degree.saturating_sub(1) {
            let s = (j + 1) as f64 / degree as f64;
            dofs.push(LocalDof {
                entity: Entity::Edge(e),
                index: j,
            });
            nodes.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    let mut k = 0;
    for b in 1..degree {
        for a in 1..degree - b {
            dofs.push(LocalDof {
                entity: Entity::Interior,
                index: k,
            });
            nodes.push([a as f64 / degree as f64, b as f64 / degree as f64]);
            k += 1;
        }
    }
    (dofs, nodes)
}

/// Reference coordinates of the nodes of a nodal (Lagrange or
/// discontinuous Lagrange) element, in local DOF order.
pub fn nodal_points(family: Family, degree: usize) -> Vec<[f64; 2]> {
    match (family, degree) {
        (Family::DiscontinuousLagrange, 0) => vec![[1.0 / 3.0, 1.0 / 3.0]],
        (Family::Bdm, _) => Vec::new(),
        _ => lagrange_nodes(degree).1,
    }
}

fn lagrange_dofs(degree: usize) -> (Vec<LocalDof>, Vec<Functional>) {
    let (dofs, nodes) = lagrange_nodes(degree);
    (dofs, nodes.into_iter().map(Functional::Point).collect())
}

fn dg_dofs(degree: usize) -> (Vec<LocalDof>, Vec<Functional>) {
    let nodes = nodal_points(Family::DiscontinuousLagrange, degree);
    let dofs = (0..nodes.len())
        .map(|k| LocalDof {
            entity: Entity::Interior,
            index: k,
        })
        .collect();
    (dofs, nodes.into_iter().map(Functional::Point).collect())
}

fn bdm_dofs(degree: usize) -> (Vec<LocalDof>, Vec<Functional>) {
    let mut dofs = Vec::new();
    let mut fs = Vec::new();
    for e in 0..3 {
        for j in 0..=degree {
            dofs.push(LocalDof {
                entity: Entity::Edge(e),
                index: j,
            });
            fs.push(Functional::EdgeMoment { edge: e, order: j });
        }
    }
    if degree == 2 {
        for k in 0..3 {
            dofs.push(LocalDof {
                entity: Entity::Interior,
                index: k,
            });
            fs.push(Functional::InteriorMoment(k));
        }
    }
    (dofs, fs)
}

/// Evaluates polynomial basis member `j` (vector members are `(m_j, 0)` then
/// `(0, m_j)`).
fn poly_value(exps: &[(usize, usize)], vector: bool, j: usize, p: [f64; 2]) -> [f64; 2] {
    let vals = eval_monomials(exps, p);
    if vector {
        let n = exps.len();
        let v = vals[j % n].0;
        if j < n {
            [v, 0.0]
        } else {
            [0.0, v]
        }
    } else {
        [vals[j].0, 0.0]
    }
}

fn apply_functional(f: &Functional, exps: &[(usize, usize)], vector: bool, j: usize) -> f64 {
    match *f {
        Functional::Point(p) => poly_value(exps, vector, j, p)[0],
        Functional::EdgeMoment { edge, order } => {
            let a = REFERENCE_VERTICES[(edge + 1) % 3];
            let b = REFERENCE_VERTICES[(edge + 2) % 3];
            let t = [b[0] - a[0], b[1] - a[1]];
            // length-scaled outward normal
            let nu = [t[1], -t[0]];
            let (s, w) = gauss_legendre(8);
            s.iter()
                .zip(&w)
                .map(|(&s, &w)| {
                    let u = poly_value(exps, vector, j, [a[0] + s * t[0], a[1] + s * t[1]]);
                    w * (u[0] * nu[0] + u[1] * nu[1]) * shifted_legendre(order, s)
                })
                .sum()
        }
        Functional::InteriorMoment(k) => {
            let rule = quadrature_rule(8).expect("degree 8 rule exists");
            rule.reference_points()
                .iter()
                .zip(rule.weights())
                .map(|(&p, &w)| {
                    let u = poly_value(exps, vector, j, p);
                    let v = match k {
                        0 => [1.0, 0.0],
                        1 => [0.0, 1.0],
                        _ => [-p[1], p[0]],
                    };
                    w * (u[0] * v[0] + u[1] * v[1])
                })
                .sum()
        }
    }
}

impl ReferenceElement {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dof_count(&self) -> usize {
        self.dofs.len()
    }

    pub fn dofs(&self) -> &[LocalDof] {
        &self.dofs
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Tabulation at the quadrature points of [`Self::rule`].
    pub fn tabulation(&self) -> &Tabulation {
        &self.tabulation
    }

    /// Condition number of the DOF/polynomial Vandermonde matrix.
    pub fn vandermonde_condition(&self) -> f64 {
        self.condition
    }

    pub fn is_vector(&self) -> bool {
        self.family.is_vector()
    }

    /// Number of DOFs attached to each vertex, each edge, and the interior.
    pub fn entity_dof_counts(&self) -> [usize; 3] {
        let count = |pred: &dyn Fn(&Entity) -> bool| self.dofs.iter().filter(|d| pred(&d.entity)).count();
        [
            count(&|e| matches!(e, Entity::Vertex(0))),
            count(&|e| matches!(e, Entity::Edge(0))),
            count(&|e| matches!(e, Entity::Interior)),
        ]
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tabulation {
        let n = self.dofs.len();
        let nm = self.exps.len();
        let mut values = vec![[0.0; 2]; points.len() * n];
        let mut grads = vec![[[0.0; 2]; 2]; points.len() * n];
        for (p, &x) in points.iter().enumerate() {
            let mono = eval_monomials(&self.exps, x);
            for k in 0..n {
                let mut v = [0.0; 2];
                let mut g = [[0.0; 2]; 2];
                for (j, (mv, md)) in mono.iter().enumerate() {
                    if self.is_vector() {
                        for c in 0..2 {
                            let a = self.coeffs[(c * nm + j, k)];
                            v[c] += a * mv;
                            g[c][0] += a * md[0];
                            g[c][1] += a * md[1];
                        }
                    } else {
                        let a = self.coeffs[(j, k)];
                        v[0] += a * mv;
                        g[0][0] += a * md[0];
                        g[0][1] += a * md[1];
                    }
                }
                values[p * n + k] = v;
                grads[p * n + k] = g;
            }
        }
        Tabulation {
            npoints: points.len(),
            ndofs: n,
            values,
            grads,
        }
    }
}
