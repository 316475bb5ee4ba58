use std::sync::Arc;

use super::space::FunctionSpace;
use crate::assembly::{assemble, factorize, FormTag};
use crate::{Error, Result};

/// A finite element function: coefficients over the (possibly restricted)
/// numbering of a space.
#[derive(Clone, Debug)]
pub struct Field {
    space: Arc<FunctionSpace>,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn new(space: Arc<FunctionSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: coeffs.len(),
                context: "field coefficients".into(),
            });
        }
        Ok(Field { space, coeffs })
    }

    pub fn zeros(space: Arc<FunctionSpace>) -> Self {
        let n = space.dim();
        Field {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Local coefficient of each basis function of `cell` (zero for
    /// eliminated DOFs).
    pub fn cell_coeffs(&self, cell: usize) -> Vec<f64> {
        self.space
            .cell_dofs(cell)
            .iter()
            .map(|d| d.map_or(0.0, |d| self.coeffs[d]))
            .collect()
    }

    /// Values at every quadrature point, flattened as `[cell][point]`.
    /// Scalar fields use component 0.
    pub fn qp_values(&self) -> Vec<[f64; 2]> {
        self.qp_sum(FunctionSpace::values)
    }

    /// Gradients (scalar spaces) or `[div, 0]` (BDM) at every quadrature point.
    pub fn qp_derivs(&self) -> Vec<[f64; 2]> {
        self.qp_sum(FunctionSpace::derivs)
    }

    /// Scalar values at every quadrature point.
    pub fn qp_scalar(&self) -> Vec<f64> {
        self.qp_values().into_iter().map(|v| v[0]).collect()
    }

    fn qp_sum(&self, table: impl Fn(&FunctionSpace, usize, usize) -> &[[f64; 2]]) -> Vec<[f64; 2]> {
        let s = &self.space;
        let mut out = Vec::with_capacity(s.mesh().num_cells() * s.num_qp());
        for c in 0..s.mesh().num_cells() {
            let local = self.cell_coeffs(c);
            for p in 0..s.num_qp() {
                let mut v = [0.0; 2];
                for (a, b) in local.iter().zip(table(s, c, p)) {
                    v[0] += a * b[0];
                    v[1] += a * b[1];
                }
                out.push(v);
            }
        }
        out
    }

    /// Physical values at reference points of `cell`.
    pub fn evaluate(&self, cell: usize, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        let nc = self.space.mesh().num_cells();
        if cell >= nc {
            return Err(Error::InvalidArgument(format!(
                "cell {cell} out of range (mesh has {nc} cells)"
            )));
        }
        let (values, _) = self.space.tabulate_cell(cell, points);
        let local = self.cell_coeffs(cell);
        let n = local.len();
        Ok((0..points.len())
            .map(|p| {
                let mut v = [0.0; 2];
                for (a, b) in local.iter().zip(&values[p * n..(p + 1) * n]) {
                    v[0] += a * b[0];
                    v[1] += a * b[1];
                }
                v
            })
            .collect())
    }

    /// Integral of a scalar field.
    pub fn integral(&self) -> f64 {
        self.qp_scalar()
            .iter()
            .zip(self.space.jxw_all())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// L2 norm of the difference to a pointwise function.
    pub fn l2_error(&self, exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
        let vals = self.qp_values();
        let s = &self.space;
        vals.iter()
            .zip(s.qpoints())
            .zip(s.jxw_all())
            .map(|((v, &x), w)| {
                let e = exact(x);
                let (dx, dy) = (v[0] - e[0], if s.is_vector() { v[1] - e[1] } else { 0.0 });
                w * (dx * dx + dy * dy)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Load vector `⟨v, f⟩` of a pointwise function against every basis
/// function of `space`. Scalar spaces read component 0 of `f`.
pub fn load_vector(space: &FunctionSpace, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let mut b = vec![0.0; space.dim()];
    for c in 0..space.mesh().num_cells() {
        let dofs = space.cell_dofs(c);
        for p in 0..space.num_qp() {
            let fx = f(space.qpoint(c, p));
            let w = space.jxw(c, p);
            for (d, v) in dofs.iter().zip(space.values(c, p)) {
                if let Some(d) = d {
                    b[*d] += w * (v[0] * fx[0] + v[1] * fx[1]);
                }
            }
        }
    }
    b
}

/// Global L2 projection of a pointwise function into `space`.
pub fn project(space: &Arc<FunctionSpace>, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Field> {
    let b = load_vector(space, f);
    let mass = assemble(&FormTag::Mass, space, space)?;
    let x = factorize(&mass, true, "L2 projection mass matrix")?.solve(&b)?;
    Field::new(space.clone(), x)
}

/// Scalar convenience wrapper of [`project`].
pub fn project_scalar(space: &Arc<FunctionSpace>, f: impl Fn([f64; 2]) -> f64) -> Result<Field> {
    project(space, |x| [f(x), 0.0])
}

/// Nodal interpolation into a Lagrange or discontinuous Lagrange space.
pub fn interpolate(space: &Arc<FunctionSpace>, f: impl Fn([f64; 2]) -> f64) -> Result<Field> {
    use super::reference::Family;
    if space.family() == Family::Bdm {
        return Err(Error::Unsupported("nodal interpolation into BDM".into()));
    }
    let nodes = super::reference::nodal_points(space.family(), space.degree());
    let mut coeffs = vec![0.0; space.dim()];
    let mesh = space.mesh();
    for c in 0..mesh.num_cells() {
        for (d, &xi) in space.cell_dofs(c).iter().zip(&nodes) {
            if let Some(d) = d {
                coeffs[*d] = f(mesh.map_point(c, xi));
            }
        }
    }
    Field::new(space.clone(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_space, quadrature_rule, Family};
    use crate::mesh::{build_disk, build_periodic_rectangle, Mesh};
    use std::f64::consts::PI;

    fn space(mesh: &Arc<Mesh>, family: Family, degree: usize, restricted: bool) -> Arc<FunctionSpace> {
        Arc::new(build_space(mesh.clone(), family, degree, restricted, &quadrature_rule(6).unwrap()).unwrap())
    }

    #[test]
    fn constant_dg0_field() {
        let mesh = Arc::new(build_disk(1).unwrap());
        let v2 = space(&mesh, Family::DiscontinuousLagrange, 0, false);
        let f = project_scalar(&v2, |_| 3.5).unwrap();
        assert!(f.coeffs().iter().all(|&c| (c - 3.5).abs() < 1e-13));
        let one = Field::new(v2.clone(), vec![1.0; v2.dim()]).unwrap();
        for v in one.evaluate(4, &[[0.2, 0.3], [0.0, 0.0]]).unwrap() {
            assert_eq!(v[0], 1.0);
        }
    }

    #[test]
    fn lagrange_reproduces_affine() {
        let mesh = Arc::new(build_disk(2).unwrap());
        let v0 = space(&mesh, Family::Lagrange, 2, false);
        let f = interpolate(&v0, |x| x[0] + x[1]).unwrap();
        for c in 0..mesh.num_cells() {
            let v = f.evaluate(c, &[[1.0 / 3.0, 1.0 / 3.0]]).unwrap()[0][0];
            let x = mesh.cell_centroid(c);
            assert!((v - x[0] - x[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_vector_is_exact_in_bdm() {
        let mesh = Arc::new(build_periodic_rectangle(3, 3, 1.0, 1.0, true, true).unwrap());
        let v1 = space(&mesh, Family::Bdm, 1, false);
        let u = project(&v1, |_| [1.0, 0.0]).unwrap();
        assert!(u.l2_error(|_| [1.0, 0.0]) < 1e-12);
    }

    #[test]
    fn evaluate_rejects_bad_cell() {
        let mesh = Arc::new(build_disk(0).unwrap());
        let v2 = space(&mesh, Family::DiscontinuousLagrange, 0, false);
        assert!(Field::zeros(v2).evaluate(6, &[[0.1, 0.1]]).is_err());
    }

    #[test]
    fn p2_projection_converges_cubically() {
        let errs: Vec<f64> = [8, 16]
            .iter()
            .map(|&n| {
                let mesh = Arc::new(build_periodic_rectangle(n, n, 1.0, 1.0, true, true).unwrap());
                let v0 = space(&mesh, Family::Lagrange, 2, false);
                let f = project_scalar(&v0, |x| (2.0 * PI * x[0]).sin()).unwrap();
                f.l2_error(|x| [(2.0 * PI * x[0]).sin(), 0.0])
            })
            .collect();
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 2.8, "rate {rate}");
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        let mesh = Arc::new(build_disk(1).unwrap());
        let v1 = space(&mesh, Family::Bdm, 1, true);
        let g = |x: [f64; 2]| [x[1] * x[1], (3.0 * x[0]).sin()];
        let u = project(&v1, g).unwrap();
        let mass = assemble(&FormTag::Mass, &v1, &v1).unwrap();
        let mu = mass.matvec(u.coeffs());
        let b = load_vector(&v1, g);
        for (a, b) in mu.iter().zip(&b) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
