use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::{LltError, LuError};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::sparse::SparseOp;
use crate::{Error, Result};

/// Relative residual accepted after a direct solve:
/// `||Ax - b|| <= TOL * (||A|| ||x|| + ||b||)` in the max norm.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-12;

static SEQUENTIAL: Once = Once::new();

/// Factorizations run sequentially so that results are bit-reproducible.
fn force_sequential() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

#[allow(clippy::large_enum_variant)]
enum Factor {
    Cholesky(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

/// A sparse direct factorization that checks every solution it returns.
pub struct Factorization {
    op: SparseOp,
    norm: f64,
    factor: Factor,
    context: String,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.op.nrows())
            .field("context", &self.context)
            .finish()
    }
}

fn to_faer(a: &SparseOp) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(a.nrows(), a.ncols(), &t)
        .map_err(|e| Error::InvalidArgument(format!("sparse matrix conversion failed: {e:?}")))
}

/// Factorizes a square matrix. With `spd_hint` a Cholesky factorization is
/// used; a non-positive pivot is reported as an error rather than falling
/// back, since it signals a broken operator (for example a weighted mass
/// matrix with non-positive weight).
pub fn factorize(a: &SparseOp, spd_hint: bool, context: &str) -> Result<Factorization> {
    force_sequential();
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
            context: context.into(),
        });
    }
    let m = to_faer(a)?;
    let factor = if spd_hint {
        match m.sp_cholesky(Side::Lower) {
            Ok(f) => Factor::Cholesky(f),
            Err(LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index })) => {
                return Err(Error::SingularMatrix {
                    context: format!("{context} (not positive definite)"),
                    index,
                })
            }
            Err(e) => return Err(Error::InvalidArgument(format!("{context}: {e:?}"))),
        }
    } else {
        match m.sp_lu() {
            Ok(f) => Factor::Lu(f),
            Err(LuError::SymbolicSingular { index }) => {
                return Err(Error::SingularMatrix {
                    context: context.into(),
                    index,
                })
            }
            Err(e) => return Err(Error::InvalidArgument(format!("{context}: {e:?}"))),
        }
    };
    Ok(Factorization {
        norm: a.norm_inf(),
        op: a.clone(),
        factor,
        context: context.into(),
    })
}

fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.op.nrows()
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = match &self.factor {
            Factor::Cholesky(f) => f.solve(&rhs),
            Factor::Lu(f) => f.solve(&rhs),
        };
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `A x = b`, refining iteratively until the residual criterion
    /// holds.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: b.len(),
                context: self.context.clone(),
            });
        }
        let mut x = self.raw_solve(b);
        let bn = max_norm(b);
        let mut rel = f64::INFINITY;
        for _ in 0..4 {
            let ax = self.op.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let scale = self.norm * max_norm(&x) + bn;
            let rn = max_norm(&r);
            rel = if scale > 0.0 { rn / scale } else { rn };
            if !rel.is_finite() {
                break;
            }
            if rel <= SOLVE_RESIDUAL_TOL {
                return Ok(x);
            }
            let dx = self.raw_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        }
        Err(Error::SolveFailed {
            context: self.context.clone(),
            residual: rel,
        })
    }
}

/// One-shot solve of `A x = b`.
pub fn solve(a: &SparseOp, b: &[f64], spd_hint: bool) -> Result<Vec<f64>> {
    factorize(a, spd_hint, "linear system")?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let b = vec![1.0, -2.0, 3.0];
        assert_eq!(solve(&SparseOp::identity(3), &b, true).unwrap(), b);
        assert_eq!(solve(&SparseOp::identity(3), &b, false).unwrap(), b);
    }

    #[test]
    fn nonsymmetric_system() {
        let a = SparseOp::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 3.0), (2, 0, -1.0), (2, 2, 4.0)],
        );
        let x = solve(&a, &[3.0, 3.0, 3.0], false).unwrap();
        let ax = a.matvec(&x);
        for v in ax {
            assert!((v - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn indefinite_rejected_by_cholesky() {
        let a = SparseOp::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(factorize(&a, true, "t"), Err(Error::SingularMatrix { .. })));
        assert!(solve(&a, &[1.0, 1.0], false).is_ok());
    }

    #[test]
    fn singular_structure_reported() {
        let a = SparseOp::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]);
        match factorize(&a, false, "t") {
            Err(Error::SingularMatrix { .. }) | Err(Error::SolveFailed { .. }) => {}
            Ok(f) => assert!(f.solve(&[1.0, 2.0]).is_err()),
            Err(e) => panic!("unexpected {e}"),
        }
    }
}
