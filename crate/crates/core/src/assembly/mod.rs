//! Sparse operators, weak forms and direct solvers.

mod forms;
mod solver;
mod sparse;

pub use forms::{
    assemble, assemble_vector, assemble_vector_with, assemble_with, perp, BasisEval, FormTag, LinearForm, Scalar,
    Vector,
};
pub use solver::{factorize, solve, Factorization, SOLVE_RESIDUAL_TOL};
pub use sparse::SparseOp;
