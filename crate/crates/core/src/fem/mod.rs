//! Reference elements, quadrature, function spaces and fields for the
//! compatible triple `CG_k -> BDM_{k-1} -> DG_{k-2}`.

mod field;
mod poly;
mod quadrature;
mod reference;
mod space;

pub use field::{interpolate, load_vector, project, project_scalar, Field};
pub use quadrature::{gauss_legendre, quadrature_rule, QuadratureRule, MAX_QUADRATURE_DEGREE};
pub use reference::{build_reference, nodal_points, Entity, Family, LocalDof, ReferenceElement, Tabulation};
pub use space::{build_space, FunctionSpace};
