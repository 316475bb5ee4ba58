//! Spatial discretization of the rotating shallow water equations in
//! vector-invariant form, with the mass-weighted vorticity `Z` carried as a
//! prognostic variable so that slip boundaries keep enstrophy conserved.

mod model;
mod random;

pub use model::{ConservedSet, Coriolis, Diagnostics, Physics, Scheme, ShallowWater, State, Tendencies};
pub use random::random_state;
