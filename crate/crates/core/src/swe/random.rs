use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ShallowWater, State};
use crate::fem::Field;
use crate::Result;

/// A reproducible random admissible state.
///
/// Velocity coefficients are i.i.d. uniform in `[-1, 1]`; depth is
/// `d0 (1 + r/2)` with `r` uniform in `[-1, 1]`, so `D >= d0/2`; `Z` is the
/// vorticity of `u` plus a uniform perturbation in `[-1, 1]`, so the
/// boundary part of `Z` is not tied to `u`.
pub fn random_state(model: &ShallowWater, seed: u64, d0: f64) -> Result<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect() };
    let u = Field::new(model.v1().clone(), uniform(model.v1().dim()))?;
    let d = Field::new(
        model.v2().clone(),
        uniform(model.v2().dim()).iter().map(|r| d0 * (1.0 + 0.5 * r)).collect(),
    )?;
    let mut z = model.init_z(&u)?;
    for (z, r) in z.coeffs_mut().iter_mut().zip(uniform(model.v0().dim())) {
        *z += r;
    }
    model.check_depth(&d)?;
    Ok(State { u, d, z, t: 0.0 })
}
