//! Candidate proposal mechanisms on the unit cube: uniform random, Sobol, and a
//! diagonal Gaussian mixture fitted to elite samples.

mod gmm;
mod sobol;

pub use gmm::{gmm_fit, GmmFit, GmmModel, GmmOptions};
pub use sobol::{SobolState, MAX_SOBOL_DIMENSION};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seeded stream used by every stochastic component; ChaCha8 keeps sequences identical across platforms.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent `U[0, 1)` coordinates.
pub fn uniform_sample<R: Rng + ?Sized>(rng: &mut R, dimension: usize) -> Result<Vec<f64>> {
    if dimension == 0 {
        return Err(Error::Sampling("dimension must be >= 1".into()));
    }
    Ok((0..dimension).map(|_| rng.random::<f64>()).collect())
}
