//! Engineering, verification and analysis of exactly separable eigenstates of
//! spin arrays with general quadratic couplings and site-dependent fields.

pub mod design;
pub mod entanglement;
pub mod geometry;
pub mod infer;
pub mod quantum;
pub mod recipes;

pub use geometry::{Angles, Mat3, Triad, Vec3};
pub use quantum::{Bond, FactorizedSystem, SiteSpec, StateVector, SystemSpec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reproducible generator used for every random-direction construction.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` directions drawn uniformly on the unit sphere.
pub fn random_angles<R: Rng>(rng: &mut R, n: usize) -> Vec<Angles> {
    (0..n)
        .map(|_| {
            let cos_theta: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            Angles::new(cos_theta.acos(), phi)
        })
        .collect()
}
