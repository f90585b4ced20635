//! Random finite-support sibling-pair instances.

use gsfe_core::oracle::DiscreteInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probabilities on `k` points summing to one; the last absorbs rounding.
fn pmf(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = p[..k - 1].iter().sum();
    p[k - 1] = 1.0 - head;
    p
}

/// With `positive` the effect rises with the survival shock and the
/// treatment lowers survival, so treated survivors have larger effects.
pub fn random_discrete(seed: u64, positive: bool) -> DiscreteInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.random_range(1..=3);
    let ne = rng.random_range(2..=4);
    let nv = rng.random_range(1..=3);
    let xi: Vec<(f64, f64)> = pmf(&mut rng, nx).into_iter().map(|p| (rng.random_range(-1.0..1.0), p)).collect();
    let mut etas: Vec<f64> = (0..ne).map(|_| rng.random_range(-1.5..1.5)).collect();
    let mut betas: Vec<f64> = (0..ne).map(|_| rng.random_range(-3.0..0.0)).collect();
    if positive {
        etas.sort_by(f64::total_cmp);
        betas.sort_by(f64::total_cmp);
    }
    let eta_beta = pmf(&mut rng, ne).into_iter().enumerate().map(|(i, p)| (etas[i], betas[i], p)).collect();
    let eps = pmf(&mut rng, nv).into_iter().map(|p| (rng.random_range(-2.0..2.0), p)).collect();
    DiscreteInstance {
        p_treat: rng.random_range(0.2..0.8),
        // Everyone survives untreated at the top of the support.
        gamma0: rng.random_range(1.0..2.0),
        gamma: if positive { rng.random_range(-2.5..-0.5) } else { rng.random_range(-2.5..0.5) },
        xi,
        eta_beta,
        eps,
    }
}
