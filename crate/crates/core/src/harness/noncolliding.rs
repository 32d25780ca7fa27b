use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{phi_scores, Discriminator, MeasuringFunction};
use crate::distributions::{sample_seed, SeedVector};
use crate::error::{Error, Result};
use crate::generator::{MemorizingGenerator, SeedToImage};
use crate::partition::BlockPartition;

use crate::adversary::Batch;

/// One seed per block, in block order.
#[derive(Debug, Clone, PartialEq)]
pub struct NonCollidingSet {
    pub seeds: Vec<SeedVector>,
}

pub fn sample_noncolliding<R: Rng + ?Sized>(rng: &mut R, part: &BlockPartition) -> Result<NonCollidingSet> {
    let seeds = (1..=part.m())
        .map(|block| part.sample_within_block(rng, block))
        .collect::<Result<_>>()?;
    Ok(NonCollidingSet { seeds })
}

/// Mean of `φ(D(G(z), z))` over the seeds of a set.
pub fn set_mean<G: SeedToImage + ?Sized>(
    d: &Discriminator,
    gen: &G,
    set: &NonCollidingSet,
    mf: &MeasuringFunction,
) -> Result<f64> {
    let mut batch = Batch::default();
    for z in &set.seeds {
        batch.push_fake(&gen.generate(z)?, z);
    }
    let scores = phi_scores(d, &batch.fake, mf)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub stratified_mean: f64,
    pub stratified_std_err: f64,
    pub direct_mean: f64,
    pub direct_std_err: f64,
    pub combined_std_err: f64,
    /// `(stratified - direct) / combined_std_err`, 0 when both are exact.
    pub z_score: f64,
    pub n_sets: usize,
    pub n_direct: usize,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Compares the average over non-colliding sets of the per-set mean with a
/// direct Monte-Carlo mean over `z ~ N(0, σ² I)`.
pub fn check_noncolliding_identity<R: Rng + ?Sized>(
    d: &Discriminator,
    gen: &MemorizingGenerator,
    n_sets: usize,
    n_direct: usize,
    rng: &mut R,
    mf: &MeasuringFunction,
) -> Result<IdentityCheck> {
    if n_sets < 100 || n_direct < 100 {
        return Err(Error::Precondition(format!(
            "identity check needs at least 100 sets and 100 direct draws, got {n_sets} and {n_direct}"
        )));
    }
    let per_set = (0..n_sets)
        .map(|_| set_mean(d, gen, &sample_noncolliding(rng, gen.partition())?, mf))
        .collect::<Result<Vec<_>>>()?;
    let mut direct = Batch::default();
    for _ in 0..n_direct {
        let z = sample_seed(rng, gen.spec());
        direct.push_fake(&gen.generate(&z)?, &z);
    }
    let direct_scores = phi_scores(d, &direct.fake, mf)?;
    let (stratified_mean, stratified_std_err) = mean_and_se(&per_set);
    let (direct_mean, direct_std_err) = mean_and_se(&direct_scores);
    let combined_std_err = stratified_std_err.hypot(direct_std_err);
    let diff = stratified_mean - direct_mean;
    let z_score = if combined_std_err > 0.0 { diff / combined_std_err } else { 0.0 };
    Ok(IdentityCheck {
        stratified_mean,
        stratified_std_err,
        direct_mean,
        direct_std_err,
        combined_std_err,
        z_score,
        n_sets,
        n_direct,
    })
}
