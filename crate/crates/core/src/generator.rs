//! The memorizing generator `G(z) = x*_{ind(z)} ⊛ z` and its support budget.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_seed, DimensionSpec, FlatImages, ImageSampler, ImageVector, SeedVector};
use crate::error::{check_len, Error, Result};
use crate::noise;
use crate::partition::BlockPartition;

/// Anything that maps a seed to an image: the reference generator, a compiled
/// network, or a test double.
pub trait SeedToImage: Sync {
    fn spec(&self) -> &DimensionSpec;
    fn generate(&self, z: &SeedVector) -> Result<ImageVector>;
}

/// Parameters of the support-size budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportBudget {
    /// Discriminator capacity (parameter count).
    pub p: u64,
    /// Range bound of the measuring function.
    #[serde(rename = "Delta")]
    pub delta: f64,
    /// Lipschitz constant of the discriminator in its parameters.
    #[serde(rename = "L")]
    pub lipschitz: f64,
    /// Lipschitz constant of the measuring function.
    #[serde(rename = "L_phi")]
    pub lipschitz_phi: f64,
    pub epsilon: f64,
}

impl SupportBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.p == 0 {
            return Err(Error::Precondition("capacity p must be positive".into()));
        }
        if !(self.delta.is_finite() && self.delta >= 1.0) {
            return Err(Error::Precondition(format!("Delta must be >= 1, got {}", self.delta)));
        }
        if !(positive(self.lipschitz) && positive(self.lipschitz_phi) && positive(self.epsilon)) {
            return Err(Error::Precondition(
                "L, L_phi and epsilon must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// `ceil(p Δ² ln²(p Δ L L_φ / ε) / ε²)`, clamped below at 1.
pub fn budget_support_size(budget: &SupportBudget) -> Result<u64> {
    budget.validate()?;
    let p = budget.p as f64;
    let log = (p * budget.delta * budget.lipschitz * budget.lipschitz_phi / budget.epsilon).ln();
    let m = (p * budget.delta * budget.delta * log * log / (budget.epsilon * budget.epsilon)).ceil();
    if !m.is_finite() || m >= u64::MAX as f64 {
        return Err(Error::Overflow(format!(
            "support size {m} does not fit in 64 bits"
        )));
    }
    Ok((m as u64).max(1))
}

/// Smallest `k` with `k^d_tilde >= m_target`.
pub fn smallest_k(m_target: u64, d_tilde: usize) -> Result<u64> {
    if d_tilde == 0 {
        return Err(Error::Precondition("d_tilde must be positive".into()));
    }
    let covers = |k: u64| {
        let mut acc: u128 = 1;
        for _ in 0..d_tilde {
            acc = acc.saturating_mul(k as u128);
            if acc >= m_target as u128 {
                return true;
            }
        }
        acc >= m_target as u128
    };
    let mut k = (m_target as f64).powf(1.0 / d_tilde as f64).floor().max(1.0) as u64;
    while k > 1 && covers(k - 1) {
        k -= 1;
    }
    while !covers(k) {
        k += 1;
    }
    Ok(k)
}

/// The reference semantics of `G`: `m` memorized clean images indexed by the
/// block of the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorizingGenerator {
    partition: BlockPartition,
    memorized: Vec<ImageVector>,
    spec: DimensionSpec,
}

impl MemorizingGenerator {
    pub fn new(partition: BlockPartition, memorized: Vec<ImageVector>, spec: DimensionSpec) -> Result<Self> {
        if partition.d_tilde() != spec.d_tilde() {
            return Err(Error::InvalidSpec(format!(
                "partition has d_tilde = {} but spec has {}",
                partition.d_tilde(),
                spec.d_tilde()
            )));
        }
        if partition.sigma() != spec.sigma() {
            return Err(Error::InvalidSpec(format!(
                "partition has sigma = {} but spec has {}",
                partition.sigma(),
                spec.sigma()
            )));
        }
        check_len(partition.m(), memorized.len())?;
        for image in &memorized {
            check_len(spec.d(), image.len())?;
        }
        Ok(MemorizingGenerator {
            partition,
            memorized,
            spec,
        })
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    /// `x*_1..x*_m`, in block order.
    pub fn memorized(&self) -> &[ImageVector] {
        &self.memorized
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("partition.json"), self.partition.to_json()?)?;
        FlatImages::from_images(&self.memorized, self.spec.d())?.write(&dir.join("memorized.bin"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let partition = BlockPartition::from_json(&fs::read_to_string(dir.join("partition.json"))?)?;
        let images = FlatImages::read(&dir.join("memorized.bin"))?;
        let spec = DimensionSpec::new(images.d, partition.d_tilde(), partition.sigma())?;
        let memorized = images.images().collect();
        MemorizingGenerator::new(partition, memorized, spec)
    }
}

impl SeedToImage for MemorizingGenerator {
    fn spec(&self) -> &DimensionSpec {
        &self.spec
    }

    fn generate(&self, z: &SeedVector) -> Result<ImageVector> {
        check_len(self.spec.d_tilde(), z.len())?;
        let block = self.partition.index_of(z.as_slice());
        noise::splice(&self.memorized[block - 1], z, &self.spec)
    }
}

/// Draws `m` independent clean images and memorizes them in block order.
pub fn build_generator<R: Rng + ?Sized>(
    rng: &mut R,
    partition: BlockPartition,
    images: &mut ImageSampler,
    spec: &DimensionSpec,
) -> Result<MemorizingGenerator> {
    let memorized = (0..partition.m())
        .map(|_| images.sample_clean_image(rng))
        .collect::<Result<Vec<_>>>()?;
    MemorizingGenerator::new(partition, memorized, *spec)
}

/// Bit pattern of the non-spliced pixels, used for exact comparison.
pub(crate) fn kept_pattern(x: &ImageVector, kept: &[usize]) -> Vec<u64> {
    kept.iter().map(|&i| x[i].to_bits()).collect()
}

/// Number of distinct non-spliced output patterns over `n_samples` seeds.
pub fn support_census<G: SeedToImage + ?Sized, R: Rng + ?Sized>(
    gen: &G,
    n_samples: usize,
    rng: &mut R,
) -> Result<usize> {
    if n_samples == 0 {
        return Err(Error::Precondition("support census needs at least one sample".into()));
    }
    let spec = *gen.spec();
    let kept = noise::kept_indices(&spec);
    let mut seen = HashSet::new();
    for _ in 0..n_samples {
        let x = gen.generate(&sample_seed(rng, &spec))?;
        seen.insert(kept_pattern(&x, &kept));
    }
    Ok(seen.len())
}
