use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_seed, DimensionSpec, ImageSampler, SeedVector};
use crate::error::{check_len, Error, Result};
use crate::generator::SeedToImage;
use crate::noise;

use super::discriminator::{joint, Discriminator, Workspace};
use super::phi::MeasuringFunction;

/// Monte-Carlo estimate of `|E_real φ(D) - E_fake φ(D)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEstimate {
    pub real_term: f64,
    pub fake_term: f64,
    pub gap: f64,
    pub n_real: usize,
    pub n_fake: usize,
    pub std_err: f64,
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

impl ObjectiveEstimate {
    /// Builds the estimate from per-sample `φ(D)` values of each side.
    pub fn from_values(real: &[f64], fake: &[f64]) -> Result<Self> {
        if real.is_empty() || fake.is_empty() {
            return Err(Error::Precondition("both sides need at least one sample".into()));
        }
        let (real_term, var_real) = mean_var(real);
        let (fake_term, var_fake) = mean_var(fake);
        Ok(ObjectiveEstimate {
            real_term,
            fake_term,
            gap: (real_term - fake_term).abs(),
            n_real: real.len(),
            n_fake: fake.len(),
            std_err: (var_real / real.len() as f64 + var_fake / fake.len() as f64).sqrt(),
        })
    }

    pub fn signed(&self) -> f64 {
        self.real_term - self.fake_term
    }
}

/// A source of joint inputs `(x, z)` for one side of the objective. Clones
/// are independent cursors.
pub trait PairSampler: Clone + Send + Sync {
    fn joint_dim(&self) -> usize;
    fn sample_joint<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>>;
}

/// Real pairs `(x, E(x))` with `x` a noised image.
#[derive(Debug, Clone)]
pub struct NoisedPairs {
    images: ImageSampler,
    spec: DimensionSpec,
}

impl NoisedPairs {
    pub fn new(images: ImageSampler, spec: DimensionSpec) -> Result<Self> {
        check_len(spec.d(), images.d())?;
        Ok(NoisedPairs { images, spec })
    }
}

impl PairSampler for NoisedPairs {
    fn joint_dim(&self) -> usize {
        self.spec.d() + self.spec.d_tilde()
    }

    fn sample_joint<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let (x, _) = self.images.sample_noised_image(rng, &self.spec)?;
        let code = noise::encode(&x, &self.spec)?;
        Ok(joint(&x, &code))
    }
}

/// Fake pairs `(G(z), z)` with `z ~ N(0, σ² I)`.
pub struct GeneratorPairs<'a, G: ?Sized> {
    gen: &'a G,
}

impl<G: ?Sized> Clone for GeneratorPairs<'_, G> {
    fn clone(&self) -> Self {
        GeneratorPairs { gen: self.gen }
    }
}

impl<'a, G: SeedToImage + ?Sized> GeneratorPairs<'a, G> {
    pub fn new(gen: &'a G) -> Self {
        GeneratorPairs { gen }
    }
}

impl<G: SeedToImage + ?Sized> PairSampler for GeneratorPairs<'_, G> {
    fn joint_dim(&self) -> usize {
        self.gen.spec().d() + self.gen.spec().d_tilde()
    }

    fn sample_joint<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let z = sample_seed(rng, self.gen.spec());
        let x = self.gen.generate(&z)?;
        Ok(joint(&x, &z))
    }
}

/// Noised images paired with a fresh, independent code instead of their own.
#[derive(Debug, Clone)]
pub struct MismatchedPairs {
    images: ImageSampler,
    spec: DimensionSpec,
}

impl MismatchedPairs {
    pub fn new(images: ImageSampler, spec: DimensionSpec) -> Result<Self> {
        check_len(spec.d(), images.d())?;
        Ok(MismatchedPairs { images, spec })
    }
}

impl PairSampler for MismatchedPairs {
    fn joint_dim(&self) -> usize {
        self.spec.d() + self.spec.d_tilde()
    }

    fn sample_joint<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let (x, _) = self.images.sample_noised_image(rng, &self.spec)?;
        let code: SeedVector = sample_seed(rng, &self.spec);
        Ok(joint(&x, &code))
    }
}

/// Uniform draws from a fixed finite set of joint inputs (an empirical
/// distribution).
#[derive(Debug, Clone)]
pub struct EmpiricalPairs {
    pairs: Arc<Vec<Vec<f64>>>,
    dim: usize,
}

impl EmpiricalPairs {
    pub fn new(pairs: Vec<Vec<f64>>) -> Result<Self> {
        let dim = pairs
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Precondition("empirical set is empty".into()))?;
        for p in &pairs {
            check_len(dim, p.len())?;
        }
        Ok(EmpiricalPairs {
            pairs: Arc::new(pairs),
            dim,
        })
    }

    /// Collects `n` draws of another sampler.
    pub fn draw<P: PairSampler, R: Rng + ?Sized>(source: &mut P, n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| source.sample_joint(rng)).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[Vec<f64>] {
        &self.pairs
    }
}

impl PairSampler for EmpiricalPairs {
    fn joint_dim(&self) -> usize {
        self.dim
    }

    fn sample_joint<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.pairs[rng.random_range(0..self.pairs.len())].clone())
    }
}

/// Per-sample `φ(D)` over a list of joint inputs.
pub fn phi_scores(d: &Discriminator, inputs: &[Vec<f64>], mf: &MeasuringFunction) -> Result<Vec<f64>> {
    let mut ws = Workspace::default();
    inputs
        .iter()
        .map(|input| {
            check_len(d.input_dim(), input.len())?;
            Ok(mf.phi(d.score_joint(input, &mut ws)))
        })
        .collect()
}

/// The objective of `d` on two fixed lists of joint inputs.
pub fn objective_on_pairs(
    d: &Discriminator,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    mf: &MeasuringFunction,
) -> Result<ObjectiveEstimate> {
    ObjectiveEstimate::from_values(&phi_scores(d, real, mf)?, &phi_scores(d, fake, mf)?)
}

/// Fresh Monte-Carlo estimate with `n_real` real and `n_fake` fake draws.
pub fn bigan_objective<P: PairSampler, Q: PairSampler, R: Rng + ?Sized>(
    d: &Discriminator,
    real: &mut P,
    fake: &mut Q,
    n_real: usize,
    n_fake: usize,
    rng: &mut R,
    mf: &MeasuringFunction,
) -> Result<ObjectiveEstimate> {
    if n_real < 2 || n_fake < 2 {
        return Err(Error::Precondition(format!(
            "objective needs at least 2 samples per side, got {n_real} and {n_fake}"
        )));
    }
    let real_inputs = (0..n_real).map(|_| real.sample_joint(rng)).collect::<Result<Vec<_>>>()?;
    let fake_inputs = (0..n_fake).map(|_| fake.sample_joint(rng)).collect::<Result<Vec<_>>>()?;
    objective_on_pairs(d, &real_inputs, &fake_inputs, mf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::CleanImageModel;
    use crate::generator::build_generator;
    use crate::partition::BlockPartition;
    use crate::rng::stream;

    fn setup() -> (DimensionSpec, ImageSampler) {
        let spec = DimensionSpec::new(12, 2, 1.0).unwrap();
        let sampler = CleanImageModel::default().sampler(&spec).unwrap();
        (spec, sampler)
    }

    #[test]
    fn zero_discriminator_gap_is_exactly_zero() {
        let (spec, sampler) = setup();
        let d = Discriminator::zeros(&[14, 5, 1], 1.0).unwrap();
        let mut real = NoisedPairs::new(sampler.clone(), spec).unwrap();
        let mut fake = MismatchedPairs::new(sampler, spec).unwrap();
        let mut rng = stream(0, "zero", 0);
        let est = bigan_objective(&d, &mut real, &mut fake, 50, 50, &mut rng, &MeasuringFunction::default()).unwrap();
        assert_eq!(est.gap, 0.0);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let (spec, sampler) = setup();
        let d = Discriminator::zeros(&[14, 1], 1.0).unwrap();
        let mut real = NoisedPairs::new(sampler.clone(), spec).unwrap();
        let mut fake = real.clone();
        let mut rng = stream(0, "few", 0);
        assert!(bigan_objective(&d, &mut real, &mut fake, 1, 10, &mut rng, &MeasuringFunction::default()).is_err());
    }

    #[test]
    fn swapping_sides_negates_signed_difference() {
        let (spec, sampler) = setup();
        let mut rng = stream(1, "swap", 0);
        let d = Discriminator::uniform(&mut rng, &[14, 6, 1], 0.5, 1.0).unwrap();
        let mut real = NoisedPairs::new(sampler.clone(), spec).unwrap();
        let mut fake = MismatchedPairs::new(sampler, spec).unwrap();
        let r: Vec<_> = (0..200).map(|_| real.sample_joint(&mut rng).unwrap()).collect();
        let f: Vec<_> = (0..300).map(|_| fake.sample_joint(&mut rng).unwrap()).collect();
        let mf = MeasuringFunction::default();
        let a = objective_on_pairs(&d, &r, &f, &mf).unwrap();
        let b = objective_on_pairs(&d, &f, &r, &mf).unwrap();
        assert_eq!(a.signed(), -b.signed());
        assert_eq!(a.gap, b.gap);
        assert!(a.gap <= 2.0 && a.real_term.abs() <= 1.0 && a.fake_term.abs() <= 1.0);
    }

    #[test]
    fn constructed_pair_is_fooling_for_untrained_discriminators() {
        let (spec, mut sampler) = setup();
        let mut rng = stream(2, "fool", 0);
        // a fixed G only matches the population marginal up to O(1/√m), so
        // m has to dwarf the sample size for the check to be about the pairing
        let part = BlockPartition::new(256, 2, 1.0).unwrap();
        let gen = build_generator(&mut rng, part, &mut sampler, &spec).unwrap();
        let mf = MeasuringFunction::default();
        for trial in 0..10 {
            let mut rng = stream(2, "fool-trial", trial);
            let d = Discriminator::uniform(&mut rng, &[14, 8, 1], 0.5, 1.0).unwrap();
            let mut real = NoisedPairs::new(sampler.clone(), spec).unwrap();
            let mut fake = GeneratorPairs::new(&gen);
            let est = bigan_objective(&d, &mut real, &mut fake, 10_000, 10_000, &mut rng, &mf).unwrap();
            assert!(est.gap <= 5.0 * est.std_err, "trial {trial}: {est:?}");
        }
    }

    #[test]
    fn real_pairs_carry_their_own_code() {
        let (spec, sampler) = setup();
        let mut real = NoisedPairs::new(sampler, spec).unwrap();
        let mut rng = stream(3, "code", 0);
        let v = real.sample_joint(&mut rng).unwrap();
        let positions = noise::spliced_positions(&spec);
        for (j, p) in positions.iter().enumerate() {
            assert_eq!(v[p - 1].to_bits(), v[spec.d() + j].to_bits());
        }
    }

    #[test]
    fn empirical_pairs_draw_members() {
        let set = EmpiricalPairs::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut s = set.clone();
        let mut rng = stream(4, "emp", 0);
        for _ in 0..20 {
            let v = s.sample_joint(&mut rng).unwrap();
            assert!(set.pairs().contains(&v));
        }
        assert!(EmpiricalPairs::new(vec![]).is_err());
        assert!(EmpiricalPairs::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
