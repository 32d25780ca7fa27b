//! Equal-measure partition of the seed space.
//!
//! Each coordinate is cut by the magnitude `|z_j|` into `k` intervals of equal
//! half-normal mass, `[0, τ_1), [τ_1, τ_2), ..., [τ_{k-1}, ∞)`, giving
//! `m = k^d_tilde` axis-aligned blocks of equal Gaussian measure. Tuples and
//! block indices are 1-based.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::SeedVector;
use crate::error::{check_len, Error, Result};

/// Largest support `k^d_tilde` accepted by default.
pub const DEFAULT_MAX_SUPPORT: u64 = 1 << 20;

/// Largest `k` for which thresholds are materialized.
pub const MAX_CELLS_PER_COORDINATE: usize = 1 << 26;

// 64 halvings of a 40σ bracket leave a width far below 1e-12σ.
const BISECTION_STEPS: usize = 64;
const MEASURE_TOLERANCE: f64 = 1e-10;
// P(|Z| > 40σ) underflows f64, so 40σ brackets every representable quantile.
const BRACKET_SIGMAS: f64 = 40.0;

/// `P(|Z| <= t)` for `Z ~ N(0, sigma^2)`.
pub fn half_normal_cdf(t: f64, sigma: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    libm::erf(t / (sigma * std::f64::consts::SQRT_2))
}

/// Bisection for the `p`-quantile of the half-normal restricted to
/// `[lo, hi)`. The returned value always lies in `[lo, hi)`.
fn bisect_quantile(p: f64, mut lo: f64, mut hi: f64, sigma: f64) -> f64 {
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if half_normal_cdf(mid, sigma) <= p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Thresholds `τ_1 < ... < τ_{k-1}` with `P(|Z| <= τ_i) = i / k`.
pub fn compute_thresholds(k: usize, sigma: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidSpec(format!("sigma must be positive, got {sigma}")));
    }
    if 1.0 / (k as f64) < MEASURE_TOLERANCE {
        return Err(Error::Precision(format!(
            "k = {k} cells have mass below the {MEASURE_TOLERANCE:e} certification tolerance"
        )));
    }
    if k > MAX_CELLS_PER_COORDINATE {
        return Err(Error::Overflow(format!(
            "k = {k} exceeds the supported {MAX_CELLS_PER_COORDINATE} cells per coordinate"
        )));
    }
    let top = BRACKET_SIGMAS * sigma;
    let thresholds: Vec<f64> = (1..k)
        .map(|i| bisect_quantile(i as f64 / k as f64, 0.0, top, sigma))
        .collect();
    check_thresholds(k, sigma, &thresholds)?;
    Ok(thresholds)
}

fn check_thresholds(k: usize, sigma: f64, thresholds: &[f64]) -> Result<()> {
    if thresholds.len() + 1 != k {
        return Err(Error::Precondition(format!(
            "{} thresholds given for k = {k}",
            thresholds.len()
        )));
    }
    let mut previous = 0.0;
    let mut previous_cdf = 0.0;
    for (i, &tau) in thresholds.iter().enumerate() {
        if !(tau.is_finite() && tau > previous) {
            return Err(Error::Precision(format!(
                "threshold {} ({tau}) does not exceed its predecessor ({previous}); k = {k} is too fine",
                i + 1
            )));
        }
        let cdf = half_normal_cdf(tau, sigma);
        if (cdf - previous_cdf - 1.0 / k as f64).abs() > MEASURE_TOLERANCE {
            return Err(Error::Precision(format!(
                "interval {} has half-normal mass {} instead of 1/{k}",
                i + 1,
                cdf - previous_cdf
            )));
        }
        previous = tau;
        previous_cdf = cdf;
    }
    if k > 1 && (1.0 - previous_cdf - 1.0 / k as f64).abs() > MEASURE_TOLERANCE {
        return Err(Error::Precision(format!(
            "last interval has half-normal mass {} instead of 1/{k}",
            1.0 - previous_cdf
        )));
    }
    Ok(())
}

/// Checked `k^d_tilde`, rejected above `max_support`.
pub fn support_size(k: usize, d_tilde: usize, max_support: u64) -> Result<u64> {
    let mut m: u64 = 1;
    for _ in 0..d_tilde {
        m = m
            .checked_mul(k as u64)
            .filter(|&m| m <= max_support)
            .ok_or_else(|| {
                Error::Overflow(format!(
                    "k^d_tilde = {k}^{d_tilde} exceeds the maximum support {max_support}"
                ))
            })?;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct BlockPartition {
    k: usize,
    d_tilde: usize,
    sigma: f64,
    thresholds: Vec<f64>,
    m: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    k: usize,
    d_tilde: usize,
    sigma: f64,
    thresholds: Vec<f64>,
}

impl TryFrom<RawPartition> for BlockPartition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        if raw.k == 0 || raw.d_tilde == 0 {
            return Err(Error::Precondition("k and d_tilde must be positive".into()));
        }
        if !(raw.sigma.is_finite() && raw.sigma > 0.0) {
            return Err(Error::InvalidSpec(format!("sigma must be positive, got {}", raw.sigma)));
        }
        check_thresholds(raw.k, raw.sigma, &raw.thresholds)?;
        let m = support_size(raw.k, raw.d_tilde, u64::MAX)?;
        Ok(BlockPartition {
            k: raw.k,
            d_tilde: raw.d_tilde,
            sigma: raw.sigma,
            thresholds: raw.thresholds,
            m: usize::try_from(m).map_err(|_| Error::Overflow(format!("m = {m}")))?,
        })
    }
}

impl From<BlockPartition> for RawPartition {
    fn from(p: BlockPartition) -> Self {
        RawPartition {
            k: p.k,
            d_tilde: p.d_tilde,
            sigma: p.sigma,
            thresholds: p.thresholds,
        }
    }
}

impl BlockPartition {
    pub fn new(k: usize, d_tilde: usize, sigma: f64) -> Result<Self> {
        Self::with_max_support(k, d_tilde, sigma, DEFAULT_MAX_SUPPORT)
    }

    pub fn with_max_support(k: usize, d_tilde: usize, sigma: f64, max_support: u64) -> Result<Self> {
        if d_tilde == 0 {
            return Err(Error::Precondition("d_tilde must be positive".into()));
        }
        let m = support_size(k.max(1), d_tilde, max_support)?;
        let thresholds = compute_thresholds(k, sigma)?;
        Ok(BlockPartition {
            k,
            d_tilde,
            sigma,
            thresholds,
            m: usize::try_from(m).map_err(|_| Error::Overflow(format!("m = {m}")))?,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d_tilde(&self) -> usize {
        self.d_tilde
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Finite thresholds `τ_1..τ_{k-1}`.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// `τ_i` for `i` in `0..=k`, with `τ_0 = 0` and `τ_k = ∞`.
    pub fn tau(&self, i: usize) -> f64 {
        match i {
            0 => 0.0,
            i if i == self.k => f64::INFINITY,
            i => self.thresholds[i - 1],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Interval index in `1..=k` of a single magnitude.
    pub fn interval_of(&self, magnitude: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= magnitude) + 1
    }

    /// `(i_1, ..., i_d_tilde)` with `|z_j| ∈ [τ_{i_j - 1}, τ_{i_j})`.
    pub fn block_tuple(&self, z: &SeedVector) -> Result<Vec<usize>> {
        check_len(self.d_tilde, z.len())?;
        Ok(self.tuple_of(z.as_slice()))
    }

    pub(crate) fn tuple_of(&self, z: &[f64]) -> Vec<usize> {
        z.iter().map(|v| self.interval_of(v.abs())).collect()
    }

    /// Mixed-radix index `1 + Σ_j (i_j - 1) k^(j-1)`.
    pub fn block_index(&self, tuple: &[usize]) -> Result<usize> {
        check_len(self.d_tilde, tuple.len())?;
        let mut index = 0usize;
        for &i in tuple.iter().rev() {
            if i == 0 || i > self.k {
                return Err(Error::Precondition(format!(
                    "tuple entry {i} outside 1..={}",
                    self.k
                )));
            }
            index = index * self.k + (i - 1);
        }
        Ok(index + 1)
    }

    /// Block index of a seed, skipping validation.
    pub(crate) fn index_of(&self, z: &[f64]) -> usize {
        let mut index = 0usize;
        for v in z.iter().rev() {
            index = index * self.k + (self.interval_of(v.abs()) - 1);
        }
        index + 1
    }

    /// Inverse of [`block_index`](Self::block_index).
    pub fn decode_block(&self, block: usize) -> Result<Vec<usize>> {
        if block == 0 || block > self.m {
            return Err(Error::Precondition(format!(
                "block {block} outside 1..={}",
                self.m
            )));
        }
        let mut rest = block - 1;
        Ok((0..self.d_tilde)
            .map(|_| {
                let i = rest % self.k + 1;
                rest /= self.k;
                i
            })
            .collect())
    }

    /// Draws from `ν` conditioned on `block`: each magnitude by inverse CDF
    /// restricted to its interval, each sign uniformly at random.
    pub fn sample_within_block<R: Rng + ?Sized>(&self, rng: &mut R, block: usize) -> Result<SeedVector> {
        let tuple = self.decode_block(block)?;
        let k = self.k as f64;
        let values = tuple
            .iter()
            .map(|&i| {
                let u = (i as f64 - 1.0 + rng.random::<f64>()) / k;
                let lo = self.tau(i - 1);
                let hi = if i == self.k {
                    lo + BRACKET_SIGMAS * self.sigma
                } else {
                    self.tau(i)
                };
                let magnitude = bisect_quantile(u, lo, hi, self.sigma);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        Ok(SeedVector::from_vec_unchecked(values))
    }

    /// Samples `n` seeds from `ν` and returns `max_b |freq_b - 1/m|`.
    pub fn verify_equipartition<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<f64> {
        let needed = self.m.saturating_mul(10);
        if n < needed {
            return Err(Error::Precondition(format!(
                "equipartition check needs at least 10·m = {needed} samples, got {n}"
            )));
        }
        let mut counts = vec![0u64; self.m];
        let mut z = vec![0.0; self.d_tilde];
        for _ in 0..n {
            for v in z.iter_mut() {
                *v = self.sigma * rng.sample::<f64, _>(StandardNormal);
            }
            counts[self.index_of(&z) - 1] += 1;
        }
        let target = 1.0 / self.m as f64;
        Ok(counts
            .iter()
            .map(|&c| (c as f64 / n as f64 - target).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
