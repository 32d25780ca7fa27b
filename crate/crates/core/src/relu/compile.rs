//! Compiles a memorizing generator into an explicit sparse ReLU network.
//!
//! The network reads the seed `z`, splits each coordinate into `relu(z_j)` and
//! `relu(-z_j)`, thresholds `|z_j|` with saturating ramps, combines the
//! per-coordinate interval indicators into a one-hot block vector with an AND
//! gadget, reads the memorized image of the active block out of the last
//! layer's weights, and routes `z` itself to the spliced pixels.
//!
//! Block decoding goes straight from interval bits to the block one-hot with
//! `B_t = relu(Σ_j b_{j,t_j} - (d_tilde - 1))` instead of first forming a
//! k-ary number and selecting on it; the AND gadget is exact on 0/1 inputs
//! and keeps every weight bounded by `1 / ramp_width`.
//!
//! Each ramp is `clamp((|z_j| - τ_i) / w + 1/2, 0, 1)`, evaluated as
//! `1 - relu(1 - relu(a))` so that it is exactly 0 or 1 whenever `a` lands
//! outside `(0, 1)`. Inputs land in the ambiguous band only when `|z_j|` is
//! within `w / 2` of a finite threshold.

use serde::{Deserialize, Serialize};

use crate::distributions::{DimensionSpec, ImageVector, SeedVector};
use crate::error::{check_len, Error, Result};
use crate::generator::{MemorizingGenerator, SeedToImage};
use crate::noise;
use crate::partition::{half_normal_cdf, BlockPartition};

use super::network::{Activation, Layer, ReluNetwork};

/// Summary of a compilation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub nonzero_weights: usize,
    pub nonzero_biases: usize,
    /// Requested total-variation gap.
    pub delta: f64,
    pub ramp_width: f64,
    /// `m(d - d̃) + m(d̃ + 1) + 4kd̃ + 4d̃ + d`.
    pub predicted_bound: usize,
    /// Exact ν-mass of seeds with some coordinate in an ambiguous band.
    pub ambiguous_mass: f64,
    pub max_abs_weight: f64,
}

/// `m(d - d̃) + m(d̃ + 1) + 4kd̃ + 4d̃ + d`.
pub fn predicted_bound(m: usize, k: usize, d: usize, d_tilde: usize) -> usize {
    m * (d - d_tilde) + m * (d_tilde + 1) + 4 * k * d_tilde + 4 * d_tilde + d
}

/// Ramp width whose ambiguous bands carry ν-mass at most `delta`:
/// `w = δσ/(2d̃k)·√(π/2)`.
pub fn ramp_width(delta: f64, part: &BlockPartition) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition(format!("delta must lie in (0, 1), got {delta}")));
    }
    let w = delta * part.sigma() / (2.0 * part.d_tilde() as f64 * part.k() as f64)
        * (std::f64::consts::PI / 2.0).sqrt();
    check_ramp_width(w, part)?;
    Ok(w)
}

fn check_ramp_width(w: f64, part: &BlockPartition) -> Result<()> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::Precondition(format!("ramp width must be positive, got {w}")));
    }
    let scale = part.thresholds().last().copied().unwrap_or(part.sigma()).max(part.sigma());
    if w < 1e3 * f64::EPSILON * scale || !(1.0 / w).is_finite() {
        return Err(Error::Precision(format!(
            "ramp width {w:e} is too narrow to resolve thresholds of size {scale}"
        )));
    }
    let mut previous = 0.0;
    for &tau in part.thresholds() {
        if w >= tau - previous {
            return Err(Error::Precondition(format!(
                "ramp width {w} must be smaller than every threshold gap ({})",
                tau - previous
            )));
        }
        previous = tau;
    }
    Ok(())
}

/// ν-mass of seeds with at least one `|z_j|` within `w/2` of a finite threshold.
pub fn ambiguous_mass(part: &BlockPartition, w: f64) -> f64 {
    let sigma = part.sigma();
    let per_coordinate: f64 = part
        .thresholds()
        .iter()
        .map(|&tau| half_normal_cdf(tau + 0.5 * w, sigma) - half_normal_cdf(tau - 0.5 * w, sigma))
        .sum();
    1.0 - (1.0 - per_coordinate).powi(part.d_tilde() as i32)
}

/// Accumulates one layer of a network under construction.
struct LayerBuilder {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
}

impl LayerBuilder {
    fn new(cols: usize) -> Self {
        LayerBuilder {
            rows: 0,
            cols,
            triplets: Vec::new(),
            bias: Vec::new(),
        }
    }

    /// Adds a unit `bias + Σ weight·input[col]` and returns its row.
    fn unit(&mut self, inputs: &[(usize, f64)], bias: f64) -> usize {
        let row = self.rows;
        self.rows += 1;
        self.triplets
            .extend(inputs.iter().filter(|(_, v)| *v != 0.0).map(|&(c, v)| (row, c, v)));
        self.bias.push(bias);
        row
    }

    /// Copies the first `n` inputs unchanged.
    fn pass_through(&mut self, n: usize) {
        for c in 0..n {
            self.unit(&[(c, 1.0)], 0.0);
        }
    }

    fn finish(self, activation: Activation) -> Layer {
        Layer::new(self.rows, self.cols, self.triplets, self.bias, activation)
            .expect("builder emits well-formed layers")
    }
}

/// Where the threshold units read `|z_j|` from.
#[derive(Clone, Copy)]
enum MagnitudeSource {
    /// A single column holding `|z_j|` at `offset + j`.
    Direct { offset: usize },
    /// Columns `2j` and `2j + 1` holding `relu(z_j)` and `relu(-z_j)`.
    Split,
}

impl MagnitudeSource {
    fn inputs(self, j: usize, scale: f64) -> Vec<(usize, f64)> {
        match self {
            MagnitudeSource::Direct { offset } => vec![(offset + j, scale)],
            MagnitudeSource::Split => vec![(2 * j, scale), (2 * j + 1, scale)],
        }
    }
}

/// Column of `h2_{j,i}` (i in 1..k) within a layer whose first `offset`
/// columns are pass-through units.
fn h2_col(offset: usize, k: usize, j: usize, i: usize) -> usize {
    offset + j * (k - 1) + (i - 1)
}

fn bit_col(offset: usize, k: usize, j: usize, i: usize) -> usize {
    offset + j * k + (i - 1)
}

/// Appends the two ramp layers: `h1 = relu(a)` then `h2 = relu(1 - h1)`, one
/// unit per coordinate and finite threshold, after `pass` pass-through units.
fn push_ramps(
    layers: &mut Vec<Layer>,
    part: &BlockPartition,
    w: f64,
    in_cols: usize,
    pass: usize,
    source: MagnitudeSource,
) {
    let (k, d_tilde) = (part.k(), part.d_tilde());
    let mut h1 = LayerBuilder::new(in_cols);
    h1.pass_through(pass);
    for j in 0..d_tilde {
        for &tau in part.thresholds() {
            h1.unit(&source.inputs(j, 1.0 / w), 0.5 - tau / w);
        }
    }
    let h1_cols = h1.rows;
    layers.push(h1.finish(Activation::Relu));

    let mut h2 = LayerBuilder::new(h1_cols);
    h2.pass_through(pass);
    for j in 0..d_tilde {
        for i in 1..k {
            h2.unit(&[(h2_col(pass, k, j, i), -1.0)], 1.0);
        }
    }
    layers.push(h2.finish(Activation::Relu));
}

/// Inputs of the interval bit `b_{j,i}` as a combination of `h2` columns:
/// `b_1 = h2_1`, `b_i = h2_i - h2_{i-1}`, `b_k = 1 - h2_{k-1}`.
fn bit_terms(offset: usize, k: usize, j: usize, i: usize) -> (Vec<(usize, f64)>, f64) {
    let mut inputs = Vec::with_capacity(2);
    let mut bias = 0.0;
    if i < k {
        inputs.push((h2_col(offset, k, j, i), 1.0));
    } else {
        bias += 1.0;
    }
    if i > 1 {
        inputs.push((h2_col(offset, k, j, i - 1), -1.0));
    }
    (inputs, bias)
}

fn push_bits(layers: &mut Vec<Layer>, part: &BlockPartition, in_cols: usize, pass: usize, activation: Activation) {
    let (k, d_tilde) = (part.k(), part.d_tilde());
    let mut bits = LayerBuilder::new(in_cols);
    bits.pass_through(pass);
    for j in 0..d_tilde {
        for i in 1..=k {
            let (inputs, bias) = bit_terms(pass, k, j, i);
            bits.unit(&inputs, bias);
        }
    }
    layers.push(bits.finish(activation));
}

/// `|z|` as `relu(z) + relu(-z)`: `4·d_tilde` weights.
pub fn compile_abs(d_tilde: usize) -> ReluNetwork {
    let mut split = LayerBuilder::new(d_tilde);
    for j in 0..d_tilde {
        split.unit(&[(j, 1.0)], 0.0);
        split.unit(&[(j, -1.0)], 0.0);
    }
    let mut sum = LayerBuilder::new(2 * d_tilde);
    for j in 0..d_tilde {
        sum.unit(&[(2 * j, 1.0), (2 * j + 1, 1.0)], 0.0);
    }
    ReluNetwork::new(
        d_tilde,
        vec![split.finish(Activation::Relu), sum.finish(Activation::Identity)],
    )
    .expect("abs fragment is well formed")
}

/// Maps `(|z_1|, ..., |z_d̃|)` to interval bits `b_{j,i}`, output index
/// `j·k + (i - 1)`. Bits are an exact one-hot per coordinate whenever `|z_j|`
/// is more than `w/2` from every finite threshold, and always sum to 1.
pub fn compile_selector(part: &BlockPartition, w: f64) -> Result<ReluNetwork> {
    check_ramp_width(w, part)?;
    let (k, d_tilde) = (part.k(), part.d_tilde());
    let mut layers = Vec::new();
    if k == 1 {
        let mut ones = LayerBuilder::new(d_tilde);
        for _ in 0..d_tilde {
            ones.unit(&[], 1.0);
        }
        layers.push(ones.finish(Activation::Identity));
    } else {
        push_ramps(&mut layers, part, w, d_tilde, 0, MagnitudeSource::Direct { offset: 0 });
        push_bits(&mut layers, part, d_tilde * (k - 1), 0, Activation::Identity);
    }
    ReluNetwork::new(d_tilde, layers)
}

/// AND gadget from interval bits (`j·k + i - 1` layout) to the block one-hot
/// `B_t = relu(Σ_j b_{j,t_j} - (d̃ - 1))`, `t = 1..=m` in block-index order.
pub fn compile_onehot(part: &BlockPartition) -> Result<ReluNetwork> {
    let (k, d_tilde) = (part.k(), part.d_tilde());
    let mut and = LayerBuilder::new(k * d_tilde);
    for block in 1..=part.m() {
        let tuple = part.decode_block(block)?;
        let inputs: Vec<(usize, f64)> = tuple
            .iter()
            .enumerate()
            .map(|(j, &i)| (bit_col(0, k, j, i), 1.0))
            .collect();
        and.unit(&inputs, -(d_tilde as f64 - 1.0));
    }
    ReluNetwork::new(k * d_tilde, vec![and.finish(Activation::Relu)])
}

/// Linear read-out `F̃ = Σ_t B_t x*_t` restricted to non-spliced pixels, in
/// increasing pixel order. Zero pixels are structural zeros.
pub fn compile_memory(gen: &MemorizingGenerator) -> Result<ReluNetwork> {
    let spec = *gen.spec();
    let kept = noise::kept_indices(&spec);
    let mut memory = LayerBuilder::new(gen.m());
    for &pixel in &kept {
        let inputs: Vec<(usize, f64)> = gen
            .memorized()
            .iter()
            .enumerate()
            .map(|(t, x)| (t, x[pixel]))
            .collect();
        memory.unit(&inputs, 0.0);
    }
    ReluNetwork::new(gen.m(), vec![memory.finish(Activation::Identity)])
}

/// Compiles `gen` into a network on `R^d̃ -> R^d` that agrees exactly with
/// [`MemorizingGenerator::generate`] outside a set of ν-mass at most `delta`.
pub fn compile_generator(gen: &MemorizingGenerator, delta: f64) -> Result<(ReluNetwork, CompileReport)> {
    let part = gen.partition();
    let spec = *gen.spec();
    let (k, d_tilde, m, d) = (part.k(), part.d_tilde(), part.m(), spec.d());
    let w = ramp_width(delta, part)?;
    let pass = 2 * d_tilde;

    let mut layers = Vec::new();
    let mut split = LayerBuilder::new(d_tilde);
    for j in 0..d_tilde {
        split.unit(&[(j, 1.0)], 0.0);
        split.unit(&[(j, -1.0)], 0.0);
    }
    layers.push(split.finish(Activation::Relu));

    // Column layout of the layer that feeds the read-out: pass-through units
    // followed by one column per block, or `None` for the single-block case.
    let block_offset = if k == 1 {
        None
    } else {
        push_ramps(&mut layers, part, w, pass, pass, MagnitudeSource::Split);
        let h2_cols = pass + d_tilde * (k - 1);
        if k == 2 && d_tilde > 1 {
            // With two intervals each bit is h2 or 1 - h2, so the AND gadget
            // reads h2 directly and the bit layer is skipped.
            let mut and = LayerBuilder::new(h2_cols);
            and.pass_through(pass);
            for block in 1..=m {
                let mut inputs = Vec::with_capacity(d_tilde);
                let mut bias = -(d_tilde as f64 - 1.0);
                for (j, &i) in part.decode_block(block)?.iter().enumerate() {
                    let (terms, b) = bit_terms(pass, k, j, i);
                    inputs.extend(terms);
                    bias += b;
                }
                and.unit(&inputs, bias);
            }
            layers.push(and.finish(Activation::Relu));
        } else {
            push_bits(&mut layers, part, h2_cols, pass, Activation::Relu);
            if d_tilde > 1 {
                let mut and = LayerBuilder::new(pass + k * d_tilde);
                and.pass_through(pass);
                for block in 1..=m {
                    let inputs: Vec<(usize, f64)> = part
                        .decode_block(block)?
                        .iter()
                        .enumerate()
                        .map(|(j, &i)| (bit_col(pass, k, j, i), 1.0))
                        .collect();
                    and.unit(&inputs, -(d_tilde as f64 - 1.0));
                }
                layers.push(and.finish(Activation::Relu));
            }
        }
        Some(pass)
    };

    let in_cols = layers.last().map(Layer::rows).unwrap_or(d_tilde);
    let mask = noise::spliced_mask(&spec);
    let mut out = LayerBuilder::new(in_cols);
    let mut j = 0;
    for (pixel, &spliced) in mask.iter().enumerate() {
        if spliced {
            out.unit(&[(2 * j, 1.0), (2 * j + 1, -1.0)], 0.0);
            j += 1;
        } else {
            match block_offset {
                None => {
                    out.unit(&[], gen.memorized()[0][pixel]);
                }
                Some(offset) => {
                    let inputs: Vec<(usize, f64)> = gen
                        .memorized()
                        .iter()
                        .enumerate()
                        .map(|(t, x)| (offset + t, x[pixel]))
                        .collect();
                    out.unit(&inputs, 0.0);
                }
            }
        }
    }
    layers.push(out.finish(Activation::Identity));

    let net = ReluNetwork::new(d_tilde, layers)?;
    let report = CompileReport {
        nonzero_weights: net.nonzero_weights(),
        nonzero_biases: net.nonzero_biases(),
        delta,
        ramp_width: w,
        predicted_bound: predicted_bound(m, k, d, d_tilde),
        ambiguous_mass: ambiguous_mass(part, w),
        max_abs_weight: net.max_abs_weight(),
    };
    if report.nonzero_weights > report.predicted_bound {
        return Err(Error::InvalidNetwork(format!(
            "compiled network has {} non-zero weights, above the bound {}",
            report.nonzero_weights, report.predicted_bound
        )));
    }
    Ok((net, report))
}

/// A compiled generator network used as a seed-to-image oracle.
#[derive(Debug, Clone)]
pub struct CompiledGenerator {
    net: ReluNetwork,
    spec: DimensionSpec,
}

impl CompiledGenerator {
    pub fn new(net: ReluNetwork, spec: DimensionSpec) -> Result<Self> {
        check_len(spec.d_tilde(), net.input_dim())?;
        check_len(spec.d(), net.output_dim())?;
        Ok(CompiledGenerator { net, spec })
    }

    pub fn network(&self) -> &ReluNetwork {
        &self.net
    }
}

impl SeedToImage for CompiledGenerator {
    fn spec(&self) -> &DimensionSpec {
        &self.spec
    }

    fn generate(&self, z: &SeedVector) -> Result<ImageVector> {
        ImageVector::new(self.net.forward(z.as_slice())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_seed, CleanImageModel};
    use crate::generator::build_generator;
    use crate::rng::stream;
    use rand::Rng;

    fn generator(k: usize, d: usize, d_tilde: usize, seed: u64) -> MemorizingGenerator {
        let spec = DimensionSpec::new(d, d_tilde, 1.0).unwrap();
        let part = BlockPartition::new(k, d_tilde, 1.0).unwrap();
        let mut images = CleanImageModel::default().sampler(&spec).unwrap();
        build_generator(&mut stream(seed, "gen", k as u64), part, &mut images, &spec).unwrap()
    }

    fn is_safe(part: &BlockPartition, z: &[f64], w: f64) -> bool {
        z.iter()
            .all(|v| part.thresholds().iter().all(|t| (v.abs() - t).abs() > w))
    }

    #[test]
    fn abs_fragment() {
        let net = compile_abs(2);
        assert_eq!(net.nonzero_weights(), 8);
        assert_eq!(net.forward(&[-2.0, 3.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(net.forward(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let mut rng = stream(0, "abs", 0);
        let net = compile_abs(5);
        for _ in 0..10_000 {
            let z: Vec<f64> = (0..5).map(|_| rng.random_range(-50.0..50.0)).collect();
            let expected: Vec<f64> = z.iter().map(|v| v.abs()).collect();
            assert_eq!(net.forward(&z).unwrap(), expected);
        }
    }

    #[test]
    fn selector_exact_far_from_thresholds() {
        let part = BlockPartition::new(2, 1, 1.0).unwrap();
        let net = compile_selector(&part, 0.01).unwrap();
        assert_eq!(net.forward(&[0.1]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(net.forward(&[1e6]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn selector_midpoint_is_fractional() {
        let part = BlockPartition::new(2, 1, 1.0).unwrap();
        let tau = part.thresholds()[0];
        let bits = compile_selector(&part, 0.01).unwrap().forward(&[tau]).unwrap();
        assert!(bits[0] > 0.0 && bits[0] < 1.0 && bits[1] > 0.0 && bits[1] < 1.0);
        assert!((bits[0] - 0.5).abs() < 1e-9);
        assert_eq!(bits[0] + bits[1], 1.0);
    }

    #[test]
    fn selector_partition_of_unity() {
        let mut rng = stream(1, "sel", 0);
        for k in [2, 3, 5, 8] {
            let part = BlockPartition::new(k, 3, 1.0).unwrap();
            let w = ramp_width(0.05, &part).unwrap();
            let net = compile_selector(&part, w).unwrap();
            assert!(net.nonzero_weights() <= 4 * k * 3);
            for trial in 0..5_000 {
                let mut mags: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..3.5)).collect();
                if trial % 2 == 0 {
                    // land inside an ambiguous band
                    let t = part.thresholds()[trial % (k - 1)];
                    mags[0] = t + rng.random_range(-0.5..0.5) * w;
                }
                let bits = net.forward(&mags).unwrap();
                for j in 0..3 {
                    let row = &bits[j * k..(j + 1) * k];
                    assert_eq!(row.iter().sum::<f64>(), 1.0, "k={k} row {row:?}");
                    assert!(row.iter().all(|b| (0.0..=1.0).contains(b)));
                    if is_safe(&part, &mags[j..j + 1], w) {
                        let i = part.interval_of(mags[j]);
                        for (l, &b) in row.iter().enumerate() {
                            assert_eq!(b, if l + 1 == i { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn selector_rejects_bad_width() {
        let part = BlockPartition::new(3, 1, 1.0).unwrap();
        assert!(compile_selector(&part, 0.0).is_err());
        assert!(compile_selector(&part, 0.5).is_err());
        assert!(matches!(compile_selector(&part, 1e-300), Err(Error::Precision(_))));
    }

    #[test]
    fn onehot_fragment() {
        let part = BlockPartition::new(2, 2, 1.0).unwrap();
        let net = compile_onehot(&part).unwrap();
        assert_eq!(net.nonzero_weights(), part.m() * 2);
        // tuple (1, 2): coordinate 0 in interval 1, coordinate 1 in interval 2
        assert_eq!(net.forward(&[1.0, 0.0, 0.0, 1.0]).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(part.block_index(&[1, 2]).unwrap(), 3);
        let degraded = net.forward(&[0.5, 0.5, 0.0, 1.0]).unwrap();
        assert!(degraded.iter().all(|&b| b <= 0.5));
    }

    #[test]
    fn onehot_sums_to_one_on_exact_bits() {
        let part = BlockPartition::new(3, 3, 1.0).unwrap();
        let net = compile_onehot(&part).unwrap();
        for block in 1..=part.m() {
            let tuple = part.decode_block(block).unwrap();
            let mut bits = vec![0.0; 9];
            for (j, &i) in tuple.iter().enumerate() {
                bits[j * 3 + i - 1] = 1.0;
            }
            let b = net.forward(&bits).unwrap();
            assert_eq!(b.iter().sum::<f64>(), 1.0);
            assert_eq!(b[block - 1], 1.0);
        }
    }

    #[test]
    fn memory_fragment() {
        let gen = generator(2, 8, 2, 3);
        let net = compile_memory(&gen).unwrap();
        let kept = noise::kept_indices(gen.spec());
        let mut onehot = vec![0.0; gen.m()];
        onehot[2] = 1.0;
        let expected: Vec<f64> = kept.iter().map(|&i| gen.memorized()[2][i]).collect();
        assert_eq!(net.forward(&onehot).unwrap(), expected);
        assert!(net.forward(&vec![0.0; gen.m()]).unwrap().iter().all(|&v| v == 0.0));
        assert!(net.nonzero_weights() <= gen.m() * (8 - 2));
    }

    #[test]
    fn memory_skips_structural_zeros() {
        let spec = DimensionSpec::new(30, 3, 1.0).unwrap();
        let part = BlockPartition::new(2, 3, 1.0).unwrap();
        let mut rng = stream(4, "zeros", 0);
        let kept = noise::kept_indices(&spec);
        let mut zeros = 0;
        let memorized: Vec<ImageVector> = (0..8)
            .map(|_| {
                let mut v: Vec<f64> = (0..30).map(|_| rng.random_range(0.1..1.0)).collect();
                for &i in kept.iter().step_by(10) {
                    v[i] = 0.0;
                    zeros += 1;
                }
                ImageVector::new(v).unwrap()
            })
            .collect();
        let gen = MemorizingGenerator::new(part, memorized, spec).unwrap();
        let net = compile_memory(&gen).unwrap();
        assert_eq!(net.nonzero_weights(), 8 * 27 - zeros);
        let fraction = net.nonzero_weights() as f64 / (8.0 * 27.0);
        assert!((fraction - 0.9).abs() < 0.02, "{fraction}");
    }

    #[test]
    fn compiled_weight_count_small_case() {
        let gen = generator(2, 6, 2, 0);
        let (net, report) = compile_generator(&gen, 0.05).unwrap();
        assert_eq!(report.predicted_bound, 4 * 4 + 4 * 3 + 16 + 8 + 6);
        assert_eq!(report.nonzero_weights, net.nonzero_weights());
        assert!(report.nonzero_weights <= report.predicted_bound);
    }

    #[test]
    fn bound_below_twice_md() {
        for (k, d_tilde) in [(2, 2), (3, 2), (4, 3), (2, 4)] {
            let d = 2 * (d_tilde + 1) + 3;
            let gen = generator(k, d, d_tilde, 5);
            let (_, report) = compile_generator(&gen, 0.01).unwrap();
            if gen.m() >= 4 * k {
                assert!(report.predicted_bound <= 2 * gen.m() * d);
            }
            assert!(report.nonzero_weights <= report.predicted_bound);
        }
    }

    #[test]
    fn compiled_matches_reference() {
        for (k, d, d_tilde) in [(1, 5, 2), (2, 6, 1), (2, 6, 2), (3, 9, 1), (3, 12, 3), (5, 10, 2)] {
            let gen = generator(k, d, d_tilde, 7);
            let (net, report) = compile_generator(&gen, 0.05).unwrap();
            assert!(report.ambiguous_mass <= 0.05);
            let spec = *gen.spec();
            let mut rng = stream(8, "agree", k as u64);
            let mut disagree = 0;
            let n = 20_000;
            for _ in 0..n {
                let z = sample_seed(&mut rng, &spec);
                let out = net.forward(z.as_slice()).unwrap();
                let reference = gen.generate(&z).unwrap();
                assert_eq!(noise::encode_slice(&out, &spec), z.as_slice());
                if out != reference.as_slice() {
                    disagree += 1;
                    assert!(!is_safe(gen.partition(), z.as_slice(), report.ramp_width));
                }
            }
            assert!((disagree as f64) / (n as f64) <= 0.05);
        }
    }

    #[test]
    fn compile_rejects_delta_out_of_range() {
        let gen = generator(2, 6, 2, 0);
        assert!(compile_generator(&gen, 0.0).is_err());
        assert!(compile_generator(&gen, 1.0).is_err());
        assert!(matches!(compile_generator(&gen, 1e-300), Err(Error::Precision(_))));
    }

    #[test]
    fn compiled_network_json_round_trip() {
        let gen = generator(3, 8, 2, 1);
        let (net, _) = compile_generator(&gen, 0.01).unwrap();
        let back = ReluNetwork::from_json(&net.to_json().unwrap()).unwrap();
        let mut rng = stream(2, "json", 0);
        for _ in 0..500 {
            let z = sample_seed(&mut rng, gen.spec());
            let a: Vec<u64> = net.forward(z.as_slice()).unwrap().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.forward(z.as_slice()).unwrap().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }
}
