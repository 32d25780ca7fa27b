use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{ImageVector, SeedVector};
use crate::error::{check_len, Error, Result};

use super::phi::MeasuringFunction;

/// A fully connected ReLU scorer `D(x, z)` on the concatenation `(x, z)` with
/// a linear scalar output.
///
/// Parameters are stored flat, layer by layer: the row-major weight matrix
/// (`out × in`) followed by the bias of that layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    weight_clip: f64,
}

/// Total scalar parameter count of an MLP with the given widths.
pub fn capacity(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must list at least an input and an output width, all positive: {layer_sizes:?}"
        )));
    }
    if layer_sizes.last() != Some(&1) {
        return Err(Error::Config(format!(
            "discriminator output width must be 1, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

fn check_clip(weight_clip: f64) -> Result<()> {
    if weight_clip.is_finite() && weight_clip > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("weight clip must be positive, got {weight_clip}")))
    }
}

/// Scratch buffers reused across forward/backward passes.
#[derive(Debug, Default, Clone)]
pub(crate) struct Workspace {
    // activations[l] is the input of layer l; the last entry is the score
    activations: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Discriminator {
    pub fn zeros(layer_sizes: &[usize], weight_clip: f64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        check_clip(weight_clip)?;
        Ok(Discriminator {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; capacity(layer_sizes)],
            weight_clip,
        })
    }

    /// Parameters drawn i.i.d. uniform on `[-init_scale, init_scale]`, then
    /// clipped to `[-weight_clip, weight_clip]`.
    pub fn uniform<R: Rng + ?Sized>(
        rng: &mut R,
        layer_sizes: &[usize],
        init_scale: f64,
        weight_clip: f64,
    ) -> Result<Self> {
        let mut d = Self::zeros(layer_sizes, weight_clip)?;
        if !(init_scale.is_finite() && init_scale >= 0.0) {
            return Err(Error::Config(format!("init scale must be non-negative, got {init_scale}")));
        }
        if init_scale > 0.0 {
            for p in &mut d.params {
                *p = rng.random_range(-init_scale..=init_scale);
            }
        }
        d.clip();
        Ok(d)
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>, weight_clip: f64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        check_clip(weight_clip)?;
        check_len(capacity(layer_sizes), params.len())?;
        if let Some(index) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(v) = params.iter().find(|v| v.abs() > weight_clip) {
            return Err(Error::Config(format!(
                "parameter {v} lies outside the clip box [-{weight_clip}, {weight_clip}]"
            )));
        }
        Ok(Discriminator {
            layer_sizes: layer_sizes.to_vec(),
            params,
            weight_clip,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Number of trainable scalars, `Σ_l (rows·cols + rows)`.
    pub fn capacity_p(&self) -> usize {
        self.params.len()
    }

    pub fn weight_clip(&self) -> f64 {
        self.weight_clip
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn max_abs_param(&self) -> f64 {
        self.params.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Projects every parameter onto `[-c, c]`.
    pub fn clip(&mut self) {
        let c = self.weight_clip;
        for p in &mut self.params {
            *p = p.clamp(-c, c);
        }
    }

    /// Multiplies the output layer's weights and bias by `alpha`, ignoring the
    /// clip box.
    pub fn scale_output_layer(&mut self, alpha: f64) {
        let n = self.layer_sizes.len();
        let fan_in = self.layer_sizes[n - 2];
        let start = self.params.len() - (fan_in + 1);
        for p in &mut self.params[start..] {
            *p *= alpha;
        }
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let start = offset;
            offset += w[1] * w[0] + w[1];
            (start, w[0], w[1])
        })
    }

    /// `D(x, z)`.
    pub fn score(&self, x: &ImageVector, z: &SeedVector) -> Result<f64> {
        check_len(self.input_dim(), x.len() + z.len())?;
        let mut input = Vec::with_capacity(self.input_dim());
        input.extend_from_slice(x.as_slice());
        input.extend_from_slice(z.as_slice());
        Ok(self.score_joint(&input, &mut Workspace::default()))
    }

    /// Score of an already concatenated input.
    pub(crate) fn score_joint(&self, input: &[f64], ws: &mut Workspace) -> f64 {
        self.forward_into(input, ws);
        ws.activations.last().expect("at least one layer")[0]
    }

    fn forward_into(&self, input: &[f64], ws: &mut Workspace) {
        let layers = self.layer_sizes.len() - 1;
        ws.activations.resize_with(layers + 1, Vec::new);
        ws.activations[0].clear();
        ws.activations[0].extend_from_slice(input);
        for (l, (start, cols, rows)) in self.layer_offsets().enumerate() {
            let (before, after) = ws.activations.split_at_mut(l + 1);
            let a = &before[l];
            let out = &mut after[0];
            out.clear();
            let weights = &self.params[start..start + rows * cols];
            let bias = &self.params[start + rows * cols..start + rows * cols + rows];
            let hidden = l + 1 < layers;
            for r in 0..rows {
                let row = &weights[r * cols..(r + 1) * cols];
                let mut s = bias[r];
                for (w, v) in row.iter().zip(a.iter()) {
                    s += w * v;
                }
                out.push(if hidden { s.max(0.0) } else { s });
            }
        }
    }

    /// Adds `upstream · ∂D(input)/∂θ` to `grad` and returns `D(input)`.
    pub(crate) fn accumulate_gradient(&self, input: &[f64], upstream: f64, grad: &mut [f64], ws: &mut Workspace) -> f64 {
        self.forward_into(input, ws);
        let score = ws.activations.last().expect("at least one layer")[0];
        let offsets: Vec<(usize, usize, usize)> = self.layer_offsets().collect();
        ws.delta.clear();
        ws.delta.push(upstream);
        for (l, &(start, cols, rows)) in offsets.iter().enumerate().rev() {
            let a = &ws.activations[l];
            let (gw, gb) = grad[start..start + rows * cols + rows].split_at_mut(rows * cols);
            for r in 0..rows {
                let dr = ws.delta[r];
                if dr == 0.0 {
                    continue;
                }
                gb[r] += dr;
                for (g, v) in gw[r * cols..(r + 1) * cols].iter_mut().zip(a.iter()) {
                    *g += dr * v;
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[start..start + rows * cols];
            ws.delta_prev.clear();
            ws.delta_prev.resize(cols, 0.0);
            for r in 0..rows {
                let dr = ws.delta[r];
                if dr == 0.0 {
                    continue;
                }
                for (dp, w) in ws.delta_prev.iter_mut().zip(&weights[r * cols..(r + 1) * cols]) {
                    *dp += dr * w;
                }
            }
            for (dp, &v) in ws.delta_prev.iter_mut().zip(a.iter()) {
                if v <= 0.0 {
                    *dp = 0.0;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
        score
    }

    /// Upper bound on `‖∇_θ D(input)‖` over the whole clip box for any input
    /// of norm at most `input_norm`: with `M_l = c√(rows·cols)` bounding each
    /// weight matrix and `H_l = M_l H_{l-1} + c√rows` each activation,
    /// `√(Σ_l (Π_{k>l} M_k)² (H_{l-1}² + 1))`.
    pub fn analytic_lipschitz_bound(&self, input_norm: f64) -> f64 {
        let c = self.weight_clip;
        let shapes: Vec<(usize, usize)> = self.layer_sizes.windows(2).map(|w| (w[1], w[0])).collect();
        let mats: Vec<f64> = shapes.iter().map(|&(r, k)| c * ((r * k) as f64).sqrt()).collect();
        let mut h = vec![input_norm];
        for (l, &(rows, _)) in shapes.iter().enumerate() {
            h.push(mats[l] * h[l] + c * (rows as f64).sqrt());
        }
        let mut total = 0.0;
        for l in 0..shapes.len() {
            let downstream: f64 = mats[l + 1..].iter().product();
            total += downstream * downstream * (h[l] * h[l] + 1.0);
        }
        total.sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let checkpoint: Checkpoint = serde_json::from_str(text)?;
        checkpoint.try_into()
    }
}

/// Checkpoint layout; reuses the numeric conventions of the network format.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    layer_sizes: Vec<usize>,
    weight_clip: f64,
    capacity_p: usize,
    layers: Vec<CheckpointLayer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<&Discriminator> for Checkpoint {
    fn from(d: &Discriminator) -> Self {
        let layers = d
            .layer_offsets()
            .map(|(start, cols, rows)| CheckpointLayer {
                rows,
                cols,
                weights: d.params[start..start + rows * cols].to_vec(),
                bias: d.params[start + rows * cols..start + rows * cols + rows].to_vec(),
            })
            .collect();
        Checkpoint {
            layer_sizes: d.layer_sizes.clone(),
            weight_clip: d.weight_clip,
            capacity_p: d.capacity_p(),
            layers,
        }
    }
}

impl TryFrom<Checkpoint> for Discriminator {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        check_sizes(&c.layer_sizes)?;
        if c.capacity_p != capacity(&c.layer_sizes) {
            return Err(Error::Config(format!(
                "capacity_p {} does not match layer sizes {:?}",
                c.capacity_p, c.layer_sizes
            )));
        }
        check_len(c.layer_sizes.len() - 1, c.layers.len())?;
        let mut params = Vec::with_capacity(c.capacity_p);
        for (layer, w) in c.layers.iter().zip(c.layer_sizes.windows(2)) {
            if layer.rows != w[1] || layer.cols != w[0] {
                return Err(Error::Config(format!(
                    "checkpoint layer is {}x{} but sizes say {}x{}",
                    layer.rows, layer.cols, w[1], w[0]
                )));
            }
            check_len(layer.rows * layer.cols, layer.weights.len())?;
            check_len(layer.rows, layer.bias.len())?;
            params.extend_from_slice(&layer.weights);
            params.extend_from_slice(&layer.bias);
        }
        Discriminator::from_params(&c.layer_sizes, params, c.weight_clip)
    }
}

/// Joint inputs `(x, z)`, one list per side of the objective.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub real: Vec<Vec<f64>>,
    pub fake: Vec<Vec<f64>>,
}

pub(crate) fn joint(x: &ImageVector, z: &SeedVector) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + z.len());
    v.extend_from_slice(x.as_slice());
    v.extend_from_slice(z.as_slice());
    v
}

impl Batch {
    pub fn push_real(&mut self, x: &ImageVector, z: &SeedVector) {
        self.real.push(joint(x, z));
    }

    pub fn push_fake(&mut self, x: &ImageVector, z: &SeedVector) {
        self.fake.push(joint(x, z));
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty() && self.fake.is_empty()
    }
}

/// Mean φ-terms of a batch and the gradient of `mean_real φ(D) - mean_fake φ(D)`.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub real_term: f64,
    pub fake_term: f64,
    pub gradient: Vec<f64>,
}

/// Reverse-mode gradient of `mean_real φ(D) - mean_fake φ(D)` over all
/// parameters. A side with no entries contributes nothing.
pub fn disc_gradient(d: &Discriminator, batch: &Batch, mf: &MeasuringFunction) -> Result<BatchGradient> {
    let mut ws = Workspace::default();
    disc_gradient_with(d, batch, mf, &mut ws)
}

pub(crate) fn disc_gradient_with(
    d: &Discriminator,
    batch: &Batch,
    mf: &MeasuringFunction,
    ws: &mut Workspace,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::Precondition("gradient of an empty batch".into()));
    }
    for input in batch.real.iter().chain(&batch.fake) {
        check_len(d.input_dim(), input.len())?;
    }
    let mut gradient = vec![0.0; d.capacity_p()];
    let mut side = |inputs: &[Vec<f64>], sign: f64, gradient: &mut [f64]| {
        if inputs.is_empty() {
            return 0.0;
        }
        let n = inputs.len() as f64;
        let mut total = 0.0;
        for input in inputs {
            // φ'(D) depends on the score, so evaluate first and backprop second
            let s = d.score_joint(input, ws);
            total += mf.phi(s);
            d.accumulate_gradient(input, sign * mf.phi_derivative(s) / n, gradient, ws);
        }
        total / n
    };
    let real_term = side(&batch.real, 1.0, &mut gradient);
    let fake_term = side(&batch.fake, -1.0, &mut gradient);
    Ok(BatchGradient {
        real_term,
        fake_term,
        gradient,
    })
}
