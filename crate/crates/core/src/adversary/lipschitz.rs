use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

use super::discriminator::{Discriminator, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// Largest observed `|D_θ'(x) - D_θ(x)| / ‖θ' - θ‖`.
    pub empirical_ratio: f64,
    /// Gradient-norm bound over the clip box for inputs no longer than the
    /// largest probe input.
    pub analytic_bound: f64,
    pub n_pairs: usize,
}

/// The ratio `|D_b(x) - D_a(x)| / ‖b - a‖` for one input.
pub fn score_ratio(a: &Discriminator, b: &Discriminator, input: &[f64]) -> Result<f64> {
    if a.layer_sizes() != b.layer_sizes() {
        return Err(Error::Precondition("discriminators have different shapes".into()));
    }
    check_len(a.input_dim(), input.len())?;
    let dist = a
        .params()
        .iter()
        .zip(b.params())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    if dist == 0.0 {
        return Err(Error::Precondition("parameters coincide".into()));
    }
    let mut ws = Workspace::default();
    let sa = a.score_joint(input, &mut ws);
    let sb = b.score_joint(input, &mut ws);
    Ok((sb - sa).abs() / dist)
}

/// Random perturbations of size `scale` (clipped back into the box) at
/// inputs drawn from `inputs`.
pub fn lipschitz_probe<R: Rng + ?Sized>(
    d: &Discriminator,
    inputs: &[Vec<f64>],
    n_pairs: usize,
    scale: f64,
    rng: &mut R,
) -> Result<LipschitzReport> {
    if n_pairs == 0 {
        return Err(Error::Precondition("probe needs at least one pair".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Precondition(format!("perturbation scale must be positive, got {scale}")));
    }
    if inputs.is_empty() {
        return Err(Error::Precondition("probe needs at least one input".into()));
    }
    let max_norm = inputs
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut best = 0.0f64;
    for _ in 0..n_pairs {
        let input = &inputs[rng.random_range(0..inputs.len())];
        let mut direction: Vec<f64> = (0..d.capacity_p()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for v in &mut direction {
            *v *= scale / norm;
        }
        let mut moved = d.clone();
        for (p, v) in moved.params_mut().iter_mut().zip(&direction) {
            *p += v;
        }
        moved.clip();
        match score_ratio(d, &moved, input) {
            Ok(r) => best = best.max(r),
            // clipping can undo a perturbation completely at a box corner
            Err(Error::Precondition(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(LipschitzReport {
        empirical_ratio: best,
        analytic_bound: d.analytic_lipschitz_bound(max_norm),
        n_pairs,
    })
}

/// `m / p`, the support-to-capacity ratio.
pub fn parameter_ratio(m: usize, p: usize) -> f64 {
    m as f64 / p as f64
}
