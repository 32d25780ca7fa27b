use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

use super::discriminator::{disc_gradient_with, Batch, Discriminator, Workspace};
use super::objective::{objective_on_pairs, ObjectiveEstimate, PairSampler};
use super::phi::MeasuringFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Heavy-ball coefficient; 0 gives plain SGD.
    pub momentum: f64,
    /// Pairs per side per step.
    pub batch_size: usize,
    pub restarts: usize,
    pub init_scale: f64,
    pub weight_clip: f64,
    /// Pairs per side in the held-out batch used to pick the winner.
    pub selection_size: usize,
    /// Trace cadence in steps; 0 disables the trace.
    pub trace_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 5000,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 64,
            restarts: 5,
            init_scale: 0.1,
            weight_clip: 1.0,
            selection_size: 4000,
            trace_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.selection_size < 2 {
            return Err(Error::Config("selection_size must be at least 2".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config(format!("init scale must be non-negative, got {}", self.init_scale)));
        }
        if !(self.weight_clip.is_finite() && self.weight_clip > 0.0) {
            return Err(Error::Config(format!("weight clip must be positive, got {}", self.weight_clip)));
        }
        Ok(())
    }
}

/// One row of the minibatch trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub real_term: f64,
    pub fake_term: f64,
    pub gap: f64,
    pub grad_norm: f64,
}

/// Summary of one (restart, sign) ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub restart: usize,
    /// +1 ascends `real - fake`, -1 ascends `fake - real`.
    pub sign: i8,
    pub selection: ObjectiveEstimate,
    pub max_abs_param: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Discriminator,
    pub best_run: RunSummary,
    pub runs: Vec<RunSummary>,
    /// Trace of the winning run.
    pub trace: Vec<TraceRow>,
}

struct RunResult {
    disc: Discriminator,
    summary: RunSummary,
    trace: Vec<TraceRow>,
}

fn draw<P: PairSampler>(sampler: &mut P, n: usize, rng: &mut crate::rng::Stream) -> Result<Vec<Vec<f64>>> {
    (0..n).map(|_| sampler.sample_joint(rng)).collect()
}

/// Adversarial search for a discriminator separating `real` from `fake`.
///
/// Every restart starts from its own uniform initialization and is ascended
/// in both directions. All runs are scored on one shared held-out batch and
/// the largest `|gap|` wins; ties go to the earlier run. Streams depend only
/// on `(seed, restart)`, so adding restarts never changes earlier runs.
pub fn train_discriminator<P: PairSampler, Q: PairSampler>(
    seed: u64,
    layer_sizes: &[usize],
    real: &P,
    fake: &Q,
    cfg: &TrainConfig,
    mf: &MeasuringFunction,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if layer_sizes.first() != Some(&real.joint_dim()) || real.joint_dim() != fake.joint_dim() {
        return Err(Error::DimensionMismatch {
            expected: real.joint_dim(),
            actual: layer_sizes.first().copied().unwrap_or(0),
        });
    }
    let mut select_rng = stream(seed, "train.select", 0);
    let select_real = draw(&mut real.clone(), cfg.selection_size, &mut select_rng)?;
    let select_fake = draw(&mut fake.clone(), cfg.selection_size, &mut select_rng)?;

    let jobs: Vec<(usize, i8)> = (0..cfg.restarts).flat_map(|r| [(r, 1i8), (r, -1i8)]).collect();
    let results = jobs
        .par_iter()
        .map(|&(restart, sign)| {
            let mut init_rng = stream(seed, "train.init", restart as u64);
            let mut disc = Discriminator::uniform(&mut init_rng, layer_sizes, cfg.init_scale, cfg.weight_clip)?;
            let index = 2 * restart as u64 + u64::from(sign < 0);
            let mut rng = stream(seed, "train.batch", index);
            let trace = ascend(&mut disc, sign, real.clone(), fake.clone(), cfg, mf, &mut rng)?;
            let selection = objective_on_pairs(&disc, &select_real, &select_fake, mf)?;
            let max_abs_param = disc.max_abs_param();
            Ok(RunResult {
                disc,
                summary: RunSummary {
                    restart,
                    sign,
                    selection,
                    max_abs_param,
                },
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best_index = 0;
    for (i, r) in results.iter().enumerate() {
        if r.summary.selection.gap > results[best_index].summary.selection.gap {
            best_index = i;
        }
    }
    let runs = results.iter().map(|r| r.summary).collect();
    let winner = results.into_iter().nth(best_index).expect("at least one run");
    Ok(TrainOutcome {
        best: winner.disc,
        best_run: winner.summary,
        runs,
        trace: winner.trace,
    })
}

fn ascend<P: PairSampler, Q: PairSampler>(
    disc: &mut Discriminator,
    sign: i8,
    mut real: P,
    mut fake: Q,
    cfg: &TrainConfig,
    mf: &MeasuringFunction,
    rng: &mut crate::rng::Stream,
) -> Result<Vec<TraceRow>> {
    let direction = f64::from(sign);
    let mut velocity = vec![0.0; disc.capacity_p()];
    let mut ws = Workspace::default();
    let mut trace = Vec::new();
    for step in 0..cfg.steps {
        let batch = Batch {
            real: draw(&mut real, cfg.batch_size, rng)?,
            fake: draw(&mut fake, cfg.batch_size, rng)?,
        };
        let g = disc_gradient_with(disc, &batch, mf, &mut ws)?;
        for (v, gi) in velocity.iter_mut().zip(&g.gradient) {
            *v = cfg.momentum * *v + cfg.learning_rate * direction * gi;
        }
        for (p, v) in disc.params_mut().iter_mut().zip(&velocity) {
            *p += v;
        }
        disc.clip();
        if cfg.trace_every > 0 && (step % cfg.trace_every == 0 || step + 1 == cfg.steps) {
            trace.push(TraceRow {
                step,
                real_term: g.real_term,
                fake_term: g.fake_term,
                gap: (g.real_term - g.fake_term).abs(),
                grad_norm: g.gradient.iter().map(|v| v * v).sum::<f64>().sqrt(),
            });
        }
    }
    Ok(trace)
}

/// Writes the trace as CSV with header `step,real_term,fake_term,gap,grad_norm`.
pub fn write_trace<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in trace {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
