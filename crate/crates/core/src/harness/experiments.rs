use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    bigan_objective, lipschitz_probe, objective_on_pairs, parameter_ratio, train_discriminator, Discriminator,
    EmpiricalPairs, GeneratorPairs, MeasuringFunction, NoisedPairs, ObjectiveEstimate, PairSampler,
};
use crate::distributions::{sample_seed, DimensionSpec, ImageSampler};
use crate::error::{Error, Result};
use crate::generator::{
    build_generator, kept_pattern, support_census, budget_support_size, MemorizingGenerator, SeedToImage,
    SupportBudget,
};
use crate::noise;
use crate::partition::BlockPartition;
use crate::relu::compile_generator;
use crate::rng::stream;

use super::config::ExperimentConfig;
use super::noncolliding::{sample_noncolliding, set_mean};

pub const SCHEMA_VERSION: u32 = 1;

/// Probe inputs for the Lipschitz report.
const LIPSCHITZ_INPUTS: usize = 64;
const LIPSCHITZ_PAIRS: usize = 64;
const LIPSCHITZ_SCALE: f64 = 1e-3;

/// A serializable experiment report with one flat table.
pub trait Report: Serialize {
    type Row: Serialize;

    fn rows(&self) -> &[Self::Row];

    fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for row in self.rows() {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// A grid cell that failed; the rest of the run carries on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellError {
    pub k: usize,
    pub message: String,
}

/// A `u64` seed derived from the master seed for one labelled task.
pub fn derive_seed(master_seed: u64, label: &str, index: u64) -> u64 {
    stream(master_seed, label, index).random()
}

fn generator_for(
    seed: u64,
    label: &str,
    k: usize,
    spec: &DimensionSpec,
    images: &ImageSampler,
) -> Result<MemorizingGenerator> {
    let part = BlockPartition::new(k, spec.d_tilde(), spec.sigma())?;
    build_generator(&mut stream(seed, label, k as u64), part, &mut images.clone(), spec)
}

fn eval_inputs<P: PairSampler>(sampler: &P, n: usize, rng: &mut crate::rng::Stream) -> Result<Vec<Vec<f64>>> {
    let mut s = sampler.clone();
    (0..n).map(|_| s.sample_joint(rng)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub k: usize,
    pub m: usize,
    pub gap: f64,
    pub std_err: f64,
    pub real_term: f64,
    pub fake_term: f64,
    pub n_eval: usize,
    /// Gap of the winner on the held-out selection batch.
    pub selection_gap: f64,
    pub best_restart: usize,
    pub best_sign: i8,
    pub support_census: usize,
    pub census_samples: usize,
    pub compiled_weights: usize,
    pub compiled_biases: usize,
    pub predicted_bound: usize,
    pub ambiguous_mass: f64,
    pub encoder_weights: usize,
    pub capacity_p: usize,
    pub m_over_p: f64,
    pub lipschitz_empirical: f64,
    pub lipschitz_bound: f64,
    /// Support size the budget asks for at this capacity and Lipschitz bound.
    pub budget_m_target: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub rows: Vec<CollapseRow>,
    pub errors: Vec<CellError>,
}

impl Report for CollapseReport {
    type Row = CollapseRow;

    fn rows(&self) -> &[CollapseRow] {
        &self.rows
    }
}

fn collapse_cell(cfg: &ExperimentConfig, k: usize) -> Result<CollapseRow> {
    let seed = cfg.master_seed;
    let spec = cfg.spec;
    let mf = &cfg.measuring;
    let images = cfg.images.sampler(&spec)?;
    let gen = generator_for(seed, "collapse.generator", k, &spec, &images)?;
    let (_, compiled) = compile_generator(&gen, cfg.compile_delta)?;
    let encoder_weights = noise::encoder_as_network(&spec).nonzero_weights();

    let real = NoisedPairs::new(images, spec)?;
    let fake = GeneratorPairs::new(&gen);
    let layers = cfg.layer_sizes(&spec);
    let outcome = train_discriminator(
        derive_seed(seed, "collapse.train", k as u64),
        &layers,
        &real,
        &fake,
        &cfg.train,
        mf,
    )?;
    let mut eval_rng = stream(seed, "collapse.eval", k as u64);
    let est = bigan_objective(
        &outcome.best,
        &mut real.clone(),
        &mut fake.clone(),
        cfg.eval_n,
        cfg.eval_n,
        &mut eval_rng,
        mf,
    )?;
    let census = support_census(&gen, cfg.eval_n, &mut stream(seed, "collapse.census", k as u64))?;

    let mut probe_rng = stream(seed, "collapse.lipschitz", k as u64);
    let inputs = eval_inputs(&real, LIPSCHITZ_INPUTS, &mut probe_rng)?;
    let lip = lipschitz_probe(&outcome.best, &inputs, LIPSCHITZ_PAIRS, LIPSCHITZ_SCALE, &mut probe_rng)?;
    let p = outcome.best.capacity_p();
    let budget = SupportBudget {
        p: p as u64,
        delta: mf.delta,
        lipschitz: lip.analytic_bound,
        lipschitz_phi: mf.lipschitz(),
        epsilon: cfg.epsilon,
    };
    Ok(CollapseRow {
        k,
        m: gen.m(),
        gap: est.gap,
        std_err: est.std_err,
        real_term: est.real_term,
        fake_term: est.fake_term,
        n_eval: cfg.eval_n,
        selection_gap: outcome.best_run.selection.gap,
        best_restart: outcome.best_run.restart,
        best_sign: outcome.best_run.sign,
        support_census: census,
        census_samples: cfg.eval_n,
        compiled_weights: compiled.nonzero_weights,
        compiled_biases: compiled.nonzero_biases,
        predicted_bound: compiled.predicted_bound,
        ambiguous_mass: compiled.ambiguous_mass,
        encoder_weights,
        capacity_p: p,
        m_over_p: parameter_ratio(gen.m(), p),
        lipschitz_empirical: lip.empirical_ratio,
        lipschitz_bound: lip.analytic_bound,
        budget_m_target: budget_support_size(&budget).ok(),
    })
}

/// Gap of the best trained discriminator against the memorizing generator for
/// every `k` of the grid.
pub fn run_collapse_experiment(cfg: &ExperimentConfig) -> Result<CollapseReport> {
    cfg.validate()?;
    let results: Vec<(usize, Result<CollapseRow>)> =
        cfg.k_grid.par_iter().map(|&k| (k, collapse_cell(cfg, k))).collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (k, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => errors.push(CellError { k, message: e.to_string() }),
        }
    }
    Ok(CollapseReport {
        schema_version: SCHEMA_VERSION,
        experiment: "collapse".into(),
        config: cfg.clone(),
        rows,
        errors,
    })
}

/// Per-generator stratified means: each seed builds a fresh memorizing
/// generator over `part` and averages the per-set mean over `sets` fresh
/// non-colliding sets.
pub fn stratified_means(
    d: &Discriminator,
    part: &BlockPartition,
    images: &ImageSampler,
    spec: &DimensionSpec,
    generator_seeds: &[u64],
    sets: usize,
    mf: &MeasuringFunction,
) -> Result<Vec<f64>> {
    if sets == 0 {
        return Err(Error::Precondition("need at least one set per generator".into()));
    }
    generator_seeds
        .par_iter()
        .map(|&s| {
            let gen = build_generator(&mut stream(s, "redraw.generator", 0), part.clone(), &mut images.clone(), spec)?;
            let mut rng = stream(s, "redraw.sets", 0);
            let mut total = 0.0;
            for _ in 0..sets {
                total += set_mean(d, &gen, &sample_noncolliding(&mut rng, part)?, mf)?;
            }
            Ok(total / sets as f64)
        })
        .collect()
}

// shifted by the first value so that identical inputs give exactly 0
fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let shift = values[0];
    let sum: f64 = values.iter().map(|v| v - shift).sum();
    let sum_sq: f64 = values.iter().map(|v| (v - shift) * (v - shift)).sum();
    ((sum_sq - sum * sum / n).max(0.0) / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub k: usize,
    pub m: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    /// Approximate standard error of `std` under normality, `std / √(2(N-1))`.
    pub std_std_err: f64,
    pub min: f64,
    pub max: f64,
    /// Gap of the fixed discriminator against its training generator.
    pub trained_gap: f64,
    pub trained_gap_std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRatio {
    pub m_from: usize,
    pub m_to: usize,
    pub std_ratio: f64,
    /// `√(m_from / m_to)`.
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ConcentrationRow>,
    pub ratios: Vec<ConcentrationRatio>,
}

impl Report for ConcentrationReport {
    type Row = ConcentrationRow;

    fn rows(&self) -> &[ConcentrationRow] {
        &self.rows
    }
}

fn concentration_cell(cfg: &ExperimentConfig, k: usize) -> Result<ConcentrationRow> {
    let seed = cfg.master_seed;
    let spec = cfg.spec_with(cfg.concentration.d_tilde)?;
    let mf = &cfg.measuring;
    let images = cfg.images.sampler(&spec)?;
    let gen = generator_for(seed, "concentration.generator", k, &spec, &images)?;
    let real = NoisedPairs::new(images.clone(), spec)?;
    let fake = GeneratorPairs::new(&gen);
    let outcome = train_discriminator(
        derive_seed(seed, "concentration.train", k as u64),
        &cfg.layer_sizes(&spec),
        &real,
        &fake,
        &cfg.train,
        mf,
    )?;
    let mut eval_rng = stream(seed, "concentration.eval", k as u64);
    let est = bigan_objective(
        &outcome.best,
        &mut real.clone(),
        &mut fake.clone(),
        cfg.eval_n,
        cfg.eval_n,
        &mut eval_rng,
        mf,
    )?;
    let seeds: Vec<u64> = (0..cfg.trials as u64)
        .map(|t| derive_seed(seed, "concentration.redraw", ((k as u64) << 32) | t))
        .collect();
    let means = stratified_means(
        &outcome.best,
        gen.partition(),
        &images,
        &spec,
        &seeds,
        cfg.concentration.sets_per_trial,
        mf,
    )?;
    let std = sample_std(&means);
    Ok(ConcentrationRow {
        k,
        m: gen.m(),
        trials: cfg.trials,
        mean: means.iter().sum::<f64>() / means.len() as f64,
        std,
        std_std_err: std / (2.0 * (cfg.trials as f64 - 1.0)).sqrt(),
        min: means.iter().copied().fold(f64::INFINITY, f64::min),
        max: means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        trained_gap: est.gap,
        trained_gap_std_err: est.std_err,
    })
}

/// Across-generator spread of the stratified objective for a fixed trained
/// discriminator, per `m`.
pub fn run_concentration_experiment(cfg: &ExperimentConfig) -> Result<ConcentrationReport> {
    cfg.validate()?;
    if cfg.trials < 30 {
        return Err(Error::Precondition(format!(
            "concentration needs at least 30 generator redraws, got {}",
            cfg.trials
        )));
    }
    let rows = cfg
        .concentration
        .k_grid
        .par_iter()
        .map(|&k| concentration_cell(cfg, k))
        .collect::<Result<Vec<_>>>()?;
    let ratios = rows
        .windows(2)
        .map(|w| ConcentrationRatio {
            m_from: w[0].m,
            m_to: w[1].m,
            std_ratio: w[1].std / w[0].std,
            predicted: (w[0].m as f64 / w[1].m as f64).sqrt(),
        })
        .collect();
    Ok(ConcentrationReport {
        schema_version: SCHEMA_VERSION,
        experiment: "concentration".into(),
        config: cfg.clone(),
        rows,
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSampleRow {
    pub k: usize,
    pub m: usize,
    pub set_size: usize,
    pub empirical_gap: f64,
    pub empirical_std_err: f64,
    pub population_gap: f64,
    pub population_std_err: f64,
    pub difference: f64,
    pub combined_std_err: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSampleReport {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub empirical: ObjectiveEstimate,
    pub population: ObjectiveEstimate,
    pub rows: Vec<FiniteSampleRow>,
}

impl Report for FiniteSampleReport {
    type Row = FiniteSampleRow;

    fn rows(&self) -> &[FiniteSampleRow] {
        &self.rows
    }
}

/// Objective of the best trained discriminator on fixed finite sets `S`, `T`
/// against the same quantity on fresh population samples.
pub fn run_finite_sample_experiment(cfg: &ExperimentConfig) -> Result<FiniteSampleReport> {
    cfg.validate()?;
    let fs = cfg.finite_sample;
    let seed = cfg.master_seed;
    let spec = cfg.spec_with(fs.d_tilde)?;
    let mf = &cfg.measuring;
    let images = cfg.images.sampler(&spec)?;
    let gen = generator_for(seed, "finite.generator", fs.k, &spec, &images)?;
    let m = gen.m();
    let set_size = (fs.set_size_multiplier * m as f64).ceil();
    if !(set_size.is_finite() && set_size >= m as f64) {
        return Err(Error::Precondition(format!(
            "|S| = |T| must be at least m = {m}, got multiplier {}",
            fs.set_size_multiplier
        )));
    }
    let set_size = set_size as usize;
    let real = NoisedPairs::new(images, spec)?;
    let fake = GeneratorPairs::new(&gen);
    let outcome = train_discriminator(
        derive_seed(seed, "finite.train", 0),
        &cfg.layer_sizes(&spec),
        &real,
        &fake,
        &cfg.train,
        mf,
    )?;
    let s = EmpiricalPairs::draw(&mut real.clone(), set_size, &mut stream(seed, "finite.s", 0))?;
    let t = EmpiricalPairs::draw(&mut fake.clone(), set_size, &mut stream(seed, "finite.t", 0))?;
    let empirical = objective_on_pairs(&outcome.best, s.pairs(), t.pairs(), mf)?;
    let population = bigan_objective(
        &outcome.best,
        &mut real.clone(),
        &mut fake.clone(),
        cfg.eval_n,
        cfg.eval_n,
        &mut stream(seed, "finite.eval", 0),
        mf,
    )?;
    let difference = empirical.gap - population.gap;
    let combined_std_err = empirical.std_err.hypot(population.std_err);
    let row = FiniteSampleRow {
        k: fs.k,
        m,
        set_size,
        empirical_gap: empirical.gap,
        empirical_std_err: empirical.std_err,
        population_gap: population.gap,
        population_std_err: population.std_err,
        difference,
        combined_std_err,
        z_score: if combined_std_err > 0.0 { difference / combined_std_err } else { 0.0 },
    };
    Ok(FiniteSampleReport {
        schema_version: SCHEMA_VERSION,
        experiment: "finite-sample".into(),
        config: cfg.clone(),
        empirical,
        population,
        rows: vec![row],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthdayOutcome {
    pub sample_size: usize,
    pub trials: usize,
    pub collisions: usize,
    pub frequency: f64,
}

/// Fraction of trials in which `s` generator outputs contain two with
/// identical non-spliced pixels.
pub fn run_birthday_experiment<G: SeedToImage + ?Sized, R: Rng + ?Sized>(
    gen: &G,
    s: usize,
    trials: usize,
    rng: &mut R,
) -> Result<BirthdayOutcome> {
    if s < 2 {
        return Err(Error::Precondition(format!("birthday test needs s >= 2, got {s}")));
    }
    if trials == 0 {
        return Err(Error::Precondition("birthday test needs at least one trial".into()));
    }
    let spec = *gen.spec();
    let kept = noise::kept_indices(&spec);
    let mut collisions = 0;
    for _ in 0..trials {
        let mut seen = HashSet::with_capacity(s);
        let mut hit = false;
        for _ in 0..s {
            let x = gen.generate(&sample_seed(rng, &spec))?;
            if !seen.insert(kept_pattern(&x, &kept)) {
                hit = true;
            }
        }
        collisions += usize::from(hit);
    }
    Ok(BirthdayOutcome {
        sample_size: s,
        trials,
        collisions,
        frequency: collisions as f64 / trials as f64,
    })
}

/// `1 - Π_{i<s} (1 - i/m)`.
pub fn birthday_exact(m: usize, s: usize) -> f64 {
    let mut none = 1.0;
    for i in 0..s {
        none *= (1.0 - i as f64 / m as f64).max(0.0);
    }
    1.0 - none
}

/// `1 - exp(-s(s-1) / 2m)`.
pub fn birthday_approx(m: usize, s: usize) -> f64 {
    1.0 - (-((s * (s - 1)) as f64) / (2.0 * m as f64)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthdayRow {
    pub m: usize,
    pub sample_size: usize,
    pub trials: usize,
    pub collisions: usize,
    pub frequency: f64,
    /// Binomial standard error at the predicted frequency.
    pub std_err: f64,
    pub predicted_exact: f64,
    pub predicted_approx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthdayReport {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub rows: Vec<BirthdayRow>,
}

impl Report for BirthdayReport {
    type Row = BirthdayRow;

    fn rows(&self) -> &[BirthdayRow] {
        &self.rows
    }
}

pub fn run_birthday_report(cfg: &ExperimentConfig) -> Result<BirthdayReport> {
    cfg.validate()?;
    let b = &cfg.birthday;
    let spec = cfg.spec_with(b.d_tilde)?;
    let images = cfg.images.sampler(&spec)?;
    let gen = generator_for(cfg.master_seed, "birthday.generator", b.k, &spec, &images)?;
    let m = gen.m();
    let rows = b
        .cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let mut rng = stream(cfg.master_seed, "birthday.trials", i as u64);
            let out = run_birthday_experiment(&gen, case.sample_size, case.trials, &mut rng)?;
            let predicted = birthday_exact(m, case.sample_size);
            Ok(BirthdayRow {
                m,
                sample_size: case.sample_size,
                trials: case.trials,
                collisions: out.collisions,
                frequency: out.frequency,
                std_err: (predicted * (1.0 - predicted) / case.trials as f64).sqrt(),
                predicted_exact: predicted,
                predicted_approx: birthday_approx(m, case.sample_size),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BirthdayReport {
        schema_version: SCHEMA_VERSION,
        experiment: "birthday".into(),
        config: cfg.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::TrainConfig;
    use crate::distributions::CleanImageModel;
    use crate::harness::config::{BirthdayCase, ConcentrationConfig, FiniteSampleConfig};

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            spec: DimensionSpec::new(8, 2, 1.0).unwrap(),
            k_grid: vec![2, 3],
            hidden: vec![6],
            train: TrainConfig {
                steps: 30,
                restarts: 1,
                batch_size: 16,
                selection_size: 100,
                trace_every: 0,
                ..TrainConfig::default()
            },
            eval_n: 200,
            trials: 30,
            concentration: ConcentrationConfig {
                d_tilde: 2,
                k_grid: vec![2, 4],
                sets_per_trial: 1,
            },
            finite_sample: FiniteSampleConfig {
                d_tilde: 2,
                k: 3,
                set_size_multiplier: 10.0,
            },
            birthday: crate::harness::config::BirthdayConfig {
                d_tilde: 2,
                k: 4,
                cases: vec![BirthdayCase {
                    sample_size: 5,
                    trials: 50,
                }],
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn collapse_rows_have_joint_fields() {
        let report = run_collapse_experiment(&tiny()).unwrap();
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.support_census <= row.m);
            assert_eq!(row.encoder_weights, 2);
            assert!(row.compiled_weights <= row.predicted_bound);
            assert!(row.gap >= 0.0 && row.gap <= 2.0);
            assert!(row.lipschitz_empirical <= row.lipschitz_bound);
        }
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }

    #[test]
    fn collapse_failures_are_reported_per_cell() {
        let cfg = ExperimentConfig {
            k_grid: vec![2, 1 << 40],
            ..tiny()
        };
        let report = run_collapse_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].k, 1 << 40);
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = tiny();
        let a = run_collapse_experiment(&cfg).unwrap().to_json().unwrap();
        let b = run_collapse_experiment(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let other = ExperimentConfig {
            master_seed: 1,
            ..cfg
        };
        assert_ne!(a, run_collapse_experiment(&other).unwrap().to_json().unwrap());
    }

    #[test]
    fn identical_generator_seeds_have_zero_spread() {
        let spec = DimensionSpec::new(8, 2, 1.0).unwrap();
        let images = CleanImageModel::default().sampler(&spec).unwrap();
        let part = BlockPartition::new(3, 2, 1.0).unwrap();
        let mut rng = stream(0, "conc-d", 0);
        let d = Discriminator::uniform(&mut rng, &[10, 4, 1], 0.5, 1.0).unwrap();
        let mf = MeasuringFunction::default();
        let means = stratified_means(&d, &part, &images, &spec, &[7; 30], 2, &mf).unwrap();
        assert_eq!(sample_std(&means), 0.0);
        assert!(means.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn concentration_needs_thirty_trials() {
        let cfg = ExperimentConfig { trials: 29, ..tiny() };
        assert!(run_concentration_experiment(&cfg).is_err());
        let report = run_concentration_experiment(&tiny()).unwrap();
        assert_eq!(report.ratios.len(), 1);
        assert!(report.rows.iter().all(|r| r.min >= -1.0 && r.max <= 1.0));
    }

    #[test]
    fn finite_sample_rejects_small_sets() {
        let mut cfg = tiny();
        cfg.finite_sample.set_size_multiplier = 0.1;
        assert!(run_finite_sample_experiment(&cfg).is_err());
        let report = run_finite_sample_experiment(&tiny()).unwrap();
        assert_eq!(report.rows[0].set_size, 90);
    }

    #[test]
    fn birthday_pigeonhole_and_closed_forms() {
        let spec = DimensionSpec::new(8, 2, 1.0).unwrap();
        let mut images = CleanImageModel::default().sampler(&spec).unwrap();
        let mut rng = stream(0, "bday", 0);
        let gen = build_generator(&mut rng, BlockPartition::new(2, 2, 1.0).unwrap(), &mut images, &spec).unwrap();
        let out = run_birthday_experiment(&gen, 5, 100, &mut rng).unwrap();
        assert_eq!(out.frequency, 1.0);
        assert!(run_birthday_experiment(&gen, 1, 100, &mut rng).is_err());
        assert!((birthday_approx(256, 40) - 0.953).abs() < 1e-3);
        assert!((birthday_exact(256, 2) - 1.0 / 256.0).abs() < 1e-15);
        assert_eq!(birthday_exact(4, 5), 1.0);
        let report = run_birthday_report(&tiny()).unwrap();
        assert_eq!(report.rows[0].m, 16);
    }
}
