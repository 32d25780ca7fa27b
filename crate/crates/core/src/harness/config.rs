use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{MeasuringFunction, TrainConfig};
use crate::distributions::{CleanImageModel, DimensionSpec};
use crate::error::{Error, Result};

/// One `(s, trials)` case of the birthday test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthdayCase {
    pub sample_size: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BirthdayConfig {
    pub d_tilde: usize,
    pub k: usize,
    pub cases: Vec<BirthdayCase>,
}

impl Default for BirthdayConfig {
    fn default() -> Self {
        BirthdayConfig {
            d_tilde: 4,
            k: 4,
            cases: vec![
                BirthdayCase {
                    sample_size: 40,
                    trials: 400,
                },
                BirthdayCase {
                    sample_size: 2,
                    trials: 10_000,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConcentrationConfig {
    pub d_tilde: usize,
    pub k_grid: Vec<usize>,
    /// Non-colliding sets averaged per generator draw.
    pub sets_per_trial: usize,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig {
            d_tilde: 2,
            k_grid: vec![16, 32],
            sets_per_trial: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteSampleConfig {
    pub d_tilde: usize,
    pub k: usize,
    /// `|S| = |T| = ceil(multiplier · m)`; must be at least 1.
    pub set_size_multiplier: f64,
}

impl Default for FiniteSampleConfig {
    fn default() -> Self {
        FiniteSampleConfig {
            d_tilde: 2,
            k: 16,
            set_size_multiplier: 10.0,
        }
    }
}

/// Everything an experiment needs. Unknown keys are rejected; missing keys
/// take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub spec: DimensionSpec,
    pub images: CleanImageModel,
    pub k_grid: Vec<usize>,
    /// Hidden widths; the input width is `d + d_tilde` and the output is 1.
    pub hidden: Vec<usize>,
    pub measuring: MeasuringFunction,
    /// Target gap used for the support-size budget.
    pub epsilon: f64,
    pub train: TrainConfig,
    /// Pairs per side for every reported objective estimate.
    pub eval_n: usize,
    pub compile_delta: f64,
    pub master_seed: u64,
    /// Generator redraws in the concentration experiment.
    pub trials: usize,
    pub concentration: ConcentrationConfig,
    pub finite_sample: FiniteSampleConfig,
    pub birthday: BirthdayConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            spec: DimensionSpec::new(32, 4, 1.0).expect("default spec is valid"),
            images: CleanImageModel::default(),
            k_grid: vec![2, 4, 8],
            hidden: vec![48, 32],
            measuring: MeasuringFunction::default(),
            epsilon: 0.25,
            train: TrainConfig::default(),
            eval_n: 20_000,
            compile_delta: 0.01,
            master_seed: 0,
            trials: 50,
            concentration: ConcentrationConfig::default(),
            finite_sample: FiniteSampleConfig::default(),
            birthday: BirthdayConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k_grid.is_empty() || self.concentration.k_grid.is_empty() || self.birthday.cases.is_empty() {
            return bad("grids must be non-empty".into());
        }
        if self.k_grid.iter().chain(&self.concentration.k_grid).any(|&k| k == 0)
            || self.finite_sample.k == 0
            || self.birthday.k == 0
        {
            return bad("every k must be positive".into());
        }
        if self.eval_n < 100 {
            return bad(format!("eval_n must be at least 100, got {}", self.eval_n));
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.compile_delta > 0.0 && self.compile_delta < 1.0) {
            return bad(format!("compile_delta must lie in (0, 1), got {}", self.compile_delta));
        }
        if self.concentration.sets_per_trial == 0 {
            return bad("sets_per_trial must be at least 1".into());
        }
        self.images.validate()?;
        self.train.validate()?;
        MeasuringFunction::new(self.measuring.delta)?;
        for d_tilde in [self.concentration.d_tilde, self.finite_sample.d_tilde, self.birthday.d_tilde] {
            self.spec_with(d_tilde)?;
        }
        Ok(())
    }

    /// The configured spec with a different code width.
    pub fn spec_with(&self, d_tilde: usize) -> Result<DimensionSpec> {
        DimensionSpec::new(self.spec.d(), d_tilde, self.spec.sigma())
    }

    pub fn layer_sizes(&self, spec: &DimensionSpec) -> Vec<usize> {
        let mut sizes = vec![spec.d() + spec.d_tilde()];
        sizes.extend_from_slice(&self.hidden);
        sizes.push(1);
        sizes
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
