use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuringKind {
    #[default]
    Tanh,
}

/// The bounded measuring function `φ(t) = Δ·tanh(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuringFunction {
    #[serde(default)]
    pub kind: MeasuringKind,
    #[serde(rename = "Delta")]
    pub delta: f64,
}

impl Default for MeasuringFunction {
    fn default() -> Self {
        MeasuringFunction {
            kind: MeasuringKind::Tanh,
            delta: 1.0,
        }
    }
}

impl MeasuringFunction {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 1.0) {
            return Err(Error::Config(format!("Delta must be >= 1, got {delta}")));
        }
        Ok(MeasuringFunction {
            kind: MeasuringKind::Tanh,
            delta,
        })
    }

    pub fn phi(&self, t: f64) -> f64 {
        match self.kind {
            MeasuringKind::Tanh => self.delta * t.tanh(),
        }
    }

    pub fn phi_derivative(&self, t: f64) -> f64 {
        match self.kind {
            MeasuringKind::Tanh => {
                let th = t.tanh();
                self.delta * (1.0 - th * th)
            }
        }
    }

    /// Lipschitz constant of φ.
    pub fn lipschitz(&self) -> f64 {
        self.delta
    }
}
