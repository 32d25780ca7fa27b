//! Bounded discriminators, the measuring function, the encoder-decoder
//! objective and adversarial training.

mod discriminator;
mod lipschitz;
mod objective;
mod phi;
mod train;

pub use discriminator::{capacity, disc_gradient, Batch, BatchGradient, Discriminator};
pub use lipschitz::{lipschitz_probe, parameter_ratio, score_ratio, LipschitzReport};
pub use objective::{
    bigan_objective, objective_on_pairs, phi_scores, EmpiricalPairs, GeneratorPairs, MismatchedPairs, NoisedPairs,
    ObjectiveEstimate, PairSampler,
};
pub use phi::{MeasuringFunction, MeasuringKind};
pub use train::{train_discriminator, write_trace, RunSummary, TraceRow, TrainConfig, TrainOutcome};
