//! Constructive solutions to the encoder-decoder GAN objective that collapse
//! to finite support and learn white-noise codes, together with the tooling
//! to check empirically that bounded discriminators cannot tell them apart
//! from the data.
//!
//! * [`distributions`]: seed, clean-image and noised-image samplers.
//! * [`noise`]: the splice operator and the noise-extracting encoder.
//! * [`partition`]: equal-measure blocks of the seed space.
//! * [`generator`]: the memorizing generator and its support budget.
//! * [`relu`]: sparse ReLU networks and the generator compiler.
//! * [`adversary`]: discriminators, the objective, and adversarial training.
//! * [`harness`]: the experiment drivers behind the `memogan` binary.

pub mod adversary;
pub mod distributions;
pub mod error;
pub mod generator;
pub mod harness;
pub mod noise;
pub mod partition;
pub mod relu;
pub mod rng;

pub use distributions::{CleanImageModel, DimensionSpec, ImageMode, ImageVector, SeedVector};
pub use error::{Error, Result};
pub use generator::{MemorizingGenerator, SeedToImage, SupportBudget};
pub use partition::BlockPartition;
pub use relu::{CompileReport, ReluNetwork};
