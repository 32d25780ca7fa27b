//! Sparse layered ReLU networks and the generator compiler.

mod compile;
mod network;

pub use compile::{
    ambiguous_mass, compile_abs, compile_generator, compile_memory, compile_onehot, compile_selector,
    predicted_bound, ramp_width, CompileReport, CompiledGenerator,
};
pub use network::{Activation, Layer, ReluNetwork};
