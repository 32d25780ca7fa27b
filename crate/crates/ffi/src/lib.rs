//! C ABI over `memogan`.
//!
//! Objects cross the boundary as opaque handles created by a `mg_*_new`,
//! `mg_*_build` or `mg_*_load` call and released by the matching `mg_*_free`.
//! Every fallible call returns an [`MgStatus`]; on failure the message is
//! kept per thread and can be copied out with [`mg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use memogan::distributions::{CleanImageModel, DimensionSpec, ImageVector, SeedVector};
use memogan::generator::{build_generator, MemorizingGenerator, SeedToImage};
use memogan::noise;
use memogan::partition::BlockPartition;
use memogan::relu::{compile_generator, ReluNetwork};
use memogan::rng::stream;
use memogan::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Precision = 4,
    Overflow = 5,
    Precondition = 6,
    Io = 7,
    Parse = 8,
    Panic = 9,
}

/// Partition of seed space into equal-mass blocks.
pub struct MgPartition(BlockPartition);

/// Memorizing generator.
pub struct MgGenerator(MemorizingGenerator);

/// Sparse ReLU network.
pub struct MgNetwork(ReluNetwork);

/// Size summary of a compiled generator.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MgCompileReport {
    pub nonzero_weights: usize,
    pub nonzero_biases: usize,
    pub predicted_bound: usize,
    pub ramp_width: f64,
    pub ambiguous_mass: f64,
    pub max_abs_weight: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> MgStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::ShapeMismatch { .. } => MgStatus::DimensionMismatch,
        Error::Precision(_) => MgStatus::Precision,
        Error::Overflow(_) => MgStatus::Overflow,
        Error::Precondition(_) | Error::Exhausted { .. } => MgStatus::Precondition,
        Error::Io(_) => MgStatus::Io,
        Error::Json(_) | Error::Csv(_) => MgStatus::Parse,
        _ => MgStatus::InvalidArgument,
    }
}

struct Fail(MgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MgStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> MgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            MgStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside memogan");
            MgStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail(MgStatus::InvalidArgument, "path is not UTF-8".into()))
}

fn copy_into(dst: &mut [f64], src: &[f64]) -> Result<(), Fail> {
    if dst.len() != src.len() {
        return Err(Error::DimensionMismatch {
            expected: src.len(),
            actual: dst.len(),
        }
        .into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns the full message
/// length in bytes. Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out_partition` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_partition_new(
    k: usize,
    d_tilde: usize,
    sigma: f64,
    out_partition: *mut *mut MgPartition,
) -> MgStatus {
    guard(|| {
        let slot = out(out_partition, "out_partition")?;
        let part = BlockPartition::new(k, d_tilde, sigma)?;
        *slot = Box::into_raw(Box::new(MgPartition(part)));
        Ok(())
    })
}

/// # Safety
/// `partition` must be null or a handle from `mg_partition_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn mg_partition_free(partition: *mut MgPartition) {
    if !partition.is_null() {
        drop(Box::from_raw(partition));
    }
}

/// Number of blocks `k^d_tilde`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mg_partition_m(partition: *const MgPartition, out_m: *mut usize) -> MgStatus {
    guard(|| {
        *out(out_m, "out_m")? = handle(partition, "partition")?.0.m();
        Ok(())
    })
}

/// Writes the `k - 1` interior thresholds.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mg_partition_thresholds(partition: *const MgPartition, buf: *mut f64, len: usize) -> MgStatus {
    guard(|| {
        let part = &handle(partition, "partition")?.0;
        copy_into(slice_mut(buf, len, "buf")?, part.thresholds())
    })
}

/// 1-based block index of a seed.
///
/// # Safety
/// `z` must point to `z_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mg_partition_block_index(
    partition: *const MgPartition,
    z: *const f64,
    z_len: usize,
    out_index: *mut usize,
) -> MgStatus {
    guard(|| {
        let part = &handle(partition, "partition")?.0;
        let seed = SeedVector::new(slice(z, z_len, "z")?.to_vec())?;
        let tuple = part.block_tuple(&seed)?;
        *out(out_index, "out_index")? = part.block_index(&tuple)?;
        Ok(())
    })
}

/// Extracts the code `z` (length `d_tilde`) from an image `x` (length `d`).
///
/// # Safety
/// Buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mg_encode(
    d: usize,
    d_tilde: usize,
    sigma: f64,
    x: *const f64,
    x_len: usize,
    out_z: *mut f64,
    z_len: usize,
) -> MgStatus {
    guard(|| {
        let spec = DimensionSpec::new(d, d_tilde, sigma)?;
        let image = ImageVector::new(slice(x, x_len, "x")?.to_vec())?;
        let code = noise::encode(&image, &spec)?;
        copy_into(slice_mut(out_z, z_len, "out_z")?, code.as_slice())
    })
}

/// Writes `x_tilde` with the code `z` spliced in.
///
/// # Safety
/// Buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mg_splice(
    d: usize,
    d_tilde: usize,
    sigma: f64,
    x_tilde: *const f64,
    z: *const f64,
    out_x: *mut f64,
) -> MgStatus {
    guard(|| {
        let spec = DimensionSpec::new(d, d_tilde, sigma)?;
        let clean = ImageVector::new(slice(x_tilde, d, "x_tilde")?.to_vec())?;
        let code = SeedVector::new(slice(z, d_tilde, "z")?.to_vec())?;
        let x = noise::splice(&clean, &code, &spec)?;
        copy_into(slice_mut(out_x, d, "out_x")?, x.as_slice())
    })
}

/// The encoder as a one-layer network with `d_tilde` unit weights.
///
/// # Safety
/// `out_network` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_encoder_network(
    d: usize,
    d_tilde: usize,
    sigma: f64,
    out_network: *mut *mut MgNetwork,
) -> MgStatus {
    guard(|| {
        let slot = out(out_network, "out_network")?;
        let spec = DimensionSpec::new(d, d_tilde, sigma)?;
        *slot = Box::into_raw(Box::new(MgNetwork(noise::encoder_as_network(&spec))));
        Ok(())
    })
}

/// Memorizes `k^d_tilde` synthetic images drawn from the default clean-image
/// model with the given seed.
///
/// # Safety
/// `out_generator` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_generator_build(
    d: usize,
    d_tilde: usize,
    sigma: f64,
    k: usize,
    seed: u64,
    out_generator: *mut *mut MgGenerator,
) -> MgStatus {
    guard(|| {
        let slot = out(out_generator, "out_generator")?;
        let spec = DimensionSpec::new(d, d_tilde, sigma)?;
        let part = BlockPartition::new(k, d_tilde, sigma)?;
        let mut images = CleanImageModel::default().sampler(&spec)?;
        let mut rng = stream(seed, "ffi.generator", k as u64);
        let gen = build_generator(&mut rng, part, &mut images, &spec)?;
        *slot = Box::into_raw(Box::new(MgGenerator(gen)));
        Ok(())
    })
}

/// Loads a generator directory written by `mg_generator_save` or the CLI.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out_generator` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_generator_load(dir: *const c_char, out_generator: *mut *mut MgGenerator) -> MgStatus {
    guard(|| {
        let slot = out(out_generator, "out_generator")?;
        let gen = MemorizingGenerator::load(path(dir)?)?;
        *slot = Box::into_raw(Box::new(MgGenerator(gen)));
        Ok(())
    })
}

/// # Safety
/// `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mg_generator_save(generator: *const MgGenerator, dir: *const c_char) -> MgStatus {
    guard(|| {
        let gen = &handle(generator, "generator")?.0;
        gen.save(path(dir)?)?;
        Ok(())
    })
}

/// # Safety
/// `generator` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn mg_generator_free(generator: *mut MgGenerator) {
    if !generator.is_null() {
        drop(Box::from_raw(generator));
    }
}

/// Support size `m`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mg_generator_m(generator: *const MgGenerator, out_m: *mut usize) -> MgStatus {
    guard(|| {
        *out(out_m, "out_m")? = handle(generator, "generator")?.0.m();
        Ok(())
    })
}

/// `G(z)` into `out_x`.
///
/// # Safety
/// Buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mg_generator_generate(
    generator: *const MgGenerator,
    z: *const f64,
    z_len: usize,
    out_x: *mut f64,
    x_len: usize,
) -> MgStatus {
    guard(|| {
        let gen = &handle(generator, "generator")?.0;
        let seed = SeedVector::new(slice(z, z_len, "z")?.to_vec())?;
        let x = gen.generate(&seed)?;
        copy_into(slice_mut(out_x, x_len, "out_x")?, x.as_slice())
    })
}

/// Compiles a generator into a ReLU network whose output disagrees with the
/// generator on at most a `delta` fraction of seeds. `out_report` may be null.
///
/// # Safety
/// `out_network` must be valid; `out_report` null or valid.
#[no_mangle]
pub unsafe extern "C" fn mg_compile(
    generator: *const MgGenerator,
    delta: f64,
    out_network: *mut *mut MgNetwork,
    out_report: *mut MgCompileReport,
) -> MgStatus {
    guard(|| {
        let gen = &handle(generator, "generator")?.0;
        let slot = out(out_network, "out_network")?;
        let (net, rep) = compile_generator(gen, delta)?;
        if let Some(r) = out_report.as_mut() {
            *r = MgCompileReport {
                nonzero_weights: rep.nonzero_weights,
                nonzero_biases: rep.nonzero_biases,
                predicted_bound: rep.predicted_bound,
                ramp_width: rep.ramp_width,
                ambiguous_mass: rep.ambiguous_mass,
                max_abs_weight: rep.max_abs_weight,
            };
        }
        *slot = Box::into_raw(Box::new(MgNetwork(net)));
        Ok(())
    })
}

/// # Safety
/// `network` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn mg_network_free(network: *mut MgNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mg_network_dims(
    network: *const MgNetwork,
    out_input_dim: *mut usize,
    out_output_dim: *mut usize,
) -> MgStatus {
    guard(|| {
        let net = &handle(network, "network")?.0;
        *out(out_input_dim, "out_input_dim")? = net.input_dim();
        *out(out_output_dim, "out_output_dim")? = net.output_dim();
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mg_network_nonzero_weights(network: *const MgNetwork, out_count: *mut usize) -> MgStatus {
    guard(|| {
        *out(out_count, "out_count")? = handle(network, "network")?.0.nonzero_weights();
        Ok(())
    })
}

/// Evaluates the network on one input.
///
/// # Safety
/// Buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mg_network_forward(
    network: *const MgNetwork,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> MgStatus {
    guard(|| {
        let net = &handle(network, "network")?.0;
        let y = net.forward(slice(input, input_len, "input")?)?;
        copy_into(slice_mut(output, output_len, "output")?, &y)
    })
}

/// Serializes the network to JSON; release the string with `mg_string_free`.
///
/// # Safety
/// `out_json` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_network_to_json(network: *const MgNetwork, out_json: *mut *mut c_char) -> MgStatus {
    guard(|| {
        let net = &handle(network, "network")?.0;
        let slot = out(out_json, "out_json")?;
        let text = CString::new(net.to_json()?).map_err(|_| Fail(MgStatus::Parse, "JSON contains NUL".into()))?;
        *slot = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out_network` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_network_from_json(json: *const c_char, out_network: *mut *mut MgNetwork) -> MgStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let slot = out(out_network, "out_network")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Fail(MgStatus::Parse, "JSON is not UTF-8".into()))?;
        *slot = Box::into_raw(Box::new(MgNetwork(ReluNetwork::from_json(text)?)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn mg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
