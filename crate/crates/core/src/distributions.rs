//! Seed, clean-image and noised-image distributions.
//!
//! Seeds follow a spherical zero-mean Gaussian with per-coordinate standard
//! deviation `sigma`. Clean images come either from a synthetic random cosine
//! field or from a user-supplied flat binary file. Noised images are clean
//! images with a fresh seed spliced into `d_tilde` evenly spaced pixels.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::noise;

/// Image dimension `d`, code dimension `d_tilde` and seed scale `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DimensionSpec {
    d: usize,
    d_tilde: usize,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    d: usize,
    d_tilde: usize,
    #[serde(default = "default_sigma")]
    sigma: f64,
}

fn default_sigma() -> f64 {
    1.0
}

impl TryFrom<RawSpec> for DimensionSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        DimensionSpec::new(raw.d, raw.d_tilde, raw.sigma)
    }
}

impl From<DimensionSpec> for RawSpec {
    fn from(spec: DimensionSpec) -> Self {
        RawSpec {
            d: spec.d,
            d_tilde: spec.d_tilde,
            sigma: spec.sigma,
        }
    }
}

impl DimensionSpec {
    pub fn new(d: usize, d_tilde: usize, sigma: f64) -> Result<Self> {
        if d_tilde == 0 {
            return Err(Error::InvalidSpec("d_tilde must be positive".into()));
        }
        if d_tilde >= d {
            return Err(Error::InvalidSpec(format!(
                "d_tilde ({d_tilde}) must be strictly less than d ({d})"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "sigma must be a positive finite number, got {sigma}"
            )));
        }
        Ok(DimensionSpec { d, d_tilde, sigma })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_tilde(&self) -> usize {
        self.d_tilde
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Spacing between spliced pixels, `floor(d / d_tilde)`.
    pub fn stride(&self) -> usize {
        self.d / self.d_tilde
    }
}

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Wraps `values`, rejecting NaN and infinities.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { index });
                }
                Ok($name(values))
            }

            pub fn zeros(len: usize) -> Self {
                $name(vec![0.0; len])
            }

            #[allow(dead_code)]
            pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
                $name(values)
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;

            fn index(&self, index: usize) -> &f64 {
                &self.0[index]
            }
        }
    };
}

real_vector!(
    /// A point of the code space `R^d_tilde`.
    SeedVector
);
real_vector!(
    /// A point of the image space `R^d`, clean or noised.
    ImageVector
);

impl ImageVector {
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Draws `z ~ N(0, sigma^2 I)` in `R^d_tilde`.
pub fn sample_seed<R: Rng + ?Sized>(rng: &mut R, spec: &DimensionSpec) -> SeedVector {
    let values = (0..spec.d_tilde())
        .map(|_| spec.sigma() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    SeedVector(values)
}

/// Source of clean images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ImageMode {
    Synthetic,
    FileBacked { path: PathBuf },
}

/// Parameters of the clean image distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanImageModel {
    /// Number of cosine profiles summed per image.
    pub basis_count: usize,
    /// Largest integer frequency of a profile (cycles across the image).
    pub frequency_cap: usize,
    /// Coefficient scale; synthetic images are clamped to `[-amplitude, amplitude]`.
    pub amplitude: f64,
    pub mode: ImageMode,
}

impl Default for CleanImageModel {
    fn default() -> Self {
        CleanImageModel {
            basis_count: 4,
            frequency_cap: 4,
            amplitude: 1.0,
            mode: ImageMode::Synthetic,
        }
    }
}

impl CleanImageModel {
    pub fn validate(&self) -> Result<()> {
        if self.frequency_cap == 0 {
            return Err(Error::Config("frequency_cap must be positive".into()));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::Config(format!(
                "amplitude must be positive and finite, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Opens a sampler over this model. File-backed models load the file
    /// once; every sampler reads it from the first record.
    pub fn sampler(&self, spec: &DimensionSpec) -> Result<ImageSampler> {
        self.validate()?;
        match &self.mode {
            ImageMode::Synthetic => Ok(ImageSampler::Synthetic {
                basis_count: self.basis_count,
                frequency_cap: self.frequency_cap,
                amplitude: self.amplitude,
                d: spec.d(),
            }),
            ImageMode::FileBacked { path } => {
                let images = FlatImages::read(path)?;
                if images.d != spec.d() {
                    return Err(Error::ShapeMismatch {
                        path: path.clone(),
                        expected: spec.d(),
                        actual: images.d,
                    });
                }
                Ok(ImageSampler::File {
                    images: Arc::new(images),
                    path: path.clone(),
                    cursor: 0,
                })
            }
        }
    }
}

/// A stateful clean-image source. Clone it to hand an independent cursor to
/// another task.
#[derive(Debug, Clone)]
pub enum ImageSampler {
    Synthetic {
        basis_count: usize,
        frequency_cap: usize,
        amplitude: f64,
        d: usize,
    },
    File {
        images: Arc<FlatImages>,
        path: PathBuf,
        cursor: usize,
    },
}

impl ImageSampler {
    pub fn d(&self) -> usize {
        match self {
            ImageSampler::Synthetic { d, .. } => *d,
            ImageSampler::File { images, .. } => images.d,
        }
    }

    /// Draws `x_tilde ~ mu_tilde`.
    pub fn sample_clean_image<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<ImageVector> {
        match self {
            ImageSampler::Synthetic {
                basis_count,
                frequency_cap,
                amplitude,
                d,
            } => {
                let (d, amplitude) = (*d, *amplitude);
                let mut values = vec![0.0; d];
                for _ in 0..*basis_count {
                    let coefficient = rng.random_range(-amplitude..=amplitude);
                    let frequency = rng.random_range(1..=*frequency_cap) as f64;
                    let phase = rng.random_range(0.0..2.0 * PI);
                    for (i, v) in values.iter_mut().enumerate() {
                        let t = i as f64 / d as f64;
                        *v += coefficient * (2.0 * PI * frequency * t + phase).cos();
                    }
                }
                for v in &mut values {
                    *v = v.clamp(-amplitude, amplitude);
                }
                Ok(ImageVector(values))
            }
            ImageSampler::File {
                images,
                path,
                cursor,
            } => {
                let record = images.record(*cursor).ok_or_else(|| Error::Exhausted {
                    path: path.clone(),
                    count: images.count,
                })?;
                *cursor += 1;
                Ok(ImageVector(record.to_vec()))
            }
        }
    }

    /// Draws `x = x_tilde ⊛ z` with `x_tilde` and `z` independent, returning
    /// `(x, z)`. The seed is only for oracles; downstream code must recover the
    /// code through the encoder.
    pub fn sample_noised_image<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        spec: &DimensionSpec,
    ) -> Result<(ImageVector, SeedVector)> {
        check_len(spec.d(), self.d())?;
        let clean = self.sample_clean_image(rng)?;
        let z = sample_seed(rng, spec);
        let x = noise::splice(&clean, &z, spec)?;
        Ok((x, z))
    }
}

/// Sidecar describing a flat image file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatSidecar {
    pub count: usize,
    pub d: usize,
}

/// Row-major little-endian `f64` records with a JSON sidecar `{"count", "d"}`
/// stored next to the data file under the same stem with a `.json` extension.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatImages {
    pub count: usize,
    pub d: usize,
    values: Vec<f64>,
}

impl FlatImages {
    pub fn from_images(images: &[ImageVector], d: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(images.len() * d);
        for image in images {
            check_len(d, image.len())?;
            values.extend_from_slice(image.as_slice());
        }
        Ok(FlatImages {
            count: images.len(),
            d,
            values,
        })
    }

    pub fn record(&self, index: usize) -> Option<&[f64]> {
        (index < self.count).then(|| &self.values[index * self.d..(index + 1) * self.d])
    }

    pub fn images(&self) -> impl Iterator<Item = ImageVector> + '_ {
        self.values
            .chunks_exact(self.d.max(1))
            .take(self.count)
            .map(|chunk| ImageVector(chunk.to_vec()))
    }

    pub fn sidecar_path(data: &Path) -> PathBuf {
        data.with_extension("json")
    }

    pub fn write(&self, data: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(data, bytes)?;
        let sidecar = FlatSidecar {
            count: self.count,
            d: self.d,
        };
        fs::write(
            Self::sidecar_path(data),
            serde_json::to_string(&sidecar)?,
        )?;
        Ok(())
    }

    pub fn read(data: &Path) -> Result<Self> {
        let sidecar: FlatSidecar =
            serde_json::from_str(&fs::read_to_string(Self::sidecar_path(data))?)?;
        let bytes = fs::read(data)?;
        let expected = sidecar
            .count
            .checked_mul(sidecar.d)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Config("sidecar count * d overflows".into()))?;
        if bytes.len() != expected {
            let actual = (bytes.len() / 8).checked_div(sidecar.count).unwrap_or(bytes.len() / 8);
            return Err(Error::ShapeMismatch {
                path: data.to_path_buf(),
                expected: sidecar.d,
                actual,
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(FlatImages {
            count: sidecar.count,
            d: sidecar.d,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn spec(d: usize, d_tilde: usize) -> DimensionSpec {
        DimensionSpec::new(d, d_tilde, 1.0).unwrap()
    }

    #[test]
    fn spec_invariants() {
        assert!(DimensionSpec::new(4, 4, 1.0).is_err());
        assert!(DimensionSpec::new(4, 0, 1.0).is_err());
        assert!(DimensionSpec::new(2, 1, 0.0).is_err());
        assert!(DimensionSpec::new(2, 1, f64::NAN).is_err());
        let s = spec(7, 2);
        assert!(s.d_tilde() * s.stride() <= s.d());
    }

    #[test]
    fn spec_json_rejects_invalid() {
        let ok: DimensionSpec = serde_json::from_str(r#"{"d":6,"d_tilde":2}"#).unwrap();
        assert_eq!(ok.sigma(), 1.0);
        assert!(serde_json::from_str::<DimensionSpec>(r#"{"d":2,"d_tilde":2}"#).is_err());
        assert!(serde_json::from_str::<DimensionSpec>(r#"{"d":6,"d_tilde":2,"x":1}"#).is_err());
    }

    #[test]
    fn seed_moments() {
        let s = DimensionSpec::new(9, 8, 1.0).unwrap();
        let mut rng = stream(1, "seed-moments", 0);
        let n = 100_000;
        let mut sum = [0.0; 8];
        let mut sq = [0.0; 8];
        for _ in 0..n {
            let z = sample_seed(&mut rng, &s);
            for j in 0..8 {
                sum[j] += z[j];
                sq[j] += z[j] * z[j];
            }
        }
        for j in 0..8 {
            let mean = sum[j] / n as f64;
            let var = sq[j] / n as f64 - mean * mean;
            assert!(mean.abs() <= 0.02, "coordinate {j} mean {mean}");
            assert!((0.97..=1.03).contains(&var), "coordinate {j} variance {var}");
        }
    }

    #[test]
    fn seed_stream_is_deterministic() {
        let s = spec(10, 3);
        let a = sample_seed(&mut stream(5, "s", 0), &s);
        let b = sample_seed(&mut stream(5, "s", 0), &s);
        assert_eq!(a, b);
    }

    #[test]
    fn synthetic_images_are_clamped() {
        let s = spec(64, 4);
        let model = CleanImageModel {
            basis_count: 6,
            ..Default::default()
        };
        let mut sampler = model.sampler(&s).unwrap();
        let mut rng = stream(2, "img", 0);
        for _ in 0..200 {
            let x = sampler.sample_clean_image(&mut rng).unwrap();
            assert_eq!(x.len(), 64);
            assert!(x.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn zero_basis_gives_zero_image() {
        let s = spec(8, 2);
        let model = CleanImageModel {
            basis_count: 0,
            ..Default::default()
        };
        let x = model
            .sampler(&s)
            .unwrap()
            .sample_clean_image(&mut stream(0, "img", 0))
            .unwrap();
        assert_eq!(x, ImageVector::zeros(8));
    }

    #[test]
    fn noised_image_touches_only_spliced_pixels() {
        let s = spec(6, 2);
        let mut sampler = CleanImageModel::default().sampler(&s).unwrap();
        let mut rng = stream(3, "noised", 0);
        let mut replay = stream(3, "noised", 0);
        let mut replay_sampler = sampler.clone();
        for _ in 0..100 {
            let (x, z) = sampler.sample_noised_image(&mut rng, &s).unwrap();
            let clean = replay_sampler.sample_clean_image(&mut replay).unwrap();
            let _ = sample_seed(&mut replay, &s);
            assert_eq!(noise::encode(&x, &s).unwrap(), z);
            let differing: Vec<usize> = (0..6).filter(|&i| x[i] != clean[i]).collect();
            assert_eq!(differing, vec![2, 5]);
        }
    }

    #[test]
    fn spliced_pixels_carry_seed_variance() {
        let s = DimensionSpec::new(12, 3, 1.5).unwrap();
        let mut sampler = CleanImageModel::default().sampler(&s).unwrap();
        let mut rng = stream(4, "noised-var", 0);
        let positions = noise::spliced_positions(&s);
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
        for _ in 0..10_000 {
            let (x, _) = sampler.sample_noised_image(&mut rng, &s).unwrap();
            for &p in &positions {
                sum += x[p - 1];
                sq += x[p - 1] * x[p - 1];
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        let target = 1.5 * 1.5;
        assert!((var - target).abs() <= 0.05 * target, "variance {var}");
    }

    #[test]
    fn file_backed_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("images.bin");
        let images = vec![
            ImageVector::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            ImageVector::new(vec![-1.0, 0.5, 0.25, 8.0]).unwrap(),
        ];
        FlatImages::from_images(&images, 4).unwrap().write(&data).unwrap();

        let model = CleanImageModel {
            mode: ImageMode::FileBacked { path: data.clone() },
            ..Default::default()
        };
        let mut sampler = model.sampler(&spec(4, 1)).unwrap();
        let mut rng = stream(0, "file", 0);
        assert_eq!(sampler.sample_clean_image(&mut rng).unwrap(), images[0]);
        assert_eq!(sampler.sample_clean_image(&mut rng).unwrap(), images[1]);
        assert!(matches!(
            sampler.sample_clean_image(&mut rng),
            Err(Error::Exhausted { count: 2, .. })
        ));

        assert!(matches!(
            model.sampler(&spec(5, 1)),
            Err(Error::ShapeMismatch {
                expected: 5,
                actual: 4,
                ..
            })
        ));
    }

    #[test]
    fn truncated_file_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("bad.bin");
        fs::write(&data, [0u8; 8 * 7]).unwrap();
        fs::write(FlatImages::sidecar_path(&data), r#"{"count":2,"d":4}"#).unwrap();
        assert!(matches!(
            FlatImages::read(&data),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
