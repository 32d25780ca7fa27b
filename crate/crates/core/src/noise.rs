//! The splice operator and the noise-extracting encoder.
//!
//! Positions are 1-based throughout the public API: the `j`-th seed
//! coordinate lives at pixel `j * floor(d / d_tilde)` for `j = 1..=d_tilde`.
//! When `d_tilde` does not divide `d` the trailing pixels are never spliced.

use crate::distributions::{DimensionSpec, ImageVector, SeedVector};
use crate::error::{check_len, Result};
use crate::relu::{Activation, Layer, ReluNetwork};

/// 1-based pixel positions overwritten by the seed, strictly increasing.
pub fn spliced_positions(spec: &DimensionSpec) -> Vec<usize> {
    let stride = spec.stride();
    (1..=spec.d_tilde()).map(|j| j * stride).collect()
}

/// Boolean mask over 0-based pixels, true where a seed coordinate is spliced.
pub fn spliced_mask(spec: &DimensionSpec) -> Vec<bool> {
    let mut mask = vec![false; spec.d()];
    for p in spliced_positions(spec) {
        mask[p - 1] = true;
    }
    mask
}

/// 0-based indices of pixels that are never spliced, in increasing order.
pub fn kept_indices(spec: &DimensionSpec) -> Vec<usize> {
    spliced_mask(spec)
        .iter()
        .enumerate()
        .filter_map(|(i, &spliced)| (!spliced).then_some(i))
        .collect()
}

/// `x_tilde ⊛ z`: copies `x_tilde` and overwrites the spliced pixels with `z`.
pub fn splice(x_tilde: &ImageVector, z: &SeedVector, spec: &DimensionSpec) -> Result<ImageVector> {
    check_len(spec.d(), x_tilde.len())?;
    check_len(spec.d_tilde(), z.len())?;
    let mut out = x_tilde.clone();
    splice_in_place(out.as_mut_slice(), z.as_slice(), spec);
    Ok(out)
}

pub(crate) fn splice_in_place(x: &mut [f64], z: &[f64], spec: &DimensionSpec) {
    let stride = spec.stride();
    for (j, &value) in z.iter().enumerate() {
        x[(j + 1) * stride - 1] = value;
    }
}

/// The encoder `E`: reads the spliced pixels back out.
pub fn encode(x: &ImageVector, spec: &DimensionSpec) -> Result<SeedVector> {
    check_len(spec.d(), x.len())?;
    Ok(SeedVector::from_vec_unchecked(encode_slice(
        x.as_slice(),
        spec,
    )))
}

pub(crate) fn encode_slice(x: &[f64], spec: &DimensionSpec) -> Vec<f64> {
    let stride = spec.stride();
    (1..=spec.d_tilde()).map(|j| x[j * stride - 1]).collect()
}

/// The encoder as a one-layer linear network: output `j` is wired to its
/// spliced pixel with a single weight of 1, so the network has exactly
/// `d_tilde` non-zero weights.
pub fn encoder_as_network(spec: &DimensionSpec) -> ReluNetwork {
    let triplets = spliced_positions(spec)
        .into_iter()
        .enumerate()
        .map(|(j, p)| (j, p - 1, 1.0))
        .collect();
    let layer = Layer::new(
        spec.d_tilde(),
        spec.d(),
        triplets,
        vec![0.0; spec.d_tilde()],
        Activation::Identity,
    )
    .expect("encoder layer is well formed");
    ReluNetwork::new(spec.d(), vec![layer]).expect("encoder network is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_seed, CleanImageModel};
    use crate::rng::stream;
    use proptest::prelude::*;

    fn spec(d: usize, d_tilde: usize) -> DimensionSpec {
        DimensionSpec::new(d, d_tilde, 1.0).unwrap()
    }

    fn image(values: &[f64]) -> ImageVector {
        ImageVector::new(values.to_vec()).unwrap()
    }

    fn seed(values: &[f64]) -> SeedVector {
        SeedVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn positions() {
        assert_eq!(spliced_positions(&spec(6, 2)), vec![3, 6]);
        assert_eq!(spliced_positions(&spec(7, 2)), vec![3, 6]);
        assert_eq!(spliced_positions(&spec(5, 3)), vec![1, 2, 3]);
        assert_eq!(kept_indices(&spec(6, 2)), vec![0, 1, 3, 4]);
    }

    #[test]
    fn splice_examples() {
        let s = spec(6, 2);
        let x = image(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = splice(&x, &seed(&[9.0, 8.0]), &s).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0, 9.0, 4.0, 5.0, 8.0]);
        assert_eq!(splice(&x, &encode(&x, &s).unwrap(), &s).unwrap(), x);
        let twice = splice(&out, &seed(&[-1.0, -2.0]), &s).unwrap();
        assert_eq!(twice, splice(&x, &seed(&[-1.0, -2.0]), &s).unwrap());
    }

    #[test]
    fn encode_examples() {
        let s = spec(6, 2);
        let x = image(&[1.0, 2.0, 9.0, 4.0, 5.0, 8.0]);
        assert_eq!(encode(&x, &s).unwrap().as_slice(), &[9.0, 8.0]);
        assert_eq!(encode(&ImageVector::zeros(6), &s).unwrap(), SeedVector::zeros(2));
    }

    #[test]
    fn dimension_mismatch() {
        let s = spec(6, 2);
        assert!(splice(&ImageVector::zeros(5), &SeedVector::zeros(2), &s).is_err());
        assert!(splice(&ImageVector::zeros(6), &SeedVector::zeros(3), &s).is_err());
        assert!(encode(&ImageVector::zeros(7), &s).is_err());
    }

    #[test]
    fn round_trip_many_draws() {
        let s = spec(12, 5);
        let mut sampler = CleanImageModel::default().sampler(&s).unwrap();
        let mut rng = stream(11, "rt", 0);
        for _ in 0..10_000 {
            let clean = sampler.sample_clean_image(&mut rng).unwrap();
            let z = sample_seed(&mut rng, &s);
            let x = splice(&clean, &z, &s).unwrap();
            assert_eq!(encode(&x, &s).unwrap(), z);
        }
    }

    #[test]
    fn encoder_network_weights() {
        let net = encoder_as_network(&spec(6, 2));
        assert_eq!(net.nonzero_weights(), 2);
        assert!(net.layers()[0].triplets().iter().all(|&(_, _, v)| v == 1.0));
        assert_eq!(encoder_as_network(&spec(1024, 64)).nonzero_weights(), 64);
    }

    #[test]
    fn encoder_network_matches_encode() {
        let s = spec(40, 7);
        let net = encoder_as_network(&s);
        let mut rng = stream(12, "enc-net", 0);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..40).map(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)).collect();
            let x = image(&x);
            assert_eq!(
                net.forward(x.as_slice()).unwrap(),
                encode(&x, &s).unwrap().into_inner()
            );
        }
    }

    proptest! {
        #[test]
        fn splice_round_trip_and_non_interference(
            (d, d_tilde) in (2usize..40).prop_flat_map(|d| (Just(d), 1..d)),
            fill in -100.0f64..100.0,
            code in prop::collection::vec(-10.0f64..10.0, 40),
        ) {
            let s = spec(d, d_tilde);
            let clean: Vec<f64> = (0..d).map(|i| fill + i as f64).collect();
            let clean = image(&clean);
            let z = seed(&code[..d_tilde]);
            let x = splice(&clean, &z, &s).unwrap();
            prop_assert_eq!(encode(&x, &s).unwrap(), z);
            let mask = spliced_mask(&s);
            for i in 0..d {
                if !mask[i] {
                    prop_assert_eq!(x[i].to_bits(), clean[i].to_bits());
                }
            }
            prop_assert_eq!(encoder_as_network(&s).nonzero_weights(), d_tilde);
        }
    }
}
