use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// One sparse affine layer followed by an activation.
///
/// `rows` is the output width and `cols` the input width. Forward evaluation
/// starts from the bias and accumulates contributions column by column in
/// increasing column order, skipping columns whose input is exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer", into = "RawLayer")]
pub struct Layer {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
    activation: Activation,
    // column-major view of `triplets`: col_start[c]..col_start[c + 1]
    col_start: Vec<usize>,
    col_entries: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
    activation: Activation,
}

impl TryFrom<RawLayer> for Layer {
    type Error = Error;

    fn try_from(raw: RawLayer) -> Result<Self> {
        Layer::new(raw.rows, raw.cols, raw.triplets, raw.bias, raw.activation)
    }
}

impl From<Layer> for RawLayer {
    fn from(layer: Layer) -> Self {
        RawLayer {
            rows: layer.rows,
            cols: layer.cols,
            triplets: layer.triplets,
            bias: layer.bias,
            activation: layer.activation,
        }
    }
}

impl Layer {
    pub fn new(
        rows: usize,
        cols: usize,
        triplets: Vec<(usize, usize, f64)>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if bias.len() != rows {
            return Err(Error::InvalidNetwork(format!(
                "bias has length {} but layer has {rows} rows",
                bias.len()
            )));
        }
        if let Some(i) = bias.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidNetwork(format!("bias[{i}] is not finite")));
        }
        let mut seen = HashSet::with_capacity(triplets.len());
        let mut per_col = vec![0usize; cols + 1];
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidNetwork(format!(
                    "triplet ({r}, {c}) outside a {rows}x{cols} layer"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidNetwork(format!("weight ({r}, {c}) is not finite")));
            }
            if !seen.insert((r, c)) {
                return Err(Error::InvalidNetwork(format!("duplicate triplet ({r}, {c})")));
            }
            per_col[c + 1] += 1;
        }
        for c in 0..cols {
            per_col[c + 1] += per_col[c];
        }
        let col_start = per_col;
        let mut fill = col_start.clone();
        let mut col_entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in &triplets {
            col_entries[fill[c]] = (r, v);
            fill[c] += 1;
        }
        Ok(Layer {
            rows,
            cols,
            triplets,
            bias,
            activation,
            col_start,
            col_entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn nonzero_weights(&self) -> usize {
        self.triplets.iter().filter(|t| t.2 != 0.0).count()
    }

    pub fn nonzero_biases(&self) -> usize {
        self.bias.iter().filter(|&&b| b != 0.0).count()
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (c, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for &(r, v) in &self.col_entries[self.col_start[c]..self.col_start[c + 1]] {
                out[r] += v * x;
            }
        }
        if self.activation == Activation::Relu {
            for y in out.iter_mut() {
                *y = y.max(0.0);
            }
        }
    }
}

/// A layered sparse network of affine maps with ReLU or identity activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct ReluNetwork {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<Layer>,
}

impl TryFrom<RawNetwork> for ReluNetwork {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        let net = ReluNetwork::new(raw.input_dim, raw.layers)?;
        if net.output_dim != raw.output_dim {
            return Err(Error::InvalidNetwork(format!(
                "declared output_dim {} but layers produce {}",
                raw.output_dim, net.output_dim
            )));
        }
        Ok(net)
    }
}

impl From<ReluNetwork> for RawNetwork {
    fn from(net: ReluNetwork) -> Self {
        RawNetwork {
            input_dim: net.input_dim,
            output_dim: net.output_dim,
            layers: net.layers,
        }
    }
}

impl ReluNetwork {
    /// Chains `layers` starting from `input_dim`. An empty layer list is the
    /// identity map on `R^input_dim`.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.cols != width {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i} expects {} inputs but receives {width}",
                    layer.cols
                )));
            }
            width = layer.rows;
        }
        Ok(ReluNetwork {
            input_dim,
            output_dim: width,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_dim, input.len())?;
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.apply(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Count of stored weights with a non-zero value; biases are not included.
    pub fn nonzero_weights(&self) -> usize {
        self.layers.iter().map(Layer::nonzero_weights).sum()
    }

    pub fn nonzero_biases(&self) -> usize {
        self.layers.iter().map(Layer::nonzero_biases).sum()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.triplets.iter().map(|t| t.2.abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity(n: usize) -> ReluNetwork {
        let layer = Layer::new(
            n,
            n,
            (0..n).map(|i| (i, i, 1.0)).collect(),
            vec![0.0; n],
            Activation::Identity,
        )
        .unwrap();
        ReluNetwork::new(n, vec![layer]).unwrap()
    }

    fn abs_gadget() -> ReluNetwork {
        let split = Layer::new(
            2,
            1,
            vec![(0, 0, 1.0), (1, 0, -1.0)],
            vec![0.0; 2],
            Activation::Relu,
        )
        .unwrap();
        let sum = Layer::new(
            1,
            2,
            vec![(0, 0, 1.0), (0, 1, 1.0)],
            vec![0.0],
            Activation::Identity,
        )
        .unwrap();
        ReluNetwork::new(1, vec![split, sum]).unwrap()
    }

    #[test]
    fn identity_network() {
        let net = identity(3);
        assert_eq!(net.forward(&[1.5, -2.0, 0.0]).unwrap(), vec![1.5, -2.0, 0.0]);
    }

    #[test]
    fn single_relu_unit() {
        let layer = Layer::new(1, 1, vec![(0, 0, 1.0)], vec![0.0], Activation::Relu).unwrap();
        let net = ReluNetwork::new(1, vec![layer]).unwrap();
        assert_eq!(net.forward(&[-5.0]).unwrap(), vec![0.0]);
        assert_eq!(net.forward(&[5.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn abs_via_two_relus() {
        let net = abs_gadget();
        for t in [-3.0, 0.0, 2.5] {
            assert_eq!(net.forward(&[t]).unwrap(), vec![f64::abs(t)]);
        }
    }

    #[test]
    fn empty_network() {
        let net = ReluNetwork::new(4, vec![]).unwrap();
        assert_eq!(net.nonzero_weights(), 0);
        assert_eq!(net.output_dim(), 4);
    }

    #[test]
    fn rejects_malformed_layers() {
        assert!(Layer::new(1, 1, vec![(0, 0, 1.0), (0, 0, 2.0)], vec![0.0], Activation::Relu).is_err());
        assert!(Layer::new(1, 1, vec![(1, 0, 1.0)], vec![0.0], Activation::Relu).is_err());
        assert!(Layer::new(1, 1, vec![(0, 0, f64::NAN)], vec![0.0], Activation::Relu).is_err());
        assert!(Layer::new(2, 1, vec![], vec![0.0], Activation::Relu).is_err());
        let a = Layer::new(2, 3, vec![], vec![0.0; 2], Activation::Relu).unwrap();
        let b = Layer::new(1, 3, vec![], vec![0.0], Activation::Relu).unwrap();
        assert!(ReluNetwork::new(3, vec![a, b]).is_err());
    }

    #[test]
    fn forward_rejects_wrong_input() {
        assert!(matches!(
            identity(3).forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn zero_weights_not_counted() {
        let layer = Layer::new(2, 2, vec![(0, 0, 0.0), (1, 1, 3.0)], vec![0.0; 2], Activation::Identity)
            .unwrap();
        assert_eq!(ReluNetwork::new(2, vec![layer]).unwrap().nonzero_weights(), 1);
    }

    #[test]
    fn json_shape() {
        let json = abs_gadget().to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["input_dim"], 1);
        assert_eq!(value["output_dim"], 1);
        assert_eq!(value["layers"][0]["activation"], "relu");
        assert_eq!(value["layers"][0]["triplets"][1], serde_json::json!([1, 0, -1.0]));
        assert_eq!(value["layers"][1]["activation"], "identity");
    }

    #[test]
    fn json_rejects_wrong_output_dim() {
        let mut value: serde_json::Value = serde_json::from_str(&abs_gadget().to_json().unwrap()).unwrap();
        value["output_dim"] = 2.into();
        assert!(ReluNetwork::from_json(&value.to_string()).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(
            weights in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL, 6),
            bias in prop::collection::vec(-1e300f64..1e300, 2),
            input in prop::collection::vec(-1e3f64..1e3, 3),
        ) {
            let triplets = (0..6).map(|i| (i % 2, i / 2, weights[i])).collect();
            let layer = Layer::new(2, 3, triplets, bias, Activation::Relu).unwrap();
            let net = ReluNetwork::new(3, vec![layer]).unwrap();
            let back = ReluNetwork::from_json(&net.to_json().unwrap()).unwrap();
            prop_assert_eq!(&back, &net);
            let a: Vec<u64> = net.forward(&input).unwrap().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.forward(&input).unwrap().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
