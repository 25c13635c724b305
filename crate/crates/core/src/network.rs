//! Bias-free fully connected networks.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;


#[allow(unused_imports)]
use num_traits::Float;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    TanhSigmoid,
    LogSigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::TanhSigmoid => x.tanh(),
            Activation::LogSigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::TanhSigmoid => 1.0 - y * y,
            Activation::LogSigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::TanhSigmoid => "tansig",
            Activation::LogSigmoid => "logsig",
            Activation::Identity => "purelin",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tansig" | "tanh" => Ok(Activation::TanhSigmoid),
            "logsig" | "sigmoid" => Ok(Activation::LogSigmoid),
            "purelin" | "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unsupported activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: DenseMatrix, activation: Activation) -> Self {
        Self { weights, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// `y = F_n W_n ⋯ F_1 W_1 x`. Layers chain: `layers[i].weights.rows() ==
/// layers[i + 1].weights.cols()`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardNet {
    layers: Vec<Layer>,
}

impl FeedForwardNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Structure("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Structure(format!(
                    "layer {} outputs {} values but layer {} takes {}",
                    i + 1,
                    pair[0].output_dim(),
                    i + 2,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Copy with the weights of layer `index` (0-based) replaced.
    pub fn with_weights(&self, index: usize, weights: DenseMatrix) -> Result<Self> {
        let mut layers = self.layers.clone();
        let slot = layers
            .get_mut(index)
            .ok_or_else(|| Error::Config(format!("no layer at index {index}")))?;
        slot.weights = weights;
        Self::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_broken_chaining() {
        let l1 = Layer::new(DenseMatrix::zeros(3, 4), Activation::TanhSigmoid);
        let l2 = Layer::new(DenseMatrix::zeros(2, 5), Activation::LogSigmoid);
        assert!(matches!(FeedForwardNet::new(alloc::vec![l1.clone(), l2]), Err(Error::Structure(_))));
        let l2 = Layer::new(DenseMatrix::zeros(2, 3), Activation::LogSigmoid);
        let net = FeedForwardNet::new(alloc::vec![l1, l2]).unwrap();
        assert_eq!((net.input_dim(), net.output_dim(), net.depth()), (4, 2, 2));
    }

    #[test]
    fn activation_tags_round_trip() {
        for a in [Activation::TanhSigmoid, Activation::LogSigmoid, Activation::Identity] {
            assert_eq!(a.tag().parse::<Activation>().unwrap(), a);
        }
        assert!("relu".parse::<Activation>().is_err());
    }
}
