use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Node, Tape, Tensor, UnaryOp};
use crate::error::{Error, Result};
use crate::nn::linear::{BoundLinear, LinearLayer};
use crate::nn::params::{join, Parameters};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    fn apply<T: Scalar>(self, tape: &mut Tape<T>, x: Node) -> Result<Node> {
        let op = match self {
            Activation::Identity => return Ok(x),
            Activation::Tanh => UnaryOp::Tanh,
            Activation::Sigmoid => UnaryOp::Sigmoid,
            Activation::Relu => UnaryOp::Relu,
        };
        tape.unary(op, x)
    }
}

/// Trainable MLP mapping an observation vector to a feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder<T> {
    pub layers: Vec<(LinearLayer<T>, Activation)>,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(layers: Vec<(LinearLayer<T>, Activation)>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("encoder needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].0.output_dim() != w[1].0.input_dim() {
                return Err(Error::Dimension {
                    op: "encoder",
                    left: w[0].0.weight.shape().to_vec(),
                    right: w[1].0.weight.shape().to_vec(),
                });
            }
        }
        Ok(Self { layers })
    }

    /// Layer widths `input → widths[0] → … → widths[last]`, each followed by
    /// `activation`.
    pub fn init(input: usize, widths: &[usize], activation: Activation, rng: &mut impl Rng) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = input;
        for &w in widths {
            layers.push((LinearLayer::init(prev, w, rng), activation));
            prev = w;
        }
        Self::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].0.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.0.output_dim())
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> BoundEncoder {
        BoundEncoder {
            layers: self.layers.iter().map(|(l, a)| (l.bind(tape), *a)).collect(),
        }
    }
}

impl<T: Scalar> Parameters<T> for Encoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        for (i, (layer, _)) in self.layers.iter().enumerate() {
            layer.visit(&join(prefix, &i.to_string()), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        for (i, (layer, _)) in self.layers.iter_mut().enumerate() {
            layer.visit_mut(&join(prefix, &i.to_string()), f);
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundEncoder {
    pub layers: Vec<(BoundLinear, Activation)>,
}

impl BoundEncoder {
    pub fn nodes(&self, out: &mut Vec<Node>) {
        for (l, _) in &self.layers {
            l.nodes(out);
        }
    }
}

/// Encodes one observation. The observation enters the tape as a constant
/// leaf; gradients flow into the encoder weights.
pub fn encode<T: Scalar>(tape: &mut Tape<T>, enc: &BoundEncoder, obs: &[T]) -> Result<Node> {
    let mut x = tape.leaf_vector(obs.to_vec());
    for (layer, act) in &enc.layers {
        let y = layer.forward(tape, x)?;
        x = act.apply(tape, y)?;
    }
    Ok(x)
}
