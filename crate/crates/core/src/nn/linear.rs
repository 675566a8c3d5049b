use rand::Rng;

use crate::diffcore::{Node, Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn::params::{join, uniform_fan_in, Parameters};
use crate::scalar::Scalar;

/// Affine map `W·x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLayer<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> LinearLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.rank() != 2 || bias.rank() != 1 || bias.len() != weight.rows() {
            return Err(Error::Dimension {
                op: "linear",
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: uniform_fan_in(rng, output, input),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> BoundLinear {
        BoundLinear {
            weight: tape.leaf(self.weight.clone()),
            bias: tape.leaf(self.bias.clone()),
        }
    }
}

impl<T: Scalar> Parameters<T> for LinearLayer<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

/// A [`LinearLayer`] whose parameters live on a tape.
#[derive(Clone, Copy, Debug)]
pub struct BoundLinear {
    pub weight: Node,
    pub bias: Node,
}

impl BoundLinear {
    pub fn nodes(&self, out: &mut Vec<Node>) {
        out.extend([self.weight, self.bias]);
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, x: Node) -> Result<Node> {
        linear_forward(tape, self, x)
    }
}

pub fn linear_forward<T: Scalar>(tape: &mut Tape<T>, layer: &BoundLinear, x: Node) -> Result<Node> {
    let wx = tape.matmul(layer.weight, x)?;
    tape.add(wx, layer.bias)
}
