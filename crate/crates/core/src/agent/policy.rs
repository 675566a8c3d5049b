use serde::{Deserialize, Serialize};

use crate::diffcore::{Node, Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn::{
    encode, gru_step, join, Activation, BoundEncoder, BoundGru, BoundLinear, Encoder, GruCell,
    LinearLayer, Parameters,
};
use crate::scalar::Scalar;
use crate::seeding::{rng_for, STREAM_INIT};

/// Network sizes. The observation width and the number of action bins come
/// from the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    /// Number of encoder layers, each `feature_dim` wide.
    pub encoder_layers: usize,
    pub activation: Activation,
    /// Start the output head at zero so the initial policy is uniform.
    pub zero_head: bool,
}

impl PolicyConfig {
    pub fn desk() -> Self {
        Self {
            feature_dim: 32,
            hidden_dim: 64,
            encoder_layers: 2,
            activation: Activation::Tanh,
            zero_head: true,
        }
    }

    pub fn paper() -> Self {
        Self {
            feature_dim: 512,
            hidden_dim: 512,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.hidden_dim == 0 || self.encoder_layers == 0 {
            return Err(Error::Config("policy sizes must be positive".into()));
        }
        Ok(())
    }
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Encoder, GRU cell, output head and learnable initial hidden state.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams<T> {
    pub encoder: Encoder<T>,
    pub gru: GruCell<T>,
    pub head: LinearLayer<T>,
    pub h0: Tensor<T>,
}

impl<T: Scalar> PolicyParams<T> {
    /// Weights uniform in `±1/√fan_in` from a generator seeded by `seed`;
    /// biases and `h0` zero.
    pub fn init(obs_dim: usize, n_bins: usize, cfg: &PolicyConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_for(seed, &[STREAM_INIT]);
        let widths = vec![cfg.feature_dim; cfg.encoder_layers];
        let encoder = Encoder::init(obs_dim, &widths, cfg.activation, &mut rng)?;
        let gru = GruCell::init(cfg.feature_dim, cfg.hidden_dim, &mut rng);
        let head = if cfg.zero_head {
            LinearLayer::zeros(cfg.hidden_dim, n_bins)
        } else {
            LinearLayer::init(cfg.hidden_dim, n_bins, &mut rng)
        };
        Ok(Self {
            encoder,
            gru,
            head,
            h0: Tensor::zeros(&[cfg.hidden_dim]),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn n_bins(&self) -> usize {
        self.head.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.gru.validate()?;
        let f = self.encoder.output_dim();
        if self.gru.input_dim() != f
            || self.head.input_dim() != self.gru.hidden_dim()
            || self.h0.shape() != [self.gru.hidden_dim()]
        {
            return Err(Error::Dimension {
                op: "policy",
                left: vec![f, self.gru.hidden_dim()],
                right: vec![self.gru.input_dim(), self.head.input_dim(), self.h0.len()],
            });
        }
        Ok(())
    }

    /// Registers every parameter as a leaf on `tape`, in visit order.
    pub fn bind(&self, tape: &mut Tape<T>) -> BoundPolicy {
        let encoder = self.encoder.bind(tape);
        let gru = self.gru.bind(tape);
        let head = self.head.bind(tape);
        let h0 = tape.leaf(self.h0.clone());
        BoundPolicy {
            encoder,
            gru,
            head,
            h0,
        }
    }
}

impl<T: Scalar> Parameters<T> for PolicyParams<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.gru.visit(&join(prefix, "gru"), f);
        self.head.visit(&join(prefix, "head"), f);
        f(&join(prefix, "h0"), &self.h0);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
        self.gru.visit_mut(&join(prefix, "gru"), f);
        self.head.visit_mut(&join(prefix, "head"), f);
        f(&join(prefix, "h0"), &mut self.h0);
    }
}

/// Policy parameters registered on one tape.
#[derive(Clone, Debug)]
pub struct BoundPolicy {
    pub encoder: BoundEncoder,
    pub gru: BoundGru,
    pub head: BoundLinear,
    pub h0: Node,
}

impl BoundPolicy {
    /// Parameter nodes in the same order as [`PolicyParams`]'s blocks.
    pub fn nodes(&self) -> Vec<Node> {
        let mut out = Vec::new();
        self.encoder.nodes(&mut out);
        self.gru.nodes(&mut out);
        self.head.nodes(&mut out);
        out.push(self.h0);
        out
    }
}

/// Output of one decision step.
#[derive(Clone, Copy, Debug)]
pub struct PolicyStep {
    pub logits: Node,
    pub probs: Node,
    pub log_probs: Node,
    pub h_next: Node,
}

/// `probs = softmax(head(gru(encode(obs), h)))`.
pub fn policy_step<T: Scalar>(
    tape: &mut Tape<T>,
    policy: &BoundPolicy,
    obs: &[T],
    h: Node,
) -> Result<PolicyStep> {
    let features = encode(tape, &policy.encoder, obs)?;
    let h_next = gru_step(tape, &policy.gru, features, h)?;
    let logits = policy.head.forward(tape, h_next)?;
    if !tape.value(logits).is_finite() {
        let norm = |v: &[T]| v.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt();
        return Err(Error::Numeric {
            context: format!(
                "policy logits (|obs| = {:.6e}, |h| = {:.6e}, |features| = {:.6e})",
                norm(obs),
                norm(tape.value(h).data()),
                norm(tape.value(features).data()),
            ),
        });
    }
    let probs = tape.softmax(logits)?;
    let log_probs = tape.log_softmax(logits)?;
    Ok(PolicyStep {
        logits,
        probs,
        log_probs,
        h_next,
    })
}
