use rand::Rng;

use crate::diffcore::{Node, Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn::params::{join, uniform_fan_in, Parameters};
use crate::scalar::Scalar;

/// Gated recurrent unit with separate input and hidden projections per gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GruCell<T> {
    pub w_ir: Tensor<T>,
    pub w_iz: Tensor<T>,
    pub w_in: Tensor<T>,
    pub w_hr: Tensor<T>,
    pub w_hz: Tensor<T>,
    pub w_hn: Tensor<T>,
    pub b_ir: Tensor<T>,
    pub b_iz: Tensor<T>,
    pub b_in: Tensor<T>,
    pub b_hr: Tensor<T>,
    pub b_hz: Tensor<T>,
    pub b_hn: Tensor<T>,
}

const NAMES: [&str; 12] = [
    "w_ir", "w_iz", "w_in", "w_hr", "w_hz", "w_hn", "b_ir", "b_iz", "b_in", "b_hr", "b_hz", "b_hn",
];

impl<T: Scalar> GruCell<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let wi = || Tensor::zeros(&[hidden, input]);
        let wh = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        Self {
            w_ir: wi(),
            w_iz: wi(),
            w_in: wi(),
            w_hr: wh(),
            w_hz: wh(),
            w_hn: wh(),
            b_ir: b(),
            b_iz: b(),
            b_in: b(),
            b_hr: b(),
            b_hz: b(),
            b_hn: b(),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut cell = Self::zeros(input, hidden);
        cell.w_ir = uniform_fan_in(rng, hidden, input);
        cell.w_iz = uniform_fan_in(rng, hidden, input);
        cell.w_in = uniform_fan_in(rng, hidden, input);
        cell.w_hr = uniform_fan_in(rng, hidden, hidden);
        cell.w_hz = uniform_fan_in(rng, hidden, hidden);
        cell.w_hn = uniform_fan_in(rng, hidden, hidden);
        cell
    }

    pub fn input_dim(&self) -> usize {
        self.w_ir.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_ir.rows()
    }

    fn blocks(&self) -> [&Tensor<T>; 12] {
        [
            &self.w_ir, &self.w_iz, &self.w_in, &self.w_hr, &self.w_hz, &self.w_hn, &self.b_ir,
            &self.b_iz, &self.b_in, &self.b_hr, &self.b_hz, &self.b_hn,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut Tensor<T>; 12] {
        [
            &mut self.w_ir,
            &mut self.w_iz,
            &mut self.w_in,
            &mut self.w_hr,
            &mut self.w_hz,
            &mut self.w_hn,
            &mut self.b_ir,
            &mut self.b_iz,
            &mut self.b_in,
            &mut self.b_hr,
            &mut self.b_hz,
            &mut self.b_hn,
        ]
    }

    /// Checks that all twelve blocks agree with `(input, hidden)`.
    pub fn validate(&self) -> Result<()> {
        let (i, h) = (self.input_dim(), self.hidden_dim());
        for (k, t) in self.blocks().iter().enumerate() {
            let expected: &[usize] = match k {
                0..=2 => &[h, i],
                3..=5 => &[h, h],
                _ => &[h],
            };
            if t.shape() != expected {
                return Err(Error::Dimension {
                    op: NAMES[k],
                    left: t.shape().to_vec(),
                    right: expected.to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> BoundGru {
        let n = self.blocks().map(|t| tape.leaf(t.clone()));
        BoundGru {
            w_ir: n[0],
            w_iz: n[1],
            w_in: n[2],
            w_hr: n[3],
            w_hz: n[4],
            w_hn: n[5],
            b_ir: n[6],
            b_iz: n[7],
            b_in: n[8],
            b_hr: n[9],
            b_hz: n[10],
            b_hn: n[11],
        }
    }
}

impl<T: Scalar> Parameters<T> for GruCell<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        for (name, t) in NAMES.iter().zip(self.blocks()) {
            f(&join(prefix, name), t);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        for (name, t) in NAMES.iter().zip(self.blocks_mut()) {
            f(&join(prefix, name), t);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundGru {
    pub w_ir: Node,
    pub w_iz: Node,
    pub w_in: Node,
    pub w_hr: Node,
    pub w_hz: Node,
    pub w_hn: Node,
    pub b_ir: Node,
    pub b_iz: Node,
    pub b_in: Node,
    pub b_hr: Node,
    pub b_hz: Node,
    pub b_hn: Node,
}

impl BoundGru {
    pub fn nodes(&self, out: &mut Vec<Node>) {
        out.extend([
            self.w_ir, self.w_iz, self.w_in, self.w_hr, self.w_hz, self.w_hn, self.b_ir, self.b_iz,
            self.b_in, self.b_hr, self.b_hz, self.b_hn,
        ]);
    }
}

fn affine<T: Scalar>(tape: &mut Tape<T>, w: Node, x: Node, b: Node) -> Result<Node> {
    let wx = tape.matmul(w, x)?;
    tape.add(wx, b)
}

/// One GRU update:
///
/// ```text
/// r  = σ(W_ir x + b_ir + W_hr h + b_hr)
/// u  = σ(W_iz x + b_iz + W_hz h + b_hz)
/// n  = tanh(W_in x + b_in + r ∘ (W_hn h + b_hn))
/// h' = (1 − u) ∘ n + u ∘ h
/// ```
///
/// The last line is evaluated as `n + u ∘ (h − n)`.
pub fn gru_step<T: Scalar>(tape: &mut Tape<T>, cell: &BoundGru, x: Node, h: Node) -> Result<Node> {
    let ir = affine(tape, cell.w_ir, x, cell.b_ir)?;
    let hr = affine(tape, cell.w_hr, h, cell.b_hr)?;
    let r_pre = tape.add(ir, hr)?;
    let r = tape.sigmoid(r_pre);

    let iz = affine(tape, cell.w_iz, x, cell.b_iz)?;
    let hz = affine(tape, cell.w_hz, h, cell.b_hz)?;
    let u_pre = tape.add(iz, hz)?;
    let u = tape.sigmoid(u_pre);

    let inn = affine(tape, cell.w_in, x, cell.b_in)?;
    let hn = affine(tape, cell.w_hn, h, cell.b_hn)?;
    let gated = tape.mul(r, hn)?;
    let n_pre = tape.add(inn, gated)?;
    let n = tape.tanh(n_pre);

    let diff = tape.sub(h, n)?;
    let mixed = tape.mul(u, diff)?;
    tape.add(n, mixed)
}
