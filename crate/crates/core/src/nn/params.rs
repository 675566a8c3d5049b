use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Node, Tape, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A set of named parameter blocks with a fixed registration order.
///
/// `visit`, `visit_mut` and the matching `bind` of each implementor must walk
/// blocks in the same order; flattening, optimizer state and gradient
/// gathering all rely on it.
pub trait Parameters<T: Scalar> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>));
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Positions of each named block inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParamLayout {
    pub blocks: Vec<ParamBlock>,
}

impl ParamLayout {
    pub fn of<T: Scalar>(params: &impl Parameters<T>) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        params.visit("", &mut |name, t| {
            blocks.push(ParamBlock {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset,
                len: t.len(),
            });
            offset += t.len();
        });
        Self { blocks }
    }

    pub fn total(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len)
    }

    /// Block that owns flat index `index`.
    pub fn block_of(&self, index: usize) -> Option<&ParamBlock> {
        self.blocks
            .iter()
            .find(|b| index >= b.offset && index < b.offset + b.len)
    }
}

pub fn flatten<T: Scalar>(params: &impl Parameters<T>) -> Vec<T> {
    let mut out = Vec::new();
    params.visit("", &mut |_, t| out.extend_from_slice(t.data()));
    out
}

/// Overwrites every block from a flat vector produced by [`flatten`].
pub fn load_flat<T: Scalar>(params: &mut impl Parameters<T>, flat: &[T]) -> Result<()> {
    let total = ParamLayout::of(params).total();
    if total != flat.len() {
        return Err(Error::Dimension {
            op: "load_flat",
            left: vec![total],
            right: vec![flat.len()],
        });
    }
    let mut offset = 0;
    params.visit_mut("", &mut |_, t| {
        let n = t.len();
        t.data_mut().copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    });
    Ok(())
}

/// Gathers the gradients of bound parameter nodes into one flat vector.
pub fn gather_grads<T: Scalar>(tape: &Tape<T>, nodes: &[Node]) -> Vec<T> {
    let mut out = Vec::new();
    for &n in nodes {
        out.extend_from_slice(tape.grad(n).data());
    }
    out
}

/// Weight matrix `[rows × cols]` with entries uniform in `±1/√cols`.
pub fn uniform_fan_in<T: Scalar>(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor<T> {
    let bound = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::lit(rng.random_range(-bound..=bound)))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}
