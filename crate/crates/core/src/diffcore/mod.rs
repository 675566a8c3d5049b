//! Minimal tape-based reverse-mode differentiation over rank-1 and rank-2
//! arrays.
//!
//! Only scalar-by-tensor broadcasting exists, and it must be requested
//! explicitly through [`Tape::scale`] or [`Tape::scale_by`]. Every other
//! binary op requires identical shapes.

mod tape;
mod tensor;

pub use tape::{log_sum_exp, sigmoid, softmax_values, BinaryOp, Node, Tape, UnaryOp};
pub use tensor::Tensor;
