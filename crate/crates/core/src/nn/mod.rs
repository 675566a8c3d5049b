//! Policy-network building blocks: affine layers, the GRU cell and the
//! observation encoder, plus the parameter registry the optimizer walks.

mod encoder;
mod gru;
mod linear;
mod params;

pub use encoder::{encode, Activation, BoundEncoder, Encoder};
pub use gru::{gru_step, BoundGru, GruCell};
pub use linear::{linear_forward, BoundLinear, LinearLayer};
pub use params::{
    flatten, gather_grads, load_flat, uniform_fan_in, ParamBlock, ParamLayout, Parameters,
};
pub(crate) use params::join;
