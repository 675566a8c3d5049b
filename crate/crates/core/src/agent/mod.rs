//! Sequential policy over discretized attribute values: observation →
//! encoder → GRU → head → softmax, with K-way sampling for training and
//! greedy decoding for inference.

mod action;
mod checkpoint;
mod policy;
mod rollout;

pub use action::ActionSpace;
pub use checkpoint::Checkpoint;
pub use policy::{policy_step, BoundPolicy, PolicyConfig, PolicyParams, PolicyStep};
pub use rollout::{argmax, greedy_rollout, sample_categorical, sample_trajectories, Trajectory};
