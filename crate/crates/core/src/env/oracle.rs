use serde::{Deserialize, Serialize};

use crate::env::{Environment, Episode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_ORACLE_ATTRIBUTES: usize = 4;

/// Exact maximizer of the terminal reward over the action grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub best_score: f64,
    pub evaluations: u64,
}

/// Exhaustively scores every grid assignment of the scheduled attributes of
/// `start` (which must be at step 0). Index tuples are visited in
/// lexicographic order and only a strictly better score replaces the
/// incumbent, so ties resolve to the smallest tuple.
pub fn grid_optimum<T: Scalar>(env: &Environment<T>, start: &Episode<T>) -> Result<GridOptimum> {
    let len = start.len();
    let bins = env.actions().n_bins;
    if len > MAX_ORACLE_ATTRIBUTES {
        return Err(Error::ScheduleTooLong {
            len,
            evaluations: (bins as u64).saturating_pow(len as u32),
        });
    }
    if start.step != 0 {
        return Err(Error::Contract("grid_optimum needs an episode at step 0".into()));
    }
    let slots = start.scheduled_indices();
    let grid: Vec<T> = env.actions().values().into_iter().map(T::lit).collect();
    let mut y = start.y.clone();
    let mut idx = vec![0usize; len];
    let mut best: Option<(Vec<usize>, T)> = None;
    let mut evaluations = 0u64;
    loop {
        for (&slot, &a) in slots.iter().zip(&idx) {
            y[slot] = grid[a];
        }
        let r = env.reward_of(&start.epsilon, &y)?;
        evaluations += 1;
        if best.as_ref().is_none_or(|(_, b)| r > *b) {
            best = Some((idx.clone(), r));
        }
        // odometer, last position fastest
        let mut k = len;
        loop {
            if k == 0 {
                let (indices, score) = best.expect("at least one evaluation");
                let values = indices.iter().map(|&a| grid[a].as_f64()).collect();
                return Ok(GridOptimum {
                    indices,
                    values,
                    best_score: score.as_f64(),
                    evaluations,
                });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < bins {
                break;
            }
            idx[k] = 0;
        }
    }
}
