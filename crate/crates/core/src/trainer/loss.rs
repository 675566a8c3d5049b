use crate::agent::Trajectory;
use crate::diffcore::{Node, Tape};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reference point subtracted from each trajectory's return.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    /// Mean terminal reward of the K trajectories sampled from one start.
    MeanOfK,
    /// No baseline; only used to measure what the baseline buys.
    None,
}

/// Per-action weight of `∇ log π(a|s)`:
/// `Q̂ − b − α·(1 + log π(a|s))`. It is used as a constant; no gradient
/// flows through it.
#[inline]
pub fn advantage_coef<T: Scalar>(ret: T, baseline: T, alpha: T, log_prob: T) -> T {
    ret - baseline - alpha * (T::one() + log_prob)
}

/// Soft policy-gradient surrogate with the mean-of-K self-critical baseline.
///
/// With terminal-only rewards and no discounting every step of trajectory
/// `k` has return `R_k`, so the loss is
/// `−1/(K·T) · Σ_k Σ_t coef_{k,t} · log π(a_{k,t}|s_{k,t})`.
/// `alpha = 0` gives the vanilla policy gradient.
pub fn soft_pg_loss<T: Scalar>(
    tape: &mut Tape<T>,
    trajectories: &[Trajectory<T>],
    alpha: T,
) -> Result<Node> {
    surrogate_loss(tape, trajectories, alpha, Baseline::MeanOfK)
}

pub fn surrogate_loss<T: Scalar>(
    tape: &mut Tape<T>,
    trajectories: &[Trajectory<T>],
    alpha: T,
    baseline: Baseline,
) -> Result<Node> {
    let k = trajectories.len();
    match baseline {
        Baseline::MeanOfK if k < 2 => return Err(Error::BaselineUndefined(k)),
        Baseline::None if k == 0 => return Err(Error::Contract("no trajectories".into())),
        _ => {}
    }
    let steps = trajectories[0].len();
    if steps == 0 || trajectories.iter().any(|t| t.len() != steps) {
        return Err(Error::Contract(
            "trajectories must be non-empty and of equal length".into(),
        ));
    }
    let b = match baseline {
        Baseline::MeanOfK => {
            trajectories.iter().map(|t| t.reward).sum::<T>() / T::from_usize(k).unwrap()
        }
        Baseline::None => T::zero(),
    };
    let norm = T::from_usize(k * steps).unwrap();
    let mut terms = Vec::with_capacity(k * steps);
    for traj in trajectories {
        for (&lp, &lp_value) in traj.log_probs.iter().zip(&traj.log_prob_values) {
            let coef = advantage_coef(traj.reward, b, alpha, lp_value);
            terms.push(tape.scale(lp, -coef / norm));
        }
    }
    tape.add_n(&terms)
}

/// Shannon entropy in nats, with `0·log 0 = 0`.
pub fn entropy_of<T: Scalar>(probs: &[T]) -> T {
    -probs
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| p * p.ln())
        .sum::<T>()
}
