use rand::Rng;

use crate::agent::policy::{policy_step, BoundPolicy, PolicyParams};
use crate::diffcore::{Node, Tape};
use crate::env::{Environment, Episode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trainer::entropy_of;

/// One sampled decision sequence.
///
/// `log_probs` are nodes on the tape the trajectory was produced on and stay
/// valid only while that tape lives; `log_prob_values` hold the same numbers.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub actions: Vec<usize>,
    pub log_probs: Vec<Node>,
    pub log_prob_values: Vec<T>,
    pub entropies: Vec<T>,
    pub reward: T,
    pub final_y: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Inverse-CDF draw from a categorical distribution.
pub fn sample_categorical<T: Scalar>(probs: &[T], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return i;
        }
    }
    // rounding left the total just under 1: fall back to the last bin with mass
    probs
        .iter()
        .rposition(|p| *p > T::zero())
        .unwrap_or(probs.len() - 1)
}

/// First index of the maximum.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

struct Branch<T> {
    episode: Episode<T>,
    h: Node,
    actions: Vec<usize>,
    log_probs: Vec<Node>,
    log_prob_values: Vec<T>,
    entropies: Vec<T>,
}

impl<T: Scalar> Branch<T> {
    fn new(episode: Episode<T>, h: Node) -> Self {
        Self {
            episode,
            h,
            actions: Vec::new(),
            log_probs: Vec::new(),
            log_prob_values: Vec::new(),
            entropies: Vec::new(),
        }
    }

    fn advance(
        &mut self,
        tape: &mut Tape<T>,
        policy: &BoundPolicy,
        env: &Environment<T>,
        choose: &mut impl FnMut(&[T]) -> usize,
    ) -> Result<()> {
        let obs = env.observe(&self.episode)?;
        let out = policy_step(tape, policy, &obs, self.h)?;
        let probs = tape.value(out.probs).data().to_vec();
        let a = choose(&probs);
        let lp = tape.pick(out.log_probs, a)?;
        self.log_prob_values.push(tape.value(lp).data()[0]);
        self.log_probs.push(lp);
        self.entropies.push(entropy_of(&probs));
        self.actions.push(a);
        self.h = out.h_next;
        self.episode = self.episode.rollout_step(env.actions().value(a)?)?;
        Ok(())
    }

    fn finish(self, env: &Environment<T>) -> Result<Trajectory<T>> {
        let reward = env.terminal_reward(&self.episode)?;
        Ok(Trajectory {
            actions: self.actions,
            log_probs: self.log_probs,
            log_prob_values: self.log_prob_values,
            entropies: self.entropies,
            reward,
            final_y: self.episode.y,
        })
    }
}

/// Samples `k` trajectories from the same starting episode. Each trajectory
/// keeps its own latent vector and hidden state; at every step it regenerates
/// its observation, samples an action and applies it. Randomness is consumed
/// step-major, trajectory-minor.
pub fn sample_trajectories<T: Scalar>(
    tape: &mut Tape<T>,
    policy: &BoundPolicy,
    env: &Environment<T>,
    start: &Episode<T>,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Trajectory<T>>> {
    if k < 2 {
        return Err(Error::BaselineUndefined(k));
    }
    if start.step != 0 {
        return Err(Error::Contract("trajectories must start at step 0".into()));
    }
    let mut branches: Vec<Branch<T>> = (0..k).map(|_| Branch::new(start.clone(), policy.h0)).collect();
    for _ in 0..start.len() {
        for b in &mut branches {
            b.advance(tape, policy, env, &mut |p| sample_categorical(p, rng))?;
        }
    }
    branches.into_iter().map(|b| b.finish(env)).collect()
}

/// Takes the most probable action at every step (lowest index on ties).
pub fn greedy_rollout<T: Scalar>(
    tape: &mut Tape<T>,
    policy: &BoundPolicy,
    env: &Environment<T>,
    start: &Episode<T>,
) -> Result<Trajectory<T>> {
    if start.step != 0 {
        return Err(Error::Contract("rollout must start at step 0".into()));
    }
    let mut branch = Branch::new(start.clone(), policy.h0);
    for _ in 0..start.len() {
        branch.advance(tape, policy, env, &mut |p| argmax(p))?;
    }
    branch.finish(env)
}

impl<T: Scalar> PolicyParams<T> {
    /// Greedy rollout on a private tape.
    pub fn greedy(&self, env: &Environment<T>, start: &Episode<T>) -> Result<Trajectory<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        greedy_rollout(&mut tape, &bound, env, start)
    }

    /// Action distribution at the first decision of `start`.
    pub fn first_step_probs(&self, env: &Environment<T>, start: &Episode<T>) -> Result<Vec<T>> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let obs = env.observe(start)?;
        let out = policy_step(&mut tape, &bound, &obs, bound.h0)?;
        Ok(tape.value(out.probs).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5, 0.1]), 1);
        assert_eq!(argmax(&[1.0 / 17.0; 17]), 0);
    }

    #[test]
    fn categorical_respects_point_mass() {
        let mut rng = crate::seeding::rng_for(0, &[]);
        let mut p = [0.0f64; 17];
        p[5] = 1.0;
        for _ in 0..100 {
            assert_eq!(sample_categorical(&p, &mut rng), 5);
        }
    }
}
