//! Finite-difference audit of the full soft policy-gradient surrogate.
//!
//! Actions and per-step coefficients are sampled once and frozen. The loss
//! is then a deterministic function of the parameters (observations depend
//! only on the frozen actions), so tape gradients can be compared against
//! central differences block by block.

use serde::{Deserialize, Serialize};

use crate::agent::{
    policy_step, sample_trajectories, BoundPolicy, PolicyConfig, PolicyParams, Trajectory,
};
use crate::diffcore::Tape;
use crate::env::{AttributeId, AttributeSchedule, EnvSpec, Environment, Episode};
use crate::error::{Error, Result};
use crate::nn::{flatten, gather_grads, load_flat, Activation, ParamLayout};
use crate::seeding::{rng_for, STREAM_TRAIN};
use crate::trainer::{surrogate_loss, Baseline};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub k: usize,
    pub alpha: f64,
    pub step: f64,
    pub tolerance: f64,
    pub floor: f64,
    /// Negate the analytic gradient of this block before comparing.
    #[serde(default)]
    pub sign_flip: Option<String>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            k: 3,
            alpha: 0.05,
            step: 1e-5,
            tolerance: 1e-3,
            floor: 1e-8,
            sign_flip: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub name: String,
    pub len: usize,
    pub max_abs_error: f64,
    pub scale: f64,
    pub rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub config: GradcheckConfig,
    pub blocks: Vec<BlockCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }
}

/// Environment with D = 4, two layers of two dims, and a two-step schedule.
pub fn tiny_env(seed: u64) -> Result<Environment<f64>> {
    Environment::from_spec(&EnvSpec {
        seed,
        obs_dim: 4,
        eps_dim: 2,
        dims_per_layer: 2,
        n_layers: 2,
        n_probe: 3,
        schedule: AttributeSchedule::new(vec![AttributeId::new(1, 1), AttributeId::new(2, 2)])?,
        ..EnvSpec::default()
    })
}

/// Encoder width 3, hidden width 3, non-zero head.
pub fn tiny_policy_config() -> PolicyConfig {
    PolicyConfig {
        feature_dim: 3,
        hidden_dim: 3,
        encoder_layers: 2,
        activation: Activation::Tanh,
        zero_head: false,
    }
}

/// Sampled trajectories reduced to what the replay needs.
#[derive(Clone, Debug)]
pub struct FrozenBatch {
    pub start: Episode<f64>,
    pub actions: Vec<Vec<usize>>,
    pub log_prob_values: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

pub fn freeze(
    params: &PolicyParams<f64>,
    env: &Environment<f64>,
    k: usize,
    seed: u64,
) -> Result<FrozenBatch> {
    let mut rng = rng_for(seed, &[STREAM_TRAIN]);
    let start = env.sample_episode(&mut rng)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let trajs = sample_trajectories(&mut tape, &bound, env, &start, k, &mut rng)?;
    Ok(FrozenBatch {
        start,
        actions: trajs.iter().map(|t| t.actions.clone()).collect(),
        log_prob_values: trajs.iter().map(|t| t.log_prob_values.clone()).collect(),
        rewards: trajs.iter().map(|t| t.reward).collect(),
    })
}

fn replay_trajectories(
    tape: &mut Tape<f64>,
    bound: &BoundPolicy,
    env: &Environment<f64>,
    batch: &FrozenBatch,
) -> Result<Vec<Trajectory<f64>>> {
    let mut out = Vec::with_capacity(batch.actions.len());
    for (k, actions) in batch.actions.iter().enumerate() {
        let mut ep = batch.start.clone();
        let mut h = bound.h0;
        let mut log_probs = Vec::with_capacity(actions.len());
        for &a in actions {
            let obs = env.observe(&ep)?;
            let step = policy_step(tape, bound, &obs, h)?;
            log_probs.push(tape.pick(step.log_probs, a)?);
            h = step.h_next;
            ep = ep.rollout_step(env.actions().value(a)?)?;
        }
        out.push(Trajectory {
            actions: actions.clone(),
            log_probs,
            log_prob_values: batch.log_prob_values[k].clone(),
            entropies: Vec::new(),
            reward: batch.rewards[k],
            final_y: ep.y,
        });
    }
    Ok(out)
}

/// Surrogate loss along the frozen batch, with its tape gradient if asked.
pub fn replay_loss(
    params: &PolicyParams<f64>,
    env: &Environment<f64>,
    batch: &FrozenBatch,
    alpha: f64,
    with_grad: bool,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let trajs = replay_trajectories(&mut tape, &bound, env, batch)?;
    let loss = surrogate_loss(&mut tape, &trajs, alpha, Baseline::MeanOfK)?;
    let value = tape.value(loss).item()?;
    if !with_grad {
        return Ok((value, Vec::new()));
    }
    tape.backward(loss)?;
    Ok((value, gather_grads(&tape, &bound.nodes())))
}

/// Compares tape and central-difference gradients of every parameter block.
/// A block's relative error is `max|g − ĝ| / max(max|g|, max|ĝ|, floor)`.
pub fn check_policy(
    params: &PolicyParams<f64>,
    env: &Environment<f64>,
    cfg: &GradcheckConfig,
) -> Result<GradcheckReport> {
    let layout = ParamLayout::of(params);
    if let Some(name) = &cfg.sign_flip {
        if !layout.blocks.iter().any(|b| &b.name == name) {
            return Err(Error::Input(format!("no parameter block named `{name}`")));
        }
    }
    let batch = freeze(params, env, cfg.k, cfg.seed)?;
    let (_, mut analytic) = replay_loss(params, env, &batch, cfg.alpha, true)?;

    let base = flatten(params);
    let mut probe = params.clone();
    let mut theta = base.clone();
    let mut numeric = vec![0.0; base.len()];
    for i in 0..base.len() {
        theta[i] = base[i] + cfg.step;
        load_flat(&mut probe, &theta)?;
        let plus = replay_loss(&probe, env, &batch, cfg.alpha, false)?.0;
        theta[i] = base[i] - cfg.step;
        load_flat(&mut probe, &theta)?;
        let minus = replay_loss(&probe, env, &batch, cfg.alpha, false)?.0;
        theta[i] = base[i];
        numeric[i] = (plus - minus) / (2.0 * cfg.step);
    }

    let blocks = layout
        .blocks
        .iter()
        .map(|b| {
            let range = b.offset..b.offset + b.len;
            if cfg.sign_flip.as_deref() == Some(b.name.as_str()) {
                analytic[range.clone()].iter_mut().for_each(|g| *g = -*g);
            }
            let (a, n) = (&analytic[range.clone()], &numeric[range]);
            let max_abs_error = a.iter().zip(n).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let scale = a
                .iter()
                .chain(n)
                .map(|x| x.abs())
                .fold(cfg.floor, f64::max);
            let rel_error = max_abs_error / scale;
            BlockCheck {
                name: b.name.clone(),
                len: b.len,
                max_abs_error,
                scale,
                rel_error,
                passed: rel_error <= cfg.tolerance,
            }
        })
        .collect();
    Ok(GradcheckReport {
        config: cfg.clone(),
        blocks,
    })
}

/// Audit on the tiny network and environment.
pub fn run_tiny(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let env = tiny_env(cfg.seed)?;
    let params = PolicyParams::init(
        env.obs_dim(),
        env.actions().n_bins,
        &tiny_policy_config(),
        cfg.seed,
    )?;
    check_policy(&params, &env, cfg)
}
