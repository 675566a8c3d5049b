use log::{debug, info};
use rayon::prelude::*;

use crate::agent::{sample_trajectories, PolicyConfig, PolicyParams};
use crate::diffcore::Tape;
use crate::env::{Environment, Episode};
use crate::error::{Error, Result};
use crate::nn::{flatten, gather_grads, load_flat, ParamLayout};
use crate::scalar::Scalar;
use crate::seeding::{rng_for, STREAM_EVAL, STREAM_TRAIN};
use crate::trainer::loss::{surrogate_loss, Baseline};
use crate::trainer::{adam_step, AdamState, MetricsRow, TrainConfig};

/// Gradient and diagnostics from one start state and its K trajectories.
#[derive(Clone, Debug)]
pub struct EpisodeGradient<T> {
    pub grads: Vec<T>,
    pub loss: T,
    pub mean_reward: T,
    pub baseline: T,
    pub mean_entropy: T,
}

/// Samples `k` trajectories from `start`, builds the surrogate loss and
/// returns its gradient with respect to every policy parameter (flat, in
/// layout order).
pub fn episode_gradient<T: Scalar>(
    params: &PolicyParams<T>,
    env: &Environment<T>,
    start: &Episode<T>,
    k: usize,
    alpha: T,
    baseline: Baseline,
    rng: &mut impl rand::Rng,
) -> Result<EpisodeGradient<T>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let trajs = sample_trajectories(&mut tape, &bound, env, start, k, rng)?;
    let loss = surrogate_loss(&mut tape, &trajs, alpha, baseline)?;
    tape.backward(loss)?;
    let kf = T::from_usize(k).unwrap();
    let mean_reward = trajs.iter().map(|t| t.reward).sum::<T>() / kf;
    let steps = T::from_usize(trajs.iter().map(|t| t.len()).sum()).unwrap();
    let mean_entropy = trajs.iter().flat_map(|t| t.entropies.iter().copied()).sum::<T>() / steps;
    Ok(EpisodeGradient {
        grads: gather_grads(&tape, &bound.nodes()),
        loss: tape.value(loss).item()?,
        mean_reward,
        baseline: match baseline {
            Baseline::MeanOfK => mean_reward,
            Baseline::None => T::zero(),
        },
        mean_entropy,
    })
}

/// Batch-averaged gradient and diagnostics for one update.
#[derive(Clone, Debug)]
pub struct BatchResult<T> {
    pub grads: Vec<T>,
    pub loss: T,
    pub mean_reward: T,
    pub baseline_mean: T,
    pub entropy_mean: T,
}

/// Start state `index` of the training stream at `iteration`, together with
/// the RNG that then drives that episode's action sampling.
pub fn training_episode<T: Scalar>(
    env: &Environment<T>,
    seed: u64,
    iteration: usize,
    index: usize,
) -> Result<(Episode<T>, rand_chacha::ChaCha8Rng)> {
    let mut rng = rng_for(seed, &[STREAM_TRAIN, iteration as u64, index as u64]);
    let ep = env.sample_episode(&mut rng)?;
    Ok((ep, rng))
}

/// Held-out start states, fixed by the seed.
pub fn eval_episodes<T: Scalar>(env: &Environment<T>, seed: u64, n: usize) -> Result<Vec<Episode<T>>> {
    (0..n)
        .map(|i| env.sample_episode(&mut rng_for(seed, &[STREAM_EVAL, i as u64])))
        .collect()
}

/// Episodes run in parallel; results are reduced in index order so the
/// outcome does not depend on scheduling.
pub fn batch_gradient<T: Scalar>(
    params: &PolicyParams<T>,
    env: &Environment<T>,
    cfg: &TrainConfig,
    iteration: usize,
) -> Result<BatchResult<T>> {
    let alpha = T::lit(cfg.effective_alpha());
    let parts: Vec<EpisodeGradient<T>> = (0..cfg.batch_episodes)
        .into_par_iter()
        .map(|e| {
            let (start, mut rng) = training_episode(env, cfg.seed, iteration, e)?;
            episode_gradient(params, env, &start, cfg.k, alpha, Baseline::MeanOfK, &mut rng)
        })
        .collect::<Result<_>>()?;
    let n = T::from_usize(parts.len()).unwrap();
    let mut grads = vec![T::zero(); parts[0].grads.len()];
    for p in &parts {
        for (g, &v) in grads.iter_mut().zip(&p.grads) {
            *g += v;
        }
    }
    grads.iter_mut().for_each(|g| *g /= n);
    let mean = |f: fn(&EpisodeGradient<T>) -> T| parts.iter().map(f).sum::<T>() / n;
    Ok(BatchResult {
        grads,
        loss: mean(|p| p.loss),
        mean_reward: mean(|p| p.mean_reward),
        baseline_mean: mean(|p| p.baseline),
        entropy_mean: mean(|p| p.mean_entropy),
    })
}

/// Mean greedy reward over `episodes`.
pub fn greedy_score<T: Scalar>(
    params: &PolicyParams<T>,
    env: &Environment<T>,
    episodes: &[Episode<T>],
) -> Result<f64> {
    let rewards: Vec<f64> = episodes
        .par_iter()
        .map(|ep| params.greedy(env, ep).map(|t| t.reward.as_f64()))
        .collect::<Result<_>>()?;
    Ok(rewards.iter().sum::<f64>() / rewards.len() as f64)
}

/// Owns the single mutable copy of the parameters and the optimizer state.
pub struct Trainer<'e, T> {
    cfg: TrainConfig,
    env: &'e Environment<T>,
    params: PolicyParams<T>,
    layout: ParamLayout,
    adam: AdamState<T>,
    eval_set: Vec<Episode<T>>,
    iteration: usize,
    rows: Vec<MetricsRow>,
}

impl<'e, T: Scalar> Trainer<'e, T> {
    pub fn new(cfg: TrainConfig, policy: &PolicyConfig, env: &'e Environment<T>) -> Result<Self> {
        let params =
            PolicyParams::init(env.obs_dim(), env.actions().n_bins, policy, cfg.seed)?;
        Self::with_params(cfg, params, env)
    }

    pub fn with_params(cfg: TrainConfig, params: PolicyParams<T>, env: &'e Environment<T>) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        if params.obs_dim() != env.obs_dim() || params.n_bins() != env.actions().n_bins {
            return Err(Error::Config(format!(
                "policy expects obs {} / {} bins, environment has obs {} / {} bins",
                params.obs_dim(),
                params.n_bins(),
                env.obs_dim(),
                env.actions().n_bins
            )));
        }
        let layout = ParamLayout::of(&params);
        let adam = AdamState::new(layout.total());
        let eval_set = eval_episodes(env, cfg.seed, cfg.eval_episodes)?;
        Ok(Self {
            cfg,
            env,
            params,
            layout,
            adam,
            eval_set,
            iteration: 0,
            rows: Vec::new(),
        })
    }

    pub fn params(&self) -> &PolicyParams<T> {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn eval_set(&self) -> &[Episode<T>] {
        &self.eval_set
    }

    /// Row with the highest greedy evaluation score (earliest on ties).
    pub fn best_row(&self) -> Option<&MetricsRow> {
        self.rows.iter().fold(None, |best: Option<&MetricsRow>, r| match best {
            Some(b) if b.greedy_eval_score >= r.greedy_eval_score => Some(b),
            _ => Some(r),
        })
    }

    /// Runs the remaining iterations. Row `i` describes the parameters after
    /// `i` updates; rows are emitted at iteration 0, every `eval_every`
    /// iterations and at the final iteration. `on_row` sees each new row
    /// with the trainer in that state.
    ///
    /// On a non-finite loss or gradient the update is skipped, the error is
    /// returned and the trainer keeps the last finite parameters.
    pub fn run(&mut self, mut on_row: impl FnMut(&Self, &MetricsRow) -> Result<()>) -> Result<()> {
        let total = self.cfg.iterations;
        while self.iteration <= total {
            let it = self.iteration;
            let batch = batch_gradient(&self.params, self.env, &self.cfg, it)?;
            if !batch.loss.is_finite() {
                return Err(Error::Numeric {
                    context: format!("surrogate loss at iteration {it}"),
                });
            }
            if it.is_multiple_of(self.cfg.eval_every) || it == total {
                let row = MetricsRow {
                    iteration: it,
                    mean_reward: batch.mean_reward.as_f64(),
                    baseline_mean: batch.baseline_mean.as_f64(),
                    entropy_mean: batch.entropy_mean.as_f64(),
                    surrogate_loss: batch.loss.as_f64(),
                    greedy_eval_score: greedy_score(&self.params, self.env, &self.eval_set)?,
                };
                info!(
                    "iter {it}: reward {:.5} entropy {:.4} greedy {:.5}",
                    row.mean_reward, row.entropy_mean, row.greedy_eval_score
                );
                self.rows.push(row.clone());
                on_row(self, &row)?;
            }
            if it == total {
                break;
            }
            let mut flat = flatten(&self.params);
            adam_step(&mut flat, &batch.grads, &mut self.adam, &self.cfg.adam(), Some(&self.layout))?;
            load_flat(&mut self.params, &flat)?;
            debug!("iter {it}: loss {}", batch.loss);
            self.iteration += 1;
        }
        Ok(())
    }
}

/// Trains from scratch and returns the final parameters and metrics table.
pub fn train<T: Scalar>(
    cfg: &TrainConfig,
    policy: &PolicyConfig,
    env: &Environment<T>,
) -> Result<(PolicyParams<T>, Vec<MetricsRow>)> {
    let mut trainer = Trainer::new(cfg.clone(), policy, env)?;
    trainer.run(|_, _| Ok(()))?;
    Ok((trainer.params.clone(), trainer.rows))
}
