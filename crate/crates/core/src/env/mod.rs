//! Desk-scale environment: a linear subspace generator, a synthetic scorer
//! with a known optimum, and the episode protocol (scheduled coordinates
//! start at zero, the observation is regenerated after every decision, and
//! only the terminal state is rewarded).

mod episode;
mod generator;
mod oracle;
mod scorer;
mod spec;

pub use episode::Episode;
pub use generator::{random_orthonormal, SubspaceGenerator, SubspaceLayer};
pub use oracle::{grid_optimum, GridOptimum, MAX_ORACLE_ATTRIBUTES};
pub use scorer::SyntheticScorer;
pub use spec::{AttributeId, AttributeSchedule, EnvSpec, FORMAT_VERSION};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::agent::ActionSpace;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding::{rng_for, STREAM_FIXTURE};

/// Generator, scorer and schedule built from an [`EnvSpec`].
#[derive(Clone, Debug)]
pub struct Environment<T> {
    spec: EnvSpec,
    generator: SubspaceGenerator<T>,
    scorer: SyntheticScorer<T>,
    reward_table: Option<Vec<T>>,
    actions: ActionSpace,
}

impl<T: Scalar> Environment<T> {
    pub fn from_spec(spec: &EnvSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_for(spec.seed, &[STREAM_FIXTURE]);
        let (d, e, q) = (spec.obs_dim, spec.eps_dim, spec.dims_per_layer);
        let normal = |rng: &mut rand_chacha::ChaCha8Rng, sd: f64| -> f64 {
            sd * rng.sample::<f64, _>(StandardNormal)
        };

        let mut layers = Vec::with_capacity(spec.n_layers);
        for _ in 0..spec.n_layers {
            let cols = random_orthonormal(&mut rng, d, q);
            let mut basis = vec![T::zero(); d * q];
            for (j, c) in cols.iter().enumerate() {
                for (i, &v) in c.iter().enumerate() {
                    basis[i * q + j] = T::lit(v);
                }
            }
            let [lo, hi] = spec.importance;
            let importance = (0..q)
                .map(|_| T::lit(if hi > lo { rng.random_range(lo..hi) } else { lo }))
                .collect();
            let origin = (0..d).map(|_| T::lit(normal(&mut rng, spec.origin_scale))).collect();
            layers.push(SubspaceLayer::new(Tensor::matrix(d, q, basis)?, importance, origin)?);
        }
        let gain = spec.epsilon_gain / (e as f64).sqrt();
        let base = (0..d * e).map(|_| T::lit(normal(&mut rng, gain))).collect();
        let generator = SubspaceGenerator::new(layers, Tensor::matrix(d, e, base)?)?;

        let mut probe = Vec::with_capacity(spec.n_probe * d);
        for _ in 0..spec.n_probe {
            let row: Vec<f64> = (0..d).map(|_| normal(&mut rng, 1.0)).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            probe.extend(row.iter().map(|v| T::lit(v / norm)));
        }
        let probe = Tensor::matrix(spec.n_probe, d, probe)?;
        let ideal: Vec<T> = (0..spec.latent_dim())
            .map(|_| T::lit(normal(&mut rng, spec.target_spread)))
            .collect();
        let target = probe.matvec(&generator.generate(&vec![T::zero(); e], &ideal)?)?;
        let monotone_weights = spec.monotone_scale.map(|s| {
            let sd = s / (spec.n_probe as f64).sqrt();
            (0..spec.n_probe).map(|_| T::lit(normal(&mut rng, sd))).collect()
        });
        let scorer = SyntheticScorer::new(probe, target, T::lit(spec.bandwidth), monotone_weights)?;

        let actions = ActionSpace::default();
        let reward_table = match &spec.reward_table {
            Some(t) if t.len() != actions.n_bins => {
                return Err(Error::Config(format!(
                    "reward_table has {} entries, expected {}",
                    t.len(),
                    actions.n_bins
                )))
            }
            Some(t) => Some(t.iter().map(|&r| T::lit(r)).collect()),
            None => None,
        };
        Ok(Self {
            spec: spec.clone(),
            generator,
            scorer,
            reward_table,
            actions,
        })
    }

    /// Assembles an environment from explicit parts. `spec` still supplies
    /// the schedule and dimensions.
    pub fn from_parts(
        spec: EnvSpec,
        generator: SubspaceGenerator<T>,
        scorer: SyntheticScorer<T>,
    ) -> Result<Self> {
        if generator.obs_dim() != scorer.obs_dim()
            || generator.dims_per_layer() != spec.dims_per_layer
            || generator.latent_dim() != spec.latent_dim()
        {
            return Err(Error::Dimension {
                op: "environment",
                left: vec![generator.obs_dim(), generator.latent_dim()],
                right: vec![scorer.obs_dim(), spec.latent_dim()],
            });
        }
        let reward_table = spec
            .reward_table
            .as_ref()
            .map(|t| t.iter().map(|&r| T::lit(r)).collect());
        Ok(Self {
            spec,
            generator,
            scorer,
            reward_table,
            actions: ActionSpace::default(),
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn generator(&self) -> &SubspaceGenerator<T> {
        &self.generator
    }

    pub fn scorer(&self) -> &SyntheticScorer<T> {
        &self.scorer
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn schedule(&self) -> &AttributeSchedule {
        &self.spec.schedule
    }

    pub fn obs_dim(&self) -> usize {
        self.generator.obs_dim()
    }

    /// Same generator and scorer, different decision schedule.
    pub fn with_schedule(&self, schedule: AttributeSchedule) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.schedule = schedule;
        spec.validate()?;
        Ok(Self {
            spec,
            ..self.clone()
        })
    }

    pub fn generate(&self, epsilon: &[T], y: &[T]) -> Result<Vec<T>> {
        self.generator.generate(epsilon, y)
    }

    pub fn score(&self, obs: &[T]) -> Result<T> {
        self.scorer.score(obs)
    }

    pub fn observe(&self, ep: &Episode<T>) -> Result<Vec<T>> {
        self.generate(&ep.epsilon, &ep.y)
    }

    /// Score of the final state `(ε, y)`; for bandit fixtures the table entry
    /// of the single scheduled attribute's bin.
    pub fn reward_of(&self, epsilon: &[T], y: &[T]) -> Result<T> {
        if let Some(table) = &self.reward_table {
            let a = self.spec.schedule.attributes()[0].flat_index(self.spec.dims_per_layer);
            let v = y[a].as_f64();
            let bin = self
                .actions
                .index_of(v)
                .ok_or_else(|| Error::Input(format!("value {v} is not on the action grid")))?;
            return Ok(table[bin]);
        }
        self.score(&self.generate(epsilon, y)?)
    }

    pub fn terminal_reward(&self, ep: &Episode<T>) -> Result<T> {
        if !ep.is_terminal() {
            return Err(Error::NotTerminal {
                step: ep.step,
                len: ep.len(),
            });
        }
        self.reward_of(&ep.epsilon, &ep.y)
    }

    /// Fresh episode: ε and all latents standard normal, scheduled
    /// coordinates zeroed.
    pub fn sample_episode(&self, rng: &mut impl Rng) -> Result<Episode<T>> {
        let epsilon = (0..self.spec.eps_dim)
            .map(|_| T::lit(rng.sample(StandardNormal)))
            .collect();
        let y = (0..self.spec.latent_dim())
            .map(|_| T::lit(rng.sample(StandardNormal)))
            .collect();
        Episode::new(epsilon, y, self.spec.schedule.clone(), self.spec.dims_per_layer)
    }

    /// Reward table of a bandit fixture, if any.
    pub fn reward_table(&self) -> Option<&[T]> {
        self.reward_table.as_deref()
    }
}
