use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{AttributeId, Environment};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding::{rng_for, STREAM_SWEEP};

pub const SWEEP_LO: f64 = -4.5;
pub const SWEEP_STEP: f64 = 0.5;
pub const SWEEP_POINTS: usize = 19;

/// The traversal grid −4.5, −4.0, …, 4.5.
pub fn sweep_grid() -> Vec<f64> {
    (0..SWEEP_POINTS)
        .map(|i| SWEEP_LO + SWEEP_STEP * i as f64)
        .collect()
}

/// Scores along one attribute's traversal grid for several sampled images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraversalSweep {
    pub attribute: AttributeId,
    pub grid: Vec<f64>,
    /// `scores[image][point]`.
    pub scores: Vec<Vec<f64>>,
}

impl TraversalSweep {
    pub fn new(attribute: AttributeId, grid: Vec<f64>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("sweep grid must be strictly increasing".into()));
        }
        for row in &scores {
            if row.len() != grid.len() {
                return Err(Error::Dimension {
                    op: "sweep",
                    left: vec![grid.len()],
                    right: vec![row.len()],
                });
            }
            if let Some(j) = row.iter().position(|s| !(0.0..=1.0).contains(s)) {
                return Err(Error::Domain {
                    op: "sweep",
                    index: j,
                    value: row[j],
                });
            }
        }
        Ok(Self {
            attribute,
            grid,
            scores,
        })
    }

    pub fn n_images(&self) -> usize {
        self.scores.len()
    }

    /// All (grid value, score) pairs, image-major.
    pub fn pooled(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(self.grid.len() * self.scores.len());
        let mut ys = Vec::with_capacity(xs.capacity());
        for row in &self.scores {
            xs.extend_from_slice(&self.grid);
            ys.extend_from_slice(row);
        }
        (xs, ys)
    }
}

/// Sampled starting point of image `index`: ε and every latent standard
/// normal.
pub fn sweep_image<T: Scalar>(env: &Environment<T>, seed: u64, index: usize) -> (Vec<T>, Vec<T>) {
    let mut rng = rng_for(seed, &[STREAM_SWEEP, index as u64]);
    let spec = env.spec();
    let eps = (0..spec.eps_dim)
        .map(|_| T::lit(rng.sample(StandardNormal)))
        .collect();
    let y = (0..spec.latent_dim())
        .map(|_| T::lit(rng.sample(StandardNormal)))
        .collect();
    (eps, y)
}

/// Traverses `attribute` over the grid for `n_images` seeded images, holding
/// every other coordinate at its sampled value, and scores each observation.
pub fn sweep_attribute<T: Scalar>(
    env: &Environment<T>,
    attribute: AttributeId,
    n_images: usize,
    seed: u64,
) -> Result<TraversalSweep> {
    if n_images == 0 {
        return Err(Error::Input("sweep needs at least one image".into()));
    }
    let spec = env.spec();
    attribute.check(spec.n_layers, spec.dims_per_layer)?;
    let idx = attribute.flat_index(spec.dims_per_layer);
    let grid = sweep_grid();
    let scores = (0..n_images)
        .into_par_iter()
        .map(|i| {
            let (eps, mut y) = sweep_image(env, seed, i);
            grid.iter()
                .map(|&v| {
                    y[idx] = T::lit(v);
                    Ok(env.score(&env.generate(&eps, &y)?)?.as_f64())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    TraversalSweep::new(attribute, grid, scores)
}

/// Sweeps every attribute of the latent space, in layer-major order.
pub fn sweep_all<T: Scalar>(
    env: &Environment<T>,
    n_images: usize,
    seed: u64,
) -> Result<Vec<TraversalSweep>> {
    let spec = env.spec();
    let attrs: Vec<AttributeId> = (1..=spec.n_layers)
        .flat_map(|l| (1..=spec.dims_per_layer).map(move |d| AttributeId::new(l, d)))
        .collect();
    attrs
        .into_par_iter()
        .map(|a| sweep_attribute(env, a, n_images, seed))
        .collect()
}
