use crate::agent::ActionSpace;
use crate::env::spec::AttributeSchedule;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Decision state of one episode: the fixed noise vector, the concatenated
/// latents, and how many scheduled attributes have been set so far.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode<T> {
    pub epsilon: Vec<T>,
    pub y: Vec<T>,
    pub schedule: AttributeSchedule,
    pub step: usize,
    dims_per_layer: usize,
}

impl<T: Scalar> Episode<T> {
    /// Starts an episode from sampled latents, zeroing every scheduled
    /// coordinate.
    pub fn new(
        epsilon: Vec<T>,
        mut y: Vec<T>,
        schedule: AttributeSchedule,
        dims_per_layer: usize,
    ) -> Result<Self> {
        for a in schedule.attributes() {
            let i = a.flat_index(dims_per_layer);
            if a.dim == 0 || a.dim > dims_per_layer || i >= y.len() {
                return Err(Error::Input(format!(
                    "attribute {a} outside latent of length {}",
                    y.len()
                )));
            }
            y[i] = T::zero();
        }
        Ok(Self {
            epsilon,
            y,
            schedule,
            step: 0,
            dims_per_layer,
        })
    }

    pub fn dims_per_layer(&self) -> usize {
        self.dims_per_layer
    }

    pub fn len(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    pub fn is_terminal(&self) -> bool {
        self.step == self.schedule.len()
    }

    /// Flat latent indices of the scheduled attributes, in decision order.
    pub fn scheduled_indices(&self) -> Vec<usize> {
        self.schedule
            .attributes()
            .iter()
            .map(|a| a.flat_index(self.dims_per_layer))
            .collect()
    }

    /// Sets the current scheduled attribute to `value` and advances.
    pub fn rollout_step(&self, value: T) -> Result<Self> {
        if self.is_terminal() {
            return Err(Error::EpisodeComplete { steps: self.step });
        }
        let space = ActionSpace::default();
        if !value.is_finite() || !space.contains(value.as_f64()) {
            return Err(Error::Input(format!(
                "value {value} outside [{}, {}]",
                space.lo, space.hi
            )));
        }
        let mut next = self.clone();
        let idx = self.schedule.attributes()[self.step].flat_index(self.dims_per_layer);
        next.y[idx] = value;
        next.step += 1;
        Ok(next)
    }
}
