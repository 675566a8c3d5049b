use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// One latent coordinate: dimension `dim` of layer `layer`, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct AttributeId {
    pub layer: usize,
    pub dim: usize,
}

impl AttributeId {
    pub const fn new(layer: usize, dim: usize) -> Self {
        Self { layer, dim }
    }

    pub fn check(&self, n_layers: usize, dims_per_layer: usize) -> Result<()> {
        if self.layer == 0 || self.layer > n_layers || self.dim == 0 || self.dim > dims_per_layer {
            return Err(Error::Input(format!(
                "attribute {self} outside {n_layers} layers x {dims_per_layer} dims"
            )));
        }
        Ok(())
    }

    /// Offset of this coordinate in the concatenated latent vector.
    pub fn flat_index(&self, dims_per_layer: usize) -> usize {
        (self.layer - 1) * dims_per_layer + (self.dim - 1)
    }
}

impl From<(usize, usize)> for AttributeId {
    fn from((layer, dim): (usize, usize)) -> Self {
        Self { layer, dim }
    }
}

impl From<AttributeId> for (usize, usize) {
    fn from(a: AttributeId) -> Self {
        (a.layer, a.dim)
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z{}_{}", self.layer, self.dim)
    }
}

impl std::str::FromStr for AttributeId {
    type Err = Error;

    /// Accepts `3,4`, `3:4` or `z3_4`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('z');
        let mut parts = t.split([',', ':', '_']);
        let parse = |p: Option<&str>| -> Result<usize> {
            p.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Input(format!("cannot parse attribute `{s}`")))
        };
        let layer = parse(parts.next())?;
        let dim = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::Input(format!("cannot parse attribute `{s}`")));
        }
        Ok(Self { layer, dim })
    }
}

/// Ordered, duplicate-free list of attributes decided one per step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AttributeId>", into = "Vec<AttributeId>")]
pub struct AttributeSchedule(Vec<AttributeId>);

impl AttributeSchedule {
    pub fn new(attrs: Vec<AttributeId>) -> Result<Self> {
        if attrs.is_empty() {
            return Err(Error::Input("schedule must name at least one attribute".into()));
        }
        for (i, a) in attrs.iter().enumerate() {
            if attrs[..i].contains(a) {
                return Err(Error::Input(format!("attribute {a} scheduled twice")));
            }
        }
        Ok(Self(attrs))
    }

    pub fn attributes(&self) -> &[AttributeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First `n` attributes.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        Self::new(self.0.iter().take(n).copied().collect())
    }
}

impl TryFrom<Vec<AttributeId>> for AttributeSchedule {
    type Error = Error;

    fn try_from(v: Vec<AttributeId>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AttributeSchedule> for Vec<AttributeId> {
    fn from(s: AttributeSchedule) -> Self {
        s.0
    }
}

/// Serialized environment fixture. Everything random is regenerated from
/// `seed`, so the document stays small and fully describes the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub format_version: u32,
    pub seed: u64,
    /// Observation dimension D.
    pub obs_dim: usize,
    /// Noise dimension E.
    pub eps_dim: usize,
    /// Latent dimensions per layer q.
    pub dims_per_layer: usize,
    pub n_layers: usize,
    /// Rows of the scorer's random projection P.
    pub n_probe: usize,
    pub bandwidth: f64,
    /// Scale of the noise-to-observation map.
    pub epsilon_gain: f64,
    /// Range the per-dimension importances are drawn from.
    pub importance: [f64; 2],
    /// Standard deviation of each layer's origin.
    pub origin_scale: f64,
    /// Standard deviation of the latent point the scorer peaks at.
    pub target_spread: f64,
    /// Scale of the sigmoid trend term; `None` disables it.
    #[serde(default)]
    pub monotone_scale: Option<f64>,
    pub schedule: AttributeSchedule,
    /// Fixed reward per action bin for single-step bandit fixtures. When set,
    /// the terminal reward ignores the scorer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_table: Option<Vec<f64>>,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            seed: 0,
            obs_dim: 64,
            eps_dim: 16,
            dims_per_layer: 6,
            n_layers: 6,
            n_probe: 8,
            bandwidth: 4.0,
            epsilon_gain: 0.5,
            importance: [0.25, 2.0],
            origin_scale: 0.1,
            target_spread: 1.5,
            monotone_scale: Some(1.0),
            schedule: AttributeSchedule::new(vec![AttributeId::new(3, 4), AttributeId::new(4, 5)])
                .expect("static schedule is valid"),
            reward_table: None,
        }
    }
}

impl EnvSpec {
    pub fn latent_dim(&self) -> usize {
        self.n_layers * self.dims_per_layer
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "fixture format_version {} unsupported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let dims = [
            ("obs_dim", self.obs_dim),
            ("eps_dim", self.eps_dim),
            ("dims_per_layer", self.dims_per_layer),
            ("n_layers", self.n_layers),
            ("n_probe", self.n_probe),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.dims_per_layer > self.obs_dim {
            return Err(Error::Config(format!(
                "dims_per_layer {} exceeds obs_dim {}: no orthonormal basis",
                self.dims_per_layer, self.obs_dim
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Config("bandwidth must be positive and finite".into()));
        }
        let [lo, hi] = self.importance;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config("importance range must satisfy 0 <= lo <= hi".into()));
        }
        for (name, v) in [
            ("epsilon_gain", self.epsilon_gain),
            ("origin_scale", self.origin_scale),
            ("target_spread", self.target_spread),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        for a in self.schedule.attributes() {
            a.check(self.n_layers, self.dims_per_layer)?;
        }
        if let Some(table) = &self.reward_table {
            if self.schedule.len() != 1 {
                return Err(Error::Config(
                    "reward_table fixtures must schedule exactly one attribute".into(),
                ));
            }
            if table.iter().any(|r| !r.is_finite()) {
                return Err(Error::Config("reward_table entries must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}
