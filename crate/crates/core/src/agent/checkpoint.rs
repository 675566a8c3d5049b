use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::policy::{PolicyConfig, PolicyParams};
use crate::env::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::nn::Parameters;
use crate::scalar::Scalar;

/// Self-describing JSON snapshot of a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Resolved run configuration that produced the parameters.
    pub config: serde_json::Value,
    pub policy: PolicyConfig,
    pub obs_dim: usize,
    pub n_bins: usize,
    pub params: BTreeMap<String, Vec<f64>>,
    pub master_seed: u64,
    pub iteration: u64,
}

impl Checkpoint {
    pub fn capture<T: Scalar>(
        params: &PolicyParams<T>,
        policy: &PolicyConfig,
        config: serde_json::Value,
        master_seed: u64,
        iteration: u64,
    ) -> Self {
        let mut map = BTreeMap::new();
        params.visit("", &mut |name, t| {
            map.insert(name.to_string(), t.data().iter().map(|v| v.as_f64()).collect());
        });
        Self {
            format_version: FORMAT_VERSION,
            config,
            policy: policy.clone(),
            obs_dim: params.obs_dim(),
            n_bins: params.n_bins(),
            params: map,
            master_seed,
            iteration,
        }
    }

    /// Rebuilds the parameters; every block must be present with the size
    /// the stored configuration implies, and no extra blocks are allowed.
    pub fn restore<T: Scalar>(&self) -> Result<PolicyParams<T>> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format_version {} unsupported",
                self.format_version
            )));
        }
        let mut params = PolicyParams::<T>::init(self.obs_dim, self.n_bins, &self.policy, 0)?;
        let mut missing = None;
        let mut seen = 0usize;
        params.visit_mut("", &mut |name, t| match self.params.get(name) {
            Some(v) if v.len() == t.len() => {
                seen += 1;
                for (dst, &src) in t.data_mut().iter_mut().zip(v) {
                    *dst = T::lit(src);
                }
            }
            Some(v) => {
                missing.get_or_insert(format!("{name}: {} values, expected {}", v.len(), t.len()));
            }
            None => {
                missing.get_or_insert(format!("{name}: missing"));
            }
        });
        if let Some(msg) = missing {
            return Err(Error::Config(format!("checkpoint incompatible with policy ({msg})")));
        }
        if seen != self.params.len() {
            return Err(Error::Config("checkpoint has unknown parameter blocks".into()));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
