use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use softpg_core::agent::PolicyConfig;
use softpg_core::env::{EnvSpec, FORMAT_VERSION};
use softpg_core::trainer::{Preset, TrainConfig};

use crate::error::{CliError, CliResult};

/// Everything a training run depends on, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub env: EnvSpec,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            env: EnvSpec::default(),
            policy: match preset {
                Preset::Desk => PolicyConfig::desk(),
                Preset::Paper => PolicyConfig::paper(),
            },
            train: TrainConfig::preset(preset),
            out: None,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        check_version(self.format_version, "run config")?;
        self.env.validate()?;
        self.policy.validate()?;
        self.train.validate()?;
        Ok(())
    }
}

pub fn check_version(v: u32, what: &str) -> CliResult<()> {
    if v != FORMAT_VERSION {
        return Err(CliError::user(format!(
            "{what} has format_version {v}, this build reads {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

pub fn load_fixture(path: &Path) -> CliResult<EnvSpec> {
    let spec = EnvSpec::from_json(&read_text(path)?)
        .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    check_version(spec.format_version, "fixture")?;
    spec.validate()?;
    Ok(spec)
}

/// Recursively overlays `top` onto `base`; objects merge, anything else
/// replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Preset defaults, then the config file, then a fixture file, then
/// `overrides` (already shaped like a partial [`RunConfig`]).
pub fn resolve(
    preset: Option<Preset>,
    config: Option<&Path>,
    fixture: Option<&Path>,
    overrides: Value,
) -> CliResult<RunConfig> {
    let file = config.map(read_json).transpose()?;
    let file_preset = file
        .as_ref()
        .and_then(|v| v.pointer("/train/preset"))
        .map(|v| serde_json::from_value::<Preset>(v.clone()))
        .transpose()?;
    let preset = preset.or(file_preset).unwrap_or(Preset::Desk);

    let mut doc = serde_json::to_value(RunConfig::preset(preset))?;
    if let Some(f) = file {
        if !f.is_object() {
            return Err(CliError::user("run config must be a JSON object"));
        }
        merge(&mut doc, f);
    }
    if let Some(path) = fixture {
        doc["env"] = serde_json::to_value(load_fixture(path)?)?;
    }
    merge(&mut doc, overrides);
    doc["train"]["preset"] = serde_json::to_value(preset)?;
    let cfg: RunConfig = serde_json::from_value(doc)
        .map_err(|e| CliError::user(format!("invalid run config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
