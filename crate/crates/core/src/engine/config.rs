//! Layered configuration: defaults < TOML file < `PAINTBOX_*` environment <
//! command-line overrides.
//!
//! Environment keys map to dotted paths with `__` as the separator, so
//! `PAINTBOX_FOREST__TREE_COUNT=3` sets `forest.tree_count`. Values are
//! parsed as TOML scalars and fall back to strings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSettings;
use crate::forest::ForestSettings;
use crate::propagation::PropagationSettings;
use crate::rendering::CompositeOptions;
use crate::sampling::SamplingSettings;
use crate::touch::TouchSettings;

pub const ENV_PREFIX: &str = "PAINTBOX_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSettings {
    /// Seed for per-frame sampling; the forest has its own in `forest.seed`.
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Pick brush: pixel radius, then voxel-to-cube radius.
    pub pick_radius: u32,
    pub cube_radius: u32,
    /// Enables the PROPAGATION section ("propagate on|off").
    pub propagate: bool,
    /// Inverse class-frequency weights, recomputed every training frame.
    pub reweight: bool,
    pub forest: ForestSettings,
    pub features: FeatureSettings,
    pub sampling: SamplingSettings,
    pub propagation: PropagationSettings,
    pub touch: TouchSettings,
    pub composite: CompositeOptions,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            seed: 0,
            width: 320,
            height: 240,
            pick_radius: 2,
            cube_radius: 0,
            propagate: true,
            reweight: false,
            forest: ForestSettings::default(),
            features: FeatureSettings::default(),
            sampling: SamplingSettings::default(),
            propagation: PropagationSettings::default(),
            touch: TouchSettings::default(),
            composite: CompositeOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    File(#[from] toml::de::Error),
    #[error("override {key}: {reason}")]
    Override { key: String, reason: String },
    #[error("invalid settings: {0}")]
    Invalid(String),
}

impl EngineSettings {
    /// Builds settings from the layers in precedence order. `env` is usually
    /// `std::env::vars()`; `cli` holds `key=value` pairs.
    pub fn layered<I>(file: Option<&str>, env: I, cli: &[String]) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut root = toml::Value::try_from(EngineSettings::default()).expect("settings serialise");
        if let Some(text) = file {
            let t: toml::Table = toml::from_str(text)?;
            merge(&mut root, toml::Value::Table(t));
        }
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_lowercase().replace("__", "."), v)))
            .collect();
        env.sort();
        for (k, v) in env {
            set_path(&mut root, &k, &v)?;
        }
        for kv in cli {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Override {
                key: kv.clone(),
                reason: "expected key=value".into(),
            })?;
            set_path(&mut root, k.trim(), v.trim())?;
        }
        let s: EngineSettings = root.try_into().map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.width == 0 || self.height == 0 {
            return Err(ConfigError::Invalid("render size must be non-empty".into()));
        }
        self.propagation.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.features.patch_size < 3 || self.features.patch_size.is_multiple_of(2) {
            return Err(ConfigError::Invalid("patch_size must be odd and at least 3".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialise")
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
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

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut toml::Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    let err = |reason: &str| ConfigError::Override { key: key.to_string(), reason: reason.to_string() };
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let table = node.as_table_mut().ok_or_else(|| err("path runs through a scalar"))?;
        if i + 1 == parts.len() {
            let slot = table.get_mut(*p).ok_or_else(|| err("unknown key"))?;
            let mut v = parse_scalar(raw);
            // integers given for float fields
            if let (toml::Value::Float(_), toml::Value::Integer(n)) = (&*slot, &v) {
                v = toml::Value::Float(*n as f64);
            }
            if std::mem::discriminant(slot) != std::mem::discriminant(&v) {
                return Err(err(&format!("expected {}, got {}", slot.type_str(), v.type_str())));
            }
            *slot = v;
            return Ok(());
        }
        node = table.get_mut(*p).ok_or_else(|| err("unknown key"))?;
    }
    Err(err("empty key"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn layers_apply_in_order() {
        let file = "seed = 5\n[forest]\ntree_count = 3\ncandidate_count = 16\n";
        let s = EngineSettings::layered(
            Some(file),
            env(&[("PAINTBOX_FOREST__TREE_COUNT", "4"), ("HOME", "/root"), ("PAINTBOX_PROPAGATION__MAX_DISTANCE", "1")]),
            &["forest.tree_count=7".into()],
        )
        .unwrap();
        assert_eq!(s.seed, 5);
        assert_eq!(s.forest.candidate_count, 16);
        assert_eq!(s.forest.tree_count, 7);
        assert_eq!(s.propagation.max_distance, 1.0);
        assert_eq!(s.width, 320);
    }

    #[test]
    fn bad_overrides_are_reported() {
        let e = EngineSettings::layered(None, env(&[]), &["forest.nope=1".into()]).unwrap_err();
        assert!(matches!(e, ConfigError::Override { .. }));
        let e = EngineSettings::layered(None, env(&[]), &["forest.tree_count=many".into()]).unwrap_err();
        assert!(e.to_string().contains("expected integer"), "{e}");
        assert!(EngineSettings::layered(None, env(&[]), &["width=0".into()]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s = EngineSettings::default();
        assert_eq!(EngineSettings::layered(Some(&s.to_toml()), env(&[]), &[]).unwrap(), s);
    }
}
