//! Run configuration: every module's settings in one JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::oversegment::RansacConfig;
use crate::pipeline::GridConfig;
use crate::predictor::{HeuristicConfig, ModelConfig};
use crate::regret_grouping::GroupingConfig;
use crate::synthgen::SceneSpec;
use crate::training::TrainConfig;

pub const LOCK_FILE: &str = "config.lock.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Points per segment fed to the network.
    pub n: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { n: 256 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ransac: RansacConfig,
    pub grid: GridConfig,
    pub sample: SampleConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub group: GroupingConfig,
    pub eval: EvalConfig,
    pub synth: SceneSpec,
    pub heuristic: HeuristicConfig,
}

fn invalid(msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(msg.to_string())
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
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

/// Sets `a.b.c` to `raw`, parsed as JSON when possible and as a string
/// otherwise. Every key on the path must already exist.
fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut node = root;
    for part in key.split('.') {
        node = node
            .as_object_mut()
            .and_then(|m: &mut Map<String, Value>| m.get_mut(part))
            .ok_or_else(|| invalid(format!("unknown config key `{key}`")))?;
    }
    *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

impl RunConfig {
    /// Applies each source in order over the defaults. A source of the form
    /// `key.path=value` is an override; anything else is a JSON file.
    pub fn load<S: AsRef<str>>(sources: &[S]) -> Result<Self> {
        let mut value = serde_json::to_value(RunConfig::default())?;
        for source in sources {
            let source = source.as_ref();
            match source.split_once('=') {
                Some((key, raw)) if !Path::new(source).is_file() => apply_override(&mut value, key.trim(), raw)?,
                _ => {
                    let text = std::fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
                    let patch: Value = serde_json::from_str(&text).map_err(|e| invalid(format!("{source}: {e}")))?;
                    if !patch.is_object() {
                        return Err(invalid(format!("{source}: expected a JSON object")));
                    }
                    merge(&mut value, patch);
                }
            }
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(invalid)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.ransac.validate()?;
        self.grid.validate()?;
        if self.sample.n == 0 {
            return Err(invalid("sample.n must be at least 1"));
        }
        self.model.validate()?;
        self.train.validate()?;
        self.group.validate()?;
        self.eval.validate()?;
        self.synth.validate()?;
        self.heuristic.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes the effective configuration as `config.lock.json` in `dir`.
    pub fn write_lock(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        std::fs::write(&path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::load::<&str>(&[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let back: RunConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_win_over_files() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"group": {"t": 0.6, "k": 5}, "grid": {"m": 16}}"#).unwrap();
        let file = file.to_str().unwrap().to_string();
        let cfg = RunConfig::load(&[file, "group.t=0.9".into(), "group.regret_enabled=false".into()]).unwrap();
        assert_eq!(cfg.group.t, 0.9);
        assert_eq!(cfg.group.k, 5);
        assert!(!cfg.group.regret_enabled);
        assert_eq!(cfg.grid.m, 16);
        assert_eq!(cfg.ransac, RansacConfig::default());
    }

    #[test]
    fn string_and_null_overrides() {
        let cfg = RunConfig::load(&["eval.iou_mode=aabb", "ransac.cluster_radius=null"]).unwrap();
        assert_eq!(cfg.eval.iou_mode, crate::evaluation::IouMode::Aabb);
        assert_eq!(cfg.ransac.cluster_radius, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::load(&["group.z=1"]), Err(Error::InvalidConfig(_))));
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"group": {"tt": 0.6}}"#).unwrap();
        assert!(matches!(
            RunConfig::load(&[file.to_str().unwrap()]),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for o in [
            "group.t=1.5",
            "grid.m=0",
            "sample.n=0",
            "train.epochs=0",
            "group.k=\"x\"",
        ] {
            assert!(matches!(RunConfig::load(&[o]), Err(Error::InvalidConfig(_))), "{o}");
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            RunConfig::load(&["/nonexistent/c.json"]),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn lock_file_holds_the_effective_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::load(&["group.u=0.25"]).unwrap();
        cfg.write_lock(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(LOCK_FILE)).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
