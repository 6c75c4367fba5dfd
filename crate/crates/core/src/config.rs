//! Run configuration: every module config in one place, read from a JSON
//! object whose keys are flat dotted paths (`"train.optimizer.lr": 3e-4`).
//!
//! Keys are checked against the defaults, so a typo is an error rather than
//! a silently ignored setting. Per-module `seed` fields are not exposed; the
//! top-level `seed` drives all of them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::contactgen::DataGenConfig;
use crate::control::IkConfig;
use crate::encoder::{EncoderConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::percept::{SegmentationConfig, TrackerConfig};
use crate::policyhead::PolicyConfig;
use crate::poses::DEFAULT_MARGIN;
use crate::reward::RewardParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosesConfig {
    /// Smallest COM-to-support-edge distance for a pose to count as stable.
    pub margin_min: f64,
}

impl Default for PosesConfig {
    fn default() -> Self {
        PosesConfig {
            margin_min: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads for data generation; `None` uses every logical core.
    pub jobs: Option<usize>,
    pub datagen: DataGenConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub policy: PolicyConfig,
    pub track: TrackerConfig,
    pub segment: SegmentationConfig,
    pub poses: PosesConfig,
    pub reward: RewardParams,
    pub ik: IkConfig,
}

const HIDDEN_KEYS: [&str; 3] = ["datagen.seed", "train.seed", "track.seed"];

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, sub) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, sub, out);
            }
        }
        _ => out.push(prefix.to_string()),
    }
}

fn slot<'a>(root: &'a mut Value, key: &str) -> Option<&'a mut Value> {
    let mut cur = root;
    for part in key.split('.') {
        cur = cur.as_object_mut()?.get_mut(part)?;
    }
    // only leaves are settable; whole sections must be given key by key
    (!cur.is_object()).then_some(cur)
}

impl RunConfig {
    /// Every accepted key, sorted.
    pub fn keys() -> Vec<String> {
        let v = serde_json::to_value(RunConfig::default()).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &v, &mut out);
        out.retain(|k| !HIDDEN_KEYS.contains(&k.as_str()));
        out.sort();
        out
    }

    /// Flat dotted view of the whole configuration.
    pub fn to_flat_json(&self) -> Value {
        let v = serde_json::to_value(self).expect("config serializes");
        let mut map = Map::new();
        for k in Self::keys() {
            let mut cur = &v;
            for part in k.split('.') {
                cur = &cur[part];
            }
            map.insert(k, cur.clone());
        }
        Value::Object(map)
    }

    /// Applies flat `key → value` overrides on top of `self`, rejecting
    /// unknown keys and values of the wrong type, then validates.
    pub fn apply(&self, overrides: &Map<String, Value>) -> Result<RunConfig> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        for (k, val) in overrides {
            if HIDDEN_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("`{k}` is set through the top-level `seed` key")));
            }
            let s = slot(&mut v, k).ok_or_else(|| Error::Config(format!("unknown key `{k}`")))?;
            *s = val.clone();
        }
        let mut cfg: RunConfig =
            serde_json::from_value(v).map_err(|e| Error::Config(format!("bad value: {e}")))?;
        cfg.sync_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<RunConfig> {
        match serde_json::from_str::<Value>(s)? {
            Value::Object(m) => RunConfig::default().apply(&m),
            _ => Err(Error::Config("config file must hold a JSON object".into())),
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Parses `key=value`; the value is JSON, or a bare string when it does
    /// not parse as JSON (so `track.icp.mode=point-to-point` works).
    pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{s}`")))?;
        let val = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        Ok((k.trim().to_string(), val))
    }

    fn sync_seeds(&mut self) {
        self.datagen.seed = self.seed;
        self.train.seed = self.seed;
        self.track.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.datagen.validate()?;
        self.encoder.validate()?;
        self.train.validate()?;
        self.policy.validate()?;
        self.track.validate()?;
        self.segment.validate()?;
        self.reward.validate()?;
        self.ik.validate()?;
        if self.datagen.n_surface_points != self.encoder.patch.n_points {
            return Err(Error::Config(format!(
                "datagen.n_surface_points ({}) must equal encoder.patch.n_points ({})",
                self.datagen.n_surface_points, self.encoder.patch.n_points
            )));
        }
        if self.policy.embed_dim != self.encoder.d_model || self.policy.n_patches != self.encoder.patch.n_patches {
            return Err(Error::Config("policy.embed_dim / policy.n_patches must match the encoder".into()));
        }
        if !(self.poses.margin_min >= 0.0) {
            return Err(Error::Config("poses.margin_min must be >= 0".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn obj(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        let d = RunConfig::default();
        d.validate().unwrap();
        let flat = d.to_flat_json();
        let back = RunConfig::default().apply(flat.as_object().unwrap()).unwrap();
        assert_eq!(back, d);
        assert!(RunConfig::keys().contains(&"track.icp.mode".to_string()));
        assert!(!RunConfig::keys().contains(&"train.seed".to_string()));
    }

    #[test]
    fn overrides_apply() {
        let c = RunConfig::default()
            .apply(&obj(json!({"seed": 7, "train.optimizer.lr": 0.01, "track.icp.mode": "point-to-point"})))
            .unwrap();
        assert_eq!(c.train.optimizer.lr, 0.01);
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.datagen.seed, 7);
        assert_eq!(c.track.icp.mode, crate::percept::IcpMode::PointToPoint);
    }

    #[test]
    fn unknown_and_bad_keys_rejected() {
        let d = RunConfig::default();
        for bad in [
            json!({"train.lr": 0.1}),
            json!({"train": 1}),
            json!({"train.optimizer": {"lr": 0.1}}),
            json!({"train.seed": 3}),
            json!({"train.batch_size": "big"}),
            json!({"train.batch_size": 0}),
            json!({"datagen.n_surface_points": 256}),
        ] {
            assert!(d.apply(&obj(bad.clone())).is_err(), "{bad}");
        }
    }

    #[test]
    fn assignment_parsing() {
        let (k, v) = RunConfig::parse_assignment("track.icp.mode=point-to-point").unwrap();
        assert_eq!((k.as_str(), v), ("track.icp.mode", json!("point-to-point")));
        let (_, v) = RunConfig::parse_assignment("datagen.workspace.min=[-1,-1,-1]").unwrap();
        assert_eq!(v, json!([-1, -1, -1]));
        assert!(RunConfig::parse_assignment("nope").is_err());
    }
}
