//! `manifest.json`: config echo, stage digests and a digest for every
//! artifact written into the output directory.
//!
//! Wall-clock times go to `timings.json`, which is the one file the manifest
//! does not list, so that identical runs give identical manifests.

use std::path::Path;

use induction_core::digest::sha256_hex;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::io::{read_bytes, write_bytes};

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";
pub const STAGES: [&str; 5] = ["generate", "pretrain", "induce", "battery", "report"];

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    value: Value,
}

impl Manifest {
    pub fn load_or_new(dir: &Path) -> LabResult<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(Self {
                value: json!({
                    "tool": format!("induction-lab {}", env!("CARGO_PKG_VERSION")),
                    "config": {},
                    "stages": {},
                    "artifacts": {},
                }),
            });
        }
        let value: Value =
            serde_json::from_slice(&read_bytes(&path)?).map_err(|e| LabError::Manifest(e.to_string()))?;
        for key in ["stages", "artifacts", "config"] {
            if !value.get(key).is_some_and(Value::is_object) {
                return Err(LabError::Manifest(format!("no {key} object")));
            }
        }
        Ok(Self { value })
    }

    fn object(&mut self, key: &str) -> &mut Map<String, Value> {
        self.value[key].as_object_mut().expect("checked on load")
    }

    pub fn stage_digest(&self, stage: &str) -> Option<&str> {
        self.value["stages"][stage]["config_digest"].as_str()
    }

    pub fn artifact_digest(&self, name: &str) -> Option<&str> {
        self.value["artifacts"][name].as_str()
    }

    pub fn artifacts(&self) -> Vec<(String, String)> {
        self.value["artifacts"]
            .as_object()
            .map(|m| {
                m.iter()
                    .map(|(k, v)| (k.clone(), v.as_str().unwrap_or("").to_string()))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.value.get(key)
    }

    /// Refuses when `stage` has not run, or ran under different settings.
    pub fn require_stage(&self, stage: &'static str, current: &str, artifact: &str) -> LabResult<()> {
        match self.stage_digest(stage) {
            None => Err(LabError::Missing {
                artifact: artifact.into(),
                stage,
            }),
            Some(recorded) if recorded != current => Err(LabError::StageMismatch {
                stage,
                recorded: recorded.into(),
                current: current.into(),
            }),
            Some(_) => Ok(()),
        }
    }

    /// Drops `stage` and every later stage, deleting the files they listed.
    pub fn invalidate_from(&mut self, dir: &Path, stage: &str) -> LabResult<()> {
        let start = STAGES.iter().position(|s| *s == stage).expect("known stage");
        for s in &STAGES[start..] {
            let Some(entry) = self.object("stages").remove(*s) else {
                continue;
            };
            for name in entry["artifacts"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(Value::as_str)
            {
                self.object("artifacts").remove(name);
                let path = dir.join(name);
                if path.exists() {
                    std::fs::remove_file(&path).map_err(|source| LabError::Io { path, source })?;
                }
            }
        }
        Ok(())
    }

    /// Records a finished stage and the digests of its files.
    pub fn record_stage(
        &mut self,
        cfg: &ExperimentConfig,
        stage: &str,
        config_digest: &str,
        files: &[(String, Vec<u8>)],
        extra: &[(&str, Value)],
    ) {
        let echo: Map<String, Value> = cfg
            .echo()
            .into_iter()
            .filter(|(k, _)| *k != "out_dir")
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect();
        self.value["config"] = Value::Object(echo);
        let names: Vec<Value> = files.iter().map(|(n, _)| Value::String(n.clone())).collect();
        self.object("stages").insert(
            stage.to_string(),
            json!({ "config_digest": config_digest, "artifacts": names }),
        );
        for (name, bytes) in files {
            self.object("artifacts")
                .insert(name.clone(), Value::String(sha256_hex(bytes)));
        }
        for (k, v) in extra {
            self.value[*k] = v.clone();
        }
    }

    pub fn save(&self, dir: &Path) -> LabResult<()> {
        let mut text = serde_json::to_string_pretty(&self.value).expect("manifest serializes");
        text.push('\n');
        write_bytes(&dir.join(MANIFEST), text.as_bytes())
    }
}
