//! Run configuration: a TOML file with flat `--set key=val` overrides.

use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tcgan::networks::NetworkSpecs;
use tcgan::types::TrainConfig;

/// Ablation switch: 0 keeps the full objective.
pub const ABLATION_IDS: [u8; 4] = [0, 1, 2, 3];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// attr_edit | multi_domain | inpaint
    pub task: String,
    /// Dataset directory (from `tcgan gen`).
    pub dataset: PathBuf,
    /// Output root; falls back to $TCGAN_OUT_ROOT, then "runs".
    pub out_root: Option<PathBuf>,
    /// Run directory name; defaults to `<task>-s<seed>-<config hash>`.
    pub run_name: Option<String>,
    pub checkpoint_every: usize,
    pub sample_every: usize,
    /// Ablation id: 0 none, 1 zeroes all transition-consistency weights,
    /// 2 zeroes lambda2, 3 zeroes lambda3.
    pub ablation: u8,
    pub train: TrainConfig,
    pub networks: NetworkSpecs,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: "attr_edit".into(),
            dataset: PathBuf::from("data/shapes"),
            out_root: None,
            run_name: None,
            checkpoint_every: 1000,
            sample_every: 1000,
            ablation: 0,
            train: TrainConfig::default(),
            networks: NetworkSpecs::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))
    }

    /// Apply one `key=value` override with a dotted path, e.g.
    /// `train.lr=0.0002` or `networks.generator.base_channels=16`.
    pub fn apply_override(text: &mut toml::Value, spec: &str) -> Result<(), CliError> {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("override `{spec}` is not key=value")))?;
        let parsed: toml::Value = if let Ok(v) = raw.parse::<i64>() {
            v.into()
        } else if let Ok(v) = raw.parse::<f64>() {
            v.into()
        } else if let Ok(v) = raw.parse::<bool>() {
            v.into()
        } else {
            toml::Value::String(raw.to_string())
        };
        let mut cur = text;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = cur
                .as_table_mut()
                .ok_or_else(|| CliError::usage(format!("override path `{path}` is not a table")))?;
            if i == parts.len() - 1 {
                table.insert(part.to_string(), parsed);
                return Ok(());
            }
            cur = table
                .entry(part.to_string())
                .or_insert(toml::Value::Table(Default::default()));
        }
        Ok(())
    }

    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| CliError::usage(format!("config: {e}")))?;
        for ov in overrides {
            Self::apply_override(&mut value, ov)?;
        }
        let rendered = toml::to_string(&value)
            .map_err(|e| CliError::usage(format!("config: {e}")))?;
        Self::from_toml_str(&rendered)
    }

    /// Training config with the ablation applied and `d_t` aligned.
    pub fn effective_train(&self) -> Result<TrainConfig, CliError> {
        let mut t = self.train.clone();
        match self.ablation {
            0 => {}
            1 => {
                t.lambda1 = 0.0;
                t.lambda2 = 0.0;
                t.lambda3 = 0.0;
            }
            2 => t.lambda2 = 0.0,
            3 => t.lambda3 = 0.0,
            other => {
                return Err(CliError::usage(format!(
                    "ablation must be 0..=3, got {other}"
                )))
            }
        }
        Ok(t)
    }

    pub fn effective_specs(&self) -> NetworkSpecs {
        self.networks.clone().with_dt(self.train.d_t)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("serializable config")
    }

    /// Stable short hash of the serialized config (FNV-1a).
    pub fn hash8(&self) -> String {
        let text = self.to_toml();
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")[..8].to_string()
    }

    pub fn out_root(&self) -> PathBuf {
        if let Some(r) = &self.out_root {
            return r.clone();
        }
        if let Ok(env) = std::env::var("TCGAN_OUT_ROOT") {
            if !env.is_empty() {
                return PathBuf::from(env);
            }
        }
        PathBuf::from("runs")
    }

    pub fn run_dir(&self) -> PathBuf {
        let name = match &self.run_name {
            Some(n) => n.clone(),
            None => format!("{}-s{}-{}", self.task, self.train.seed, self.hash8()),
        };
        self.out_root().join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_unknown_keys() {
        let text = "task = \"attr_edit\"\n[train]\nlr = 0.001\n";
        let mut v: toml::Value = text.parse().unwrap();
        RunConfig::apply_override(&mut v, "train.lr=0.0005").unwrap();
        RunConfig::apply_override(&mut v, "ablation=2").unwrap();
        let rendered = toml::to_string(&v).unwrap();
        let cfg = RunConfig::from_toml_str(&rendered).unwrap();
        assert_eq!(cfg.train.lr, 0.0005);
        assert_eq!(cfg.ablation, 2);

        // unknown key is rejected and named
        let bad = "task = \"attr_edit\"\nlearning_rate = 1.0\n";
        let err = RunConfig::from_toml_str(bad).unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn ablation_zeroes_coefficients() {
        let mut cfg = RunConfig::default();
        cfg.ablation = 1;
        let t = cfg.effective_train().unwrap();
        assert_eq!((t.lambda1, t.lambda2, t.lambda3), (0.0, 0.0, 0.0));
        cfg.ablation = 2;
        let t = cfg.effective_train().unwrap();
        assert_eq!(t.lambda2, 0.0);
        assert!(t.lambda1 > 0.0 && t.lambda3 > 0.0);
        cfg.ablation = 3;
        let t = cfg.effective_train().unwrap();
        assert_eq!(t.lambda3, 0.0);
        assert!(t.lambda1 > 0.0 && t.lambda2 > 0.0);
    }
}
