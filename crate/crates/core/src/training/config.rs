//! Training configuration with flat dotted keys (`lambda`,
//! `epochs.finetune`, `model.d_hidden`, `ablation.no_mi`, ...).
//!
//! Resolution order is defaults, then a TOML file, then `key=value`
//! overrides. Unknown keys and type mismatches are errors naming the key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ablation, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Epochs {
    pub pretrain_ae: usize,
    pub pretrain_trans: usize,
    pub pretrain_mi: usize,
    pub finetune: usize,
}

impl Default for Epochs {
    fn default() -> Self {
        Epochs { pretrain_ae: 100, pretrain_trans: 100, pretrain_mi: 50, finetune: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Master seed for initialization, anchors, batching and negatives.
    pub seed: u64,
    /// Reconstruction weight.
    pub lambda: f64,
    /// Mutual-information weight.
    pub mu: f64,
    /// Loss weight on non-edges.
    pub delta: f64,
    pub lr: f64,
    /// Graphs per optimizer step.
    pub batch_size: usize,
    /// Write `checkpoint` every this many fine-tune epochs; 0 disables.
    pub checkpoint_every: usize,
    pub epochs: Epochs,
    pub model: ModelConfig,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            lambda: 1.0,
            mu: 1.0,
            delta: 0.5,
            lr: 0.001,
            batch_size: 8,
            checkpoint_every: 0,
            epochs: Epochs::default(),
            model: ModelConfig::default(),
            ablation: Ablation::default(),
        }
    }
}

fn type_name(v: &toml::Value) -> &'static str {
    match v {
        toml::Value::String(_) => "a string",
        toml::Value::Integer(_) => "an integer",
        toml::Value::Float(_) => "a number",
        toml::Value::Boolean(_) => "a boolean",
        toml::Value::Datetime(_) => "a datetime",
        toml::Value::Array(_) => "an array",
        toml::Value::Table(_) => "a table",
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl TrainConfig {
    fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    /// Every settable key with its current value, in declaration order.
    pub fn flat(&self) -> Vec<(String, toml::Value)> {
        let mut out = Vec::new();
        flatten("", &self.to_table(), &mut out);
        out
    }

    /// Sets one dotted key. Integers are accepted where numbers are expected.
    pub fn set_value(&mut self, key: &str, value: toml::Value) -> Result<()> {
        let mut table = self.to_table();
        let unknown = || Error::config(key, "unknown key");
        let (path, last) = match key.rsplit_once('.') {
            Some((path, last)) => (Some(path), last),
            None => (None, key),
        };
        let mut cur = &mut table;
        for part in path.into_iter().flat_map(|p| p.split('.')) {
            cur = match cur.get_mut(part) {
                Some(toml::Value::Table(t)) => t,
                _ => return Err(unknown()),
            };
        }
        let slot = cur.get_mut(last).ok_or_else(unknown)?;
        *slot = match (&*slot, value) {
            (toml::Value::Table(_), _) => return Err(Error::config(key, "is a section, not a value")),
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (old, new) if std::mem::discriminant(old) == std::mem::discriminant(&new) => new,
            (old, new) => {
                return Err(Error::config(key, format!("expected {}, got {}", type_name(old), type_name(&new))));
            }
        };
        *self = table.try_into().map_err(|e: toml::de::Error| Error::config(key, e.message().trim().to_string()))?;
        Ok(())
    }

    /// Sets one dotted key from its text form, e.g. `("lambda", "0.3")` or
    /// `("model.link", "row_softmax")`. Bare words are read as strings.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        self.set_value(key, value)
    }

    /// Applies every key in a TOML document; nested tables and dotted keys
    /// are equivalent.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        for (key, value) in flat {
            self.set_value(&key, value)?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides`, then validation.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
            cfg.apply_toml(&text)?;
        }
        for (key, raw) in overrides {
            cfg.set(key, raw)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(Error::config(key, msg)) };
        check(self.lambda >= 0.0 && self.lambda.is_finite(), "lambda", "must be a finite number >= 0")?;
        check(self.mu >= 0.0 && self.mu.is_finite(), "mu", "must be a finite number >= 0")?;
        check(self.delta > 0.0 && self.delta <= 1.0, "delta", "must lie in (0, 1]")?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr", "must be a finite number > 0")?;
        check(self.batch_size >= 1, "batch_size", "must be at least 1")?;
        Ok(())
    }

    /// MI weight after ablations.
    pub fn effective_mu(&self) -> f64 {
        if self.ablation.uses_mi() {
            self.mu
        } else {
            0.0
        }
    }

    /// One `key = value` line per setting.
    pub fn snapshot(&self) -> String {
        self.flat().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
