use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fracevo::spectral_model::ModelConfig;
use fracevo::{SpectralModel, TimeGrid};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Merged run configuration: file keys first, command-line keys on top.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Command-specific keys, everything except `seed` and `out`.
    pub keys: Map<String, Value>,
}

impl RunConfig {
    pub fn build(file: Option<&Path>, seed: Option<u64>, out: Option<PathBuf>, overrides: &[String]) -> Result<Self> {
        let mut keys = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))? {
                    Value::Object(m) => m,
                    _ => bail!("config {} must be a JSON object", p.display()),
                }
            }
            None => Map::new(),
        };
        apply_overrides(&mut keys, overrides)?;
        let seed = match (seed, keys.remove("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => v.as_u64().ok_or_else(|| anyhow!("seed must be an unsigned 64-bit integer, got {v}"))?,
            (None, None) => DEFAULT_SEED,
        };
        let out = match (out, keys.remove("out")) {
            (Some(o), _) => o,
            (None, Some(Value::String(s))) => PathBuf::from(s),
            (None, Some(v)) => bail!("out must be a path, got {v}"),
            (None, None) => PathBuf::from("fracevo-out"),
        };
        Ok(Self { seed, out, keys })
    }

    /// Command keys laid over `T::default()`, so a nested override such as
    /// `grid.n=11` keeps the other default grid fields.
    pub fn section<T: DeserializeOwned + Serialize + Default>(&self, command: &str) -> Result<T> {
        let mut base = serde_json::to_value(T::default())?;
        merge(&mut base, Value::Object(self.keys.clone()));
        serde_json::from_value(base).map_err(|e| anyhow!("invalid configuration for {command}: {e}"))
    }

    pub fn echo(&self) -> Value {
        let mut m = self.keys.clone();
        m.insert("seed".into(), self.seed.into());
        m.insert("out".into(), self.out.display().to_string().into());
        Value::Object(m)
    }
}

/// Accepts `key=value`, `--key value` and `--key=value`; dotted keys address
/// nested objects, dashes in keys read as underscores.
pub fn apply_overrides(map: &mut Map<String, Value>, args: &[String]) -> Result<()> {
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let (key, raw) = if let Some(flag) = arg.strip_prefix("--") {
            match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| anyhow!("--{flag} needs a value"))?;
                    (flag.to_string(), v.clone())
                }
            }
        } else if let Some((k, v)) = arg.split_once('=') {
            (k.to_string(), v.to_string())
        } else {
            bail!("unexpected argument {arg:?}; overrides look like key=value");
        };
        let key = key.replace('-', "_");
        if key.is_empty() {
            bail!("empty key in {arg:?}");
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        set_path(map, &key, value)?;
    }
    Ok(())
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

fn set_path(map: &mut Map<String, Value>, key: &str, value: Value) -> Result<()> {
    match key.split_once('.') {
        None => {
            map.insert(key.to_string(), value);
        }
        Some((head, rest)) => {
            let slot = map.entry(head.to_string()).or_insert_with(|| Value::Object(Map::new()));
            match slot {
                Value::Object(inner) => set_path(inner, rest, value)?,
                _ => bail!("{head} is not an object, cannot set {key}"),
            }
        }
    }
    Ok(())
}

/// A model given inline (explicit spectrum or builder keys) or as a path to a
/// JSON file.
pub fn model_from(value: &Option<Value>, default: impl FnOnce() -> fracevo::Result<SpectralModel>) -> Result<SpectralModel> {
    match value {
        None => Ok(default()?),
        Some(Value::String(path)) => Ok(SpectralModel::from_json_file(Path::new(path))?),
        Some(v) => {
            let cfg: ModelConfig =
                serde_json::from_value(v.clone()).map_err(|e| anyhow!("invalid model description: {e}"))?;
            Ok(cfg.build()?)
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t0: f64,
    pub t1: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.t0, self.t1, self.n)?)
    }
}
