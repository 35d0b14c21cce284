//! JSON config documents and `--set path=value` overrides.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// One `path=value` override.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: String,
    pub value: Value,
}

impl FromStr for Override {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (path, raw) = s
            .split_once('=')
            .ok_or_else(|| format!("expected path=value, got `{s}`"))?;
        let path = path.trim();
        if path.is_empty() {
            return Err(format!("empty path in `{s}`"));
        }
        // Bare words such as `tau_proportional` are taken as strings.
        let value =
            serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
        Ok(Override {
            path: path.into(),
            value,
        })
    }
}

/// Seed list written as `7`, `1,4,9` or `0..10` (end exclusive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |e: std::num::ParseIntError| format!("bad seed list `{s}`: {e}");
        let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
            let (a, b): (u64, u64) = (
                a.trim().parse().map_err(bad)?,
                b.trim().parse().map_err(bad)?,
            );
            (a..b).collect()
        } else {
            s.split(',')
                .map(|p| p.trim().parse().map_err(bad))
                .collect::<Result<_, _>>()?
        };
        if seeds.is_empty() {
            return Err(format!("seed list `{s}` is empty"));
        }
        Ok(SeedList(seeds))
    }
}

/// Comma-separated floats.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|e| format!("bad number `{p}`: {e}"))
            })
            .collect::<Result<_, _>>()?;
        Ok(FloatList(values))
    }
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Recursively overlays `top` onto `base`; non-object values replace.
fn merge(base: &mut Value, top: Value) {
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

fn decode<T: DeserializeOwned>(value: Value, origin: &str) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

fn encode<T: Serialize>(doc: &T) -> Result<Value, CliError> {
    serde_json::to_value(doc).map_err(|e| CliError::Runtime(format!("cannot encode config: {e}")))
}

/// Replaces the existing leaf at dotted `path`. Array elements are
/// addressed by index.
pub fn apply_override(doc: &mut Value, ov: &Override) -> Result<(), CliError> {
    let unknown = || CliError::Config(format!("unknown parameter path `{}`", ov.path));
    let mut node = doc;
    for part in ov.path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part).ok_or_else(unknown)?,
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| unknown())?;
                items.get_mut(idx).ok_or_else(unknown)?
            }
            _ => return Err(unknown()),
        };
    }
    *node = ov.value.clone();
    Ok(())
}

/// `base`, overlaid with the optional file, then with the overrides in order.
/// Unknown keys in the file and unknown override paths are config errors.
pub fn resolve<T: Serialize + DeserializeOwned>(
    base: T,
    file: Option<&Path>,
    overrides: &[Override],
) -> Result<T, CliError> {
    let mut doc = encode(&base)?;
    if let Some(path) = file {
        merge(&mut doc, read_json(path)?);
        // Normalize so every field exists before overrides are resolved.
        let parsed: T = decode(doc, &path.display().to_string())?;
        doc = encode(&parsed)?;
    }
    for ov in overrides {
        apply_override(&mut doc, ov)?;
    }
    decode(doc, "overrides")
}
