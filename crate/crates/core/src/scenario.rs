//! Scenario configuration: one document with the sections `parameters`,
//! `central_bank`, `shocks`, `interventions` and `run`.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::calendar::Month;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::policy::{CentralBankConfig, InterventionSchedule};
use crate::shocks::ShockSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub seed: u64,
    /// First recorded month.
    pub start: Month,
    /// Number of recorded months.
    pub horizon_months: u32,
    /// Months simulated and discarded before `start`.
    pub equilibration_months: u32,
    /// Keep every `stride`-th month in exported series.
    pub stride: u32,
    /// Stop a run once perceived inflation, compounded to a yearly rate,
    /// exceeds this value.
    pub runaway_inflation: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            seed: 1,
            start: Month::new(2019, 2),
            horizon_months: 144,
            equilibration_months: 1200,
            stride: 1,
            runaway_inflation: 1e4,
        }
    }
}

impl RunSettings {
    /// Month after the last recorded one.
    pub fn end(&self) -> Month {
        self.start.offset(self.horizon_months as i32)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub parameters: ModelParams,
    pub central_bank: CentralBankConfig,
    pub shocks: ShockSchedule,
    pub interventions: InterventionSchedule,
    pub run: RunSettings,
}

/// Names accepted by [`ScenarioConfig::preset`].
pub const PRESETS: [&str; 3] = ["inactive", "anchored", "floating"];

impl ScenarioConfig {
    /// Named scenario: `inactive`, `anchored` or `floating`, with all three shocks on.
    pub fn preset(name: &str) -> Result<Self> {
        let central_bank = match name {
            "inactive" => CentralBankConfig::inactive(),
            "anchored" => CentralBankConfig::anchored(),
            "floating" => CentralBankConfig::floating(),
            _ => {
                return Err(Error::config(
                    "preset",
                    format!("unknown preset `{name}`; expected one of {}", PRESETS.join(", ")),
                ))
            }
        };
        Ok(ScenarioConfig {
            central_bank,
            ..ScenarioConfig::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.parameters.validate()?;
        self.central_bank.validate()?;
        self.shocks.validate()?;
        self.interventions.validate(self.parameters.energy_payout)?;
        let run = &self.run;
        if run.stride == 0 {
            return Err(Error::config("run.stride", "must be >= 1"));
        }
        if !(run.runaway_inflation > 0.0) {
            return Err(Error::config("run.runaway_inflation", "must be > 0"));
        }
        let heli = &self.interventions.helicopter;
        if heli.enabled && run.horizon_months > 0 && (heli.month < run.start || heli.month >= run.end()) {
            return Err(Error::config(
                "interventions.helicopter.month",
                format!("{} lies outside the recorded window {}..{}", heli.month, run.start, run.end()),
            ));
        }
        Ok(())
    }

    /// Parse a TOML document; unknown keys and ill-typed values are reported by dotted path.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: toml::Value =
            toml::from_str(text).map_err(|e| Error::config("document", e.message().to_string()))?;
        let json = serde_json::to_value(doc).map_err(|e| Error::Serialization(e.to_string()))?;
        Self::from_json_value(json)
    }

    /// Build from a JSON value with the same schema as the TOML document.
    pub fn from_json_value(doc: Value) -> Result<Self> {
        let reference = to_json(&ScenarioConfig::default());
        check_keys(&doc, &reference, "")?;
        match serde_json::from_value::<ScenarioConfig>(doc.clone()) {
            Ok(c) => Ok(c),
            Err(e) => Err(locate_type_error(&doc, &reference).unwrap_or_else(|| Error::config("document", e.to_string()))),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        to_json(self)
    }

    /// SHA-256 over the canonical (key-sorted) JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.to_json()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Dotted paths of every scalar field.
    pub fn scalar_paths() -> Vec<String> {
        let mut out = Vec::new();
        collect_leaves(&to_json(&ScenarioConfig::default()), "", &mut out);
        out
    }

    /// Current value at a dotted path.
    pub fn get(&self, path: &str) -> Result<Value> {
        let doc = self.to_json();
        lookup(&doc, path).cloned().ok_or_else(|| unknown_path(path))
    }

    /// Numeric value at a dotted path.
    pub fn get_f64(&self, path: &str) -> Result<f64> {
        self.get(path)?
            .as_f64()
            .ok_or_else(|| Error::config(path, "not a numeric field"))
    }

    /// Replace the value at a dotted path, keeping the schema.
    pub fn set(&mut self, path: &str, value: Value) -> Result<()> {
        let mut doc = self.to_json();
        let slot = lookup_mut(&mut doc, path).ok_or_else(|| unknown_path(path))?;
        if slot.is_object() {
            return Err(Error::config(path, "names a section, not a field"));
        }
        *slot = value;
        let parsed: ScenarioConfig = serde_json::from_value(doc)
            .map_err(|e| Error::config(path, e.to_string()))?;
        *self = parsed;
        Ok(())
    }

    /// Set a numeric field, accepting integer fields when `value` is integral.
    pub fn set_f64(&mut self, path: &str, value: f64) -> Result<()> {
        let current = self.get(path)?;
        let json = if current.is_u64() || current.is_i64() {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::config(path, format!("expects a non-negative integer, got {value}")));
            }
            Value::from(value as u64)
        } else if current.is_f64() {
            Value::from(value)
        } else {
            return Err(Error::config(path, "not a numeric field"));
        };
        self.set(path, json)
    }

    /// Apply a textual `key=value` override. The value is read according to
    /// the type of the field it replaces.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, text) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must have the form key=value"))?;
        let path = path.trim();
        let text = text.trim();
        let current = self.get(path)?;
        let value = match current {
            Value::Bool(_) => Value::Bool(
                text.parse()
                    .map_err(|_| Error::config(path, format!("expects true or false, got `{text}`")))?,
            ),
            Value::Number(n) => {
                if n.is_f64() {
                    let v: f64 = text
                        .parse()
                        .map_err(|_| Error::config(path, format!("expects a number, got `{text}`")))?;
                    Value::from(v)
                } else {
                    let v: u64 = text.parse().map_err(|_| {
                        Error::config(path, format!("expects a non-negative integer, got `{text}`"))
                    })?;
                    Value::from(v)
                }
            }
            Value::String(_) => Value::String(text.to_string()),
            Value::Array(_) => {
                let items: std::result::Result<Vec<f64>, _> = text
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse::<f64>())
                    .collect();
                let items = items.map_err(|_| Error::config(path, format!("expects a list of numbers, got `{text}`")))?;
                Value::from(items)
            }
            Value::Object(_) | Value::Null => {
                return Err(Error::config(path, "names a section, not a field"))
            }
        };
        self.set(path, value)
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config serializes")
}

fn unknown_path(path: &str) -> Error {
    let valid = ScenarioConfig::scalar_paths();
    let section = path.split('.').next().unwrap_or("");
    let near: Vec<&String> = valid.iter().filter(|p| p.starts_with(section)).collect();
    let listing = if near.is_empty() {
        valid.join(", ")
    } else {
        near.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
    };
    Error::config(path, format!("unknown key; valid keys: {listing}"))
}

fn lookup<'a>(doc: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(doc, |v, key| v.as_object()?.get(key))
}

fn lookup_mut<'a>(doc: &'a mut Value, path: &str) -> Option<&'a mut Value> {
    path.split('.').try_fold(doc, |v, key| v.as_object_mut()?.get_mut(key))
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn collect_leaves(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v.as_object() {
        Some(map) => {
            for (k, child) in map {
                collect_leaves(child, &join(prefix, k), out);
            }
        }
        None => out.push(prefix.to_string()),
    }
}

fn check_keys(doc: &Value, reference: &Value, prefix: &str) -> Result<()> {
    let (Some(map), Some(refmap)) = (doc.as_object(), reference.as_object()) else {
        if reference.is_object() {
            let key = if prefix.is_empty() { "document" } else { prefix };
            return Err(Error::config(key, "expected a table"));
        }
        return Ok(());
    };
    for (k, v) in map {
        let path = join(prefix, k);
        match refmap.get(k) {
            Some(r) => check_keys(v, r, &path)?,
            None => return Err(unknown_path(&path)),
        }
    }
    Ok(())
}

/// Find the first leaf whose value does not fit its field.
fn locate_type_error(doc: &Value, reference: &Value) -> Option<Error> {
    let mut leaves = Vec::new();
    collect_leaves(doc, "", &mut leaves);
    for path in leaves {
        let mut probe = reference.clone();
        let value = lookup(doc, &path)?.clone();
        *lookup_mut(&mut probe, &path)? = value;
        if let Err(e) = serde_json::from_value::<ScenarioConfig>(probe) {
            return Some(Error::config(path, e.to_string()));
        }
    }
    None
}
