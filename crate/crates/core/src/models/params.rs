use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Raw named parameters as they appear in a config file.
pub type ParamTable = BTreeMap<String, f64>;

/// Resolves a fixed list of keys from an optional preset plus overrides.
///
/// Missing keys are reported together; unknown override keys are rejected.
pub(crate) struct Resolver<'a> {
    system: &'a str,
    preset: &'a [(&'static str, f64)],
    overrides: &'a ParamTable,
}

impl<'a> Resolver<'a> {
    pub(crate) fn new(
        system: &'a str,
        keys: &[&'static str],
        preset: &'a [(&'static str, f64)],
        overrides: &'a ParamTable,
    ) -> Result<Self> {
        if let Some(k) = overrides.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(Error::config(format!(
                "system.params.{k}: unknown parameter for {system} (expected one of {})",
                keys.join(", ")
            )));
        }
        let missing: Vec<&str> = keys
            .iter()
            .copied()
            .filter(|k| !overrides.contains_key(*k) && !preset.iter().any(|(p, _)| p == k))
            .collect();
        if !missing.is_empty() {
            return Err(Error::config(format!(
                "system.params: {system} is missing {}",
                missing.join(", ")
            )));
        }
        Ok(Self {
            system,
            preset,
            overrides,
        })
    }

    pub(crate) fn get(&self, key: &str) -> Result<f64> {
        let v = self
            .overrides
            .get(key)
            .copied()
            .or_else(|| self.preset.iter().find(|(k, _)| *k == key).map(|&(_, v)| v))
            .ok_or_else(|| Error::config(format!("system.params.{key}: missing")))?;
        if !v.is_finite() {
            return Err(Error::config(format!(
                "system.params.{key}: {} needs a finite value, got {v}",
                self.system
            )));
        }
        Ok(v)
    }
}
