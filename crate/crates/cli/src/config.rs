//! `--config` TOML handling: a top-level `seed` plus one table per
//! subcommand (`[gen-layouts]`, `[train]`, ...) whose keys mirror the flags
//! in snake_case. Flags given on the command line win over the file.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let seed = match table.remove("seed") {
            None => None,
            Some(toml::Value::Integer(s)) if s >= 0 => Some(s as u64),
            Some(other) => bail!("config `seed` must be a non-negative integer, got {other}"),
        };
        for (key, value) in &table {
            if !value.is_table() {
                bail!("config key `{key}` must be a table named after a subcommand");
            }
        }
        Ok(Self { seed, table })
    }

    /// Fills unset fields of `flags` from the `[command]` table.
    pub fn resolve<T: Serialize + DeserializeOwned + Default>(&self, command: &str, flags: &T) -> anyhow::Result<T> {
        let Some(section) = self.table.get(command) else { return clone_via_json(flags) };
        let known = match serde_json::to_value(T::default())? {
            Value::Object(m) => m,
            _ => unreachable!("argument structs serialize to objects"),
        };
        let mut merged = match serde_json::to_value(section)? {
            Value::Object(m) => m,
            _ => unreachable!("checked to be a table on load"),
        };
        if let Some(bad) = merged.keys().find(|k| !known.contains_key(*k)) {
            bail!("unknown key `{bad}` in config table [{command}]");
        }
        if let Value::Object(given) = serde_json::to_value(flags)? {
            for (k, v) in given {
                if !v.is_null() {
                    merged.insert(k, v);
                }
            }
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| anyhow!("config table [{command}]: {e}"))
    }
}

fn clone_via_json<T: Serialize + DeserializeOwned>(v: &T) -> anyhow::Result<T> {
    Ok(serde_json::from_value(serde_json::to_value(v)?)?)
}
