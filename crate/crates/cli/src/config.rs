//! Parameter resolution: built-in defaults, then the config file, then
//! command-line flags.
//!
//! A config file is flat TOML. Output files embed the resolved config and
//! can be passed back through `--config`: CSV output carries it as `# `
//! comment lines after a `# mdiqkd <command>` marker, JSON output under a
//! `"config"` key.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub const MARKER_PREFIX: &str = "# mdiqkd ";

pub fn load(path: Option<&Path>, command: &str) -> Result<toml::Table, CliError> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, command).map_err(|msg| CliError::config(format!("{}: {msg}", path.display())))
}

fn parse(text: &str, command: &str) -> Result<toml::Table, String> {
    if text.trim_start().starts_with('{') {
        let mut doc: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        expect_command(doc.get("command").and_then(|c| c.as_str()), command)?;
        let config = doc
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or("JSON input has no \"config\" object")?;
        return serde_json::from_value(config).map_err(|e| e.to_string());
    }

    let mut lines = text.lines();
    if let Some(first) = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix(MARKER_PREFIX))
    {
        expect_command(Some(first.trim()), command)?;
        lines.next();
        let embedded: Vec<&str> = lines
            .map_while(|l| l.strip_prefix("# ").or_else(|| (l == "#").then_some("")))
            .collect();
        return embedded
            .join("\n")
            .parse()
            .map_err(|e: toml::de::Error| e.to_string());
    }
    text.parse().map_err(|e: toml::de::Error| e.to_string())
}

fn expect_command(found: Option<&str>, command: &str) -> Result<(), String> {
    match found {
        Some(c) if c == command => Ok(()),
        Some(c) => Err(format!("file was produced by `{c}`, not `{command}`")),
        None => Err("missing command name".into()),
    }
}

/// Overlays the flags that were given on the file table and deserializes
/// the result; absent keys take the config type's defaults.
pub fn resolve<C: DeserializeOwned, A: Serialize>(
    mut table: toml::Table,
    overrides: &A,
) -> Result<C, CliError> {
    let flags = toml::Table::try_from(overrides).map_err(|e| CliError::config(e.to_string()))?;
    table.extend(flags);
    table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(e.message().to_string()))
}

/// Resolved config as TOML text, one key per line.
pub fn to_toml<C: Serialize>(config: &C) -> String {
    toml::to_string(config).expect("flat config serializes")
}
