//! Flat `key = value` config files.
//!
//! Each key names a long flag of the chosen subcommand (underscores may stand
//! in for hyphens). The entries are spliced into the argument list ahead of
//! the flags given on the command line, and every flag overrides earlier
//! occurrences of itself, so command-line flags win. `true` turns a switch
//! on; `false` leaves it off.

use std::fs;

use crate::args::{GLOBAL_FLAGS, SUBCOMMANDS};
use crate::Failure;

#[derive(Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", i + 1));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.starts_with('-') {
            return Err(format!("line {}: bad key `{}`", i + 1, key));
        }
        out.push(Entry {
            key,
            value: value.trim().trim_matches('"').to_string(),
        });
    }
    Ok(out)
}

fn to_tokens(entries: &[Entry]) -> Vec<String> {
    entries
        .iter()
        .filter(|e| e.value != "false")
        .map(|e| {
            if e.value == "true" {
                format!("--{}", e.key)
            } else {
                format!("--{}={}", e.key, e.value)
            }
        })
        .collect()
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter().skip(1);
    let mut found = None;
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            found = it.next().cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            found = Some(v.to_string());
        }
    }
    found
}

/// Splices the entries of the `--config` file into `argv`: global options
/// right after the program name, the rest right after the subcommand.
pub fn merge(mut argv: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{path}: {e}")))?;
    let entries = parse(&text).map_err(|e| Failure::Usage(format!("{path}: {e}")))?;
    if let Some(e) = entries.iter().find(|e| e.key == "config") {
        return Err(Failure::Usage(format!(
            "{path}: `{}` cannot be set from a config file",
            e.key
        )));
    }
    let (global, local): (Vec<Entry>, Vec<Entry>) = entries
        .into_iter()
        .partition(|e| GLOBAL_FLAGS.contains(&e.key.as_str()));
    let at = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .ok_or_else(|| Failure::Usage("a subcommand is required".into()))?;
    let local = to_tokens(&local);
    argv.splice(at + 1..at + 1, local);
    argv.splice(1..1, to_tokens(&global));
    Ok(argv)
}
