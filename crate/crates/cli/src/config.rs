//! Config files: a TOML table whose keys are long flag names.
//!
//! Top-level keys apply to whichever subcommand accepts them; a table named
//! after a subcommand (`[evaluate]`) applies to that subcommand only and wins
//! over the top level. Values are turned back into flags and appended to the
//! command line, skipping any flag the user already typed, then the whole
//! command line is parsed again so the config goes through the same
//! validation as typed flags.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};
use toml::{Table, Value};

use crate::fail::Failure;

const SUBCOMMANDS: [&str; 6] = ["kernel", "encode", "fuse", "loss", "evaluate", "phantom"];

/// Loads `path` and returns the extra arguments it contributes.
pub fn config_args(path: &Path, cmd: &Command, matches: &ArgMatches) -> Result<Vec<OsString>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    let table: Table = text
        .parse()
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    flags_from_table(&table, cmd, matches)
}

pub fn flags_from_table(table: &Table, cmd: &Command, matches: &ArgMatches) -> Result<Vec<OsString>, Failure> {
    let (name, sub_matches) = matches
        .subcommand()
        .ok_or_else(|| Failure::validation("no subcommand given"))?;
    let sub = cmd
        .find_subcommand(name)
        .ok_or_else(|| Failure::validation(format!("unknown subcommand `{name}`")))?;

    let mut merged: Vec<(String, &Value)> = Vec::new();
    for (key, value) in table {
        if let Value::Table(section) = value {
            if !SUBCOMMANDS.contains(&key.as_str()) {
                return Err(Failure::validation(format!("config: unknown section [{key}]")));
            }
            if key != name {
                continue;
            }
            for (k, v) in section {
                let k = normalize(k);
                if lookup(sub, cmd, &k).is_none() {
                    return Err(Failure::validation(format!("config: `{name}` has no flag --{k}")));
                }
                merged.retain(|(old, _)| *old != k);
                merged.push((k, v));
            }
            continue;
        }
        let k = normalize(key);
        if lookup(sub, cmd, &k).is_some() {
            if !merged.iter().any(|(old, _)| *old == k) {
                merged.push((k, value));
            }
        } else if !SUBCOMMANDS
            .iter()
            .filter_map(|s| cmd.find_subcommand(s))
            .any(|s| lookup(s, cmd, &k).is_some())
        {
            return Err(Failure::validation(format!("config: unknown key `{key}`")));
        }
    }

    let mut out = Vec::new();
    for (flag, value) in merged {
        let arg = lookup(sub, cmd, &flag).expect("checked above");
        let id = arg.get_id().as_str();
        if flag == "config" {
            return Err(Failure::validation("config: `config` cannot be set from a config file"));
        }
        // global flags are propagated into the subcommand's matches
        if sub_matches.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let is_switch = matches!(arg.get_action(), ArgAction::SetTrue);
        let multi = arg.get_num_args().is_some_and(|r| r.max_values() > 1);
        push_flag(&mut out, &flag, value, is_switch, multi)?;
    }
    Ok(out)
}

fn normalize(key: &str) -> String {
    key.replace('_', "-")
}

fn lookup<'a>(sub: &'a Command, root: &'a Command, long: &str) -> Option<&'a clap::Arg> {
    sub.get_arguments()
        .chain(root.get_arguments())
        .find(|a| a.get_long() == Some(long))
}

fn scalar(flag: &str, value: &Value) -> Result<String, Failure> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        Value::Boolean(b) => Ok(b.to_string()),
        other => Err(Failure::validation(format!(
            "config: --{flag} expects a scalar, got {}",
            other.type_str()
        ))),
    }
}

fn push_flag(out: &mut Vec<OsString>, flag: &str, value: &Value, is_switch: bool, multi: bool) -> Result<(), Failure> {
    if is_switch {
        return match value {
            Value::Boolean(true) => {
                out.push(format!("--{flag}").into());
                Ok(())
            }
            Value::Boolean(false) => Ok(()),
            _ => Err(Failure::validation(format!("config: --{flag} expects true or false"))),
        };
    }
    match value {
        Value::Array(items) if multi => {
            for item in items {
                out.push(format!("--{flag}={}", scalar(flag, item)?).into());
            }
        }
        // a list for a single-valued flag is written the way it is typed, e.g. dims
        Value::Array(items) => {
            let parts = items.iter().map(|i| scalar(flag, i)).collect::<Result<Vec<_>, _>>()?;
            out.push(format!("--{flag}={}", parts.join(",")).into());
        }
        v => out.push(format!("--{flag}={}", scalar(flag, v)?).into()),
    }
    Ok(())
}
