//! `--config` files: `key=value` lines whose keys are long flag names.
//! Flags given on the command line win over the file.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::Path;

use crate::commands::CliError;

const BOOL_FLAGS: &[&str] = &["screening", "record-time"];
const LIST_FLAGS: &[&str] = &["data"];

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(n, _)| n))
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Splices the config file's entries into `argv` right after the
/// subcommand, skipping any flag already present on the command line.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    if argv.len() < 3 {
        return Ok(argv);
    }
    let rest = &argv[2..];
    let Some(path) = config_path(rest) else {
        return Ok(argv);
    };
    let entries = ksglasso::io::read_key_values(Path::new(&path))?;
    let given: BTreeSet<String> = rest
        .iter()
        .filter_map(|a| flag_name(&a.to_string_lossy()).map(str::to_owned))
        .collect();

    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in &entries {
        let key = key.replace('_', "-");
        if key == "config" || given.contains(&key) {
            continue;
        }
        if BOOL_FLAGS.contains(&key.as_str()) {
            let on: bool = value
                .parse()
                .map_err(|_| CliError::Usage(format!("config key {key}: expected true or false, got {value:?}")))?;
            if on {
                injected.push(format!("--{key}").into());
            }
        } else if LIST_FLAGS.contains(&key.as_str()) {
            for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                injected.push(format!("--{key}").into());
                injected.push(item.into());
            }
        } else {
            injected.push(format!("--{key}").into());
            injected.push(value.into());
        }
    }

    let mut merged = argv[..2].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(rest);
    Ok(merged)
}
