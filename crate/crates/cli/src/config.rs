//! `--config FILE`: `flag = value` lines merged into the argument list.
//!
//! Keys are long flag names without the dashes. A flag already present on
//! the command line keeps its command-line value. Boolean flags take `true`
//! or `false`.

use std::ffi::OsString;
use std::fs;

use clap::CommandFactory;
use lbf_core::workload::io::Manifest;
use lbf_core::{Error, Result};

use crate::Cli;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return iter.next().cloned();
        }
        if let Some(path) = s.strip_prefix("--config=") {
            return Some(path.into());
        }
    }
    None
}

fn present(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let with_value = format!("--{long}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    })
}

/// Appends the config file's settings to `args` (program name first).
/// Without `--config` the arguments are returned unchanged.
pub fn merge_config_file(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let manifest = Manifest::parse(&fs::read_to_string(&path)?)?;
    merge(args, &manifest)
}

pub fn merge(mut args: Vec<OsString>, manifest: &Manifest) -> Result<Vec<OsString>> {
    let root = Cli::command();
    let sub = args
        .iter()
        .skip(1)
        .find_map(|a| root.find_subcommand(a.to_string_lossy().as_ref()).cloned());
    let mut extra = Vec::new();
    for (key, value) in &manifest.entries {
        if key == "config" {
            return Err(Error::Parameter("config files cannot nest".into()));
        }
        let arg = sub
            .iter()
            .flat_map(|s| s.get_arguments())
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| Error::Parameter(format!("unknown config key {key:?}")))?;
        if present(&args, key) {
            continue;
        }
        if arg.get_action().takes_values() {
            extra.push(format!("--{key}").into());
            extra.push(value.into());
        } else {
            match value.as_str() {
                "true" => extra.push(format!("--{key}").into()),
                "false" => {}
                _ => return Err(Error::Parameter(format!("config key {key:?} expects true or false"))),
            }
        }
    }
    args.extend(extra);
    Ok(args)
}
