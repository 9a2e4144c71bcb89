use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use biased_walk::{Error, ModelParams, ReflectedState};
use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory};

use crate::Cli;

const GLOBAL_KEYS: [&str; 6] = ["dim", "lambda", "seed", "out", "format", "config"];

/// Keys that are resolved but not echoed into artifacts.
const UNECHOED: [&str; 2] = ["out", "config"];

fn defaults(command: &str) -> &'static [(&'static str, &'static str)] {
    match command {
        "simulate" => &[("steps", "1000"), ("paths", "100")],
        "speed" | "clt" | "martingale" | "boundary" => &[("steps", "10000"), ("paths", "1000")],
        "mgf" => &[("n-list", "100,200,500")],
        "return-prob" => &[("n-max", "100")],
        "ballot" => &[("alpha", "0"), ("beta", "0")],
        "dominate" => &[("mode", "upper"), ("n-max", "12")],
        "ldp-consistency" => &[("a", "0.9"), ("n-list", "100,200,300,400")],
        "propagate" => &[("steps", "10")],
        _ => &[],
    }
}

const GLOBAL_DEFAULTS: [(&str, &str); 4] =
    [("dim", "2"), ("lambda", "0.5"), ("seed", "0"), ("format", "json")];

#[derive(Debug)]
pub enum CliError {
    /// A flag is missing, malformed or inconsistent.
    Usage { flag: String, message: String },
    Library(Error),
    Io(String),
}

impl CliError {
    pub(crate) fn usage(flag: &str, message: impl Into<String>) -> Self {
        CliError::Usage {
            flag: flag.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage { .. } => 1,
            CliError::Library(Error::InvalidParameter { .. } | Error::Domain(_)) => 1,
            CliError::Library(Error::Resource(_) | Error::Numerical(_)) => 2,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage { flag, message } => write!(f, "--{flag}: {message}"),
            CliError::Library(Error::InvalidParameter { name, reason }) => {
                write!(f, "--{name}: {reason}")
            }
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(format!("i/o failure: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(format!("csv failure: {e}"))
    }
}

/// The resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub command: String,
    values: BTreeMap<String, String>,
}

fn arg_keys(cmd: &clap::Command) -> BTreeSet<String> {
    cmd.get_arguments()
        .map(|a| a.get_id().as_str().replace('_', "-"))
        .filter(|k| k != "help" && k != "version")
        .collect()
}

impl Settings {
    pub fn from_matches(matches: &ArgMatches) -> Result<Self, CliError> {
        let (name, sub) = matches
            .subcommand()
            .ok_or_else(|| CliError::usage("help", "a subcommand is required"))?;
        let root = Cli::command();
        let mut allowed: BTreeSet<String> = GLOBAL_KEYS.iter().map(|k| k.to_string()).collect();
        let mut known = allowed.clone();
        for cmd in root.get_subcommands() {
            let keys = arg_keys(cmd);
            if cmd.get_name() == name {
                allowed.extend(keys.iter().cloned());
            }
            known.extend(keys);
        }

        let mut values: BTreeMap<String, String> = GLOBAL_DEFAULTS
            .iter()
            .chain(defaults(name))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();

        if let Some(path) = sub.get_one::<String>("config") {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage("config", format!("cannot read {path}: {e}")))?;
            for (number, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::usage("config", format!("line {}: expected key=value", number + 1))
                })?;
                let key = key.trim().replace('_', "-");
                if key == "config" || !known.contains(&key) {
                    return Err(CliError::usage(
                        "config",
                        format!("line {}: unknown key '{key}'", number + 1),
                    ));
                }
                if allowed.contains(&key) {
                    values.insert(key, value.trim().to_string());
                }
            }
        }

        for id in sub.ids() {
            let id = id.as_str();
            if sub.value_source(id) != Some(ValueSource::CommandLine) {
                continue;
            }
            if let Ok(Some(v)) = sub.try_get_one::<String>(id) {
                values.insert(id.replace('_', "-"), v.clone());
            }
        }
        Ok(Settings {
            command: name.to_string(),
            values,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self
            .get(key)
            .ok_or_else(|| CliError::usage(key, "is required"))?;
        raw.trim()
            .parse()
            .map_err(|_| CliError::usage(key, format!("cannot parse '{raw}'")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        let raw = self
            .get(key)
            .ok_or_else(|| CliError::usage(key, "is required"))?;
        let items: Result<Vec<T>, _> = raw.split(',').map(|v| v.trim().parse()).collect();
        match items {
            Ok(v) if !v.is_empty() => Ok(v),
            _ => Err(CliError::usage(
                key,
                format!("expected a comma-separated list, got '{raw}'"),
            )),
        }
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let dim: usize = self.require("dim")?;
        let lambda: f64 = self.require("lambda")?;
        Ok(ModelParams::new(dim, lambda)?)
    }

    /// `--start`, defaulting to `fill` in every coordinate.
    pub fn start(&self, p: &ModelParams, fill: u64) -> Result<ReflectedState, CliError> {
        if self.get("start").is_none() {
            return Ok(ReflectedState(vec![fill; p.dim()]));
        }
        let coords: Vec<u64> = self.list("start")?;
        if coords.len() != p.dim() {
            return Err(CliError::usage(
                "start",
                format!("has {} coordinates but the dimension is {}", coords.len(), p.dim()),
            ));
        }
        Ok(ReflectedState(coords))
    }

    /// Resolved settings in key order, without `out` and `config`.
    pub fn echo(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values
            .iter()
            .filter(|(k, _)| !UNECHOED.contains(&k.as_str()))
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
