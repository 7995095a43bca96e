//! Layered key-value configuration: built-in defaults, then a TOML file of
//! `key = value` lines, then `--set key=value` and the dedicated flags.

use std::collections::BTreeMap;
use std::path::Path;
use toml::Value;

/// One accepted key. `default: None` marks the key as required.
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
    }
}

const COMMON: &[Key] = &[
    key("seed", Some("0"), "base seed of every random stream"),
    key("threads", Some("0"), "worker threads, 0 for one per core"),
];

pub fn schema(command: &str) -> &'static [Key] {
    match command {
        "stationary" => {
            const {
                &[
                    key("coupling", None, "coupling strength K"),
                    key("points", Some("512"), "grid points of the emitted profile"),
                ]
            }
        }
        "simulate" => {
            const {
                &[
                    key("coupling", None, "coupling strength K"),
                    key("n", Some("1000"), "number of particles"),
                    key("dt", Some("0.001"), "time step"),
                    key("t_end", Some("10.0"), "final particle time"),
                    key("record_stride", Some("100"), "steps between recorded rows"),
                    key("init", Some("\"quantiles\""), "equal, quantiles or iid"),
                ]
            }
        }
        "pde" => {
            const {
                &[
                    key("coupling", None, "coupling strength K"),
                    key("modes", Some("64"), "Fourier modes"),
                    key("dt", Some("0.001"), "time step"),
                    key("t_end", Some("20.0"), "final time"),
                    key("record_every", Some("100"), "steps between recorded rows"),
                    key(
                        "init",
                        Some("\"generic\""),
                        "generic, uniform or stationary",
                    ),
                ]
            }
        }
        "spectrum" => {
            const {
                &[
                    key("coupling", None, "coupling strength K"),
                    key("modes", Some("64"), "Fourier modes per parity"),
                    key("psi", Some("0.0"), "center of the stationary profile"),
                    key(
                        "eigenfunctions",
                        Some("4"),
                        "number of eigenfunctions written to CSV",
                    ),
                ]
            }
        }
        "diffusion" => {
            const {
                &[
                    key("coupling", None, "coupling strength K"),
                    key("n", Some("1000"), "number of particles"),
                    key("tau_f", Some("1.0"), "final rescaled time"),
                    key("dt", Some("0.001"), "time step"),
                    key("n_paths", Some("100"), "independent paths"),
                    key(
                        "record_dtau",
                        Some("0.01"),
                        "spacing of recorded rescaled times",
                    ),
                    key(
                        "burn_in",
                        Some("0.1"),
                        "rescaled time discarded before fitting",
                    ),
                    key(
                        "window_dtau",
                        Some("0.05"),
                        "increment window of the autocorrelation check",
                    ),
                    key("bootstrap", Some("1000"), "bootstrap resamples"),
                    key("offset", Some("0.0"), "rotation of the initial ensemble"),
                ]
            }
        }
        "scaling" => {
            const {
                &[
                    key("coupling", None, "coupling strength K"),
                    key(
                        "n_list",
                        Some("[250, 500, 1000, 2000, 4000]"),
                        "particle numbers",
                    ),
                    key("t_fixed", Some("5.0"), "time of the distance measurement"),
                    key(
                        "pde_time",
                        Some("1.0"),
                        "time of the comparison with the flow",
                    ),
                    key("dt", Some("0.001"), "time step"),
                    key("n_paths", Some("20"), "paths per particle number"),
                ]
            }
        }
        "emergence" => {
            const {
                &[
                    key("coupling", None, "coupling strength K"),
                    key("n", Some("500"), "number of particles"),
                    key("n_paths", Some("200"), "independent paths"),
                    key("dt", Some("0.01"), "time step"),
                    key("bins", Some("36"), "histogram bins"),
                    key("offset", Some("0.0"), "rotation of the initial ensemble"),
                ]
            }
        }
        _ => &[],
    }
}

fn all_keys(command: &str) -> impl Iterator<Item = &'static Key> {
    schema(command).iter().chain(COMMON.iter())
}

/// Parses one value written in TOML syntax; bare words become strings.
pub fn parse_value(text: &str) -> Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| Value::String(text.to_string())),
        Err(_) => Value::String(text.trim().to_string()),
    }
}

/// Fully resolved configuration of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub values: BTreeMap<String, Value>,
}

impl Config {
    /// Merges defaults, the file at `path` and `overrides` (in increasing priority).
    pub fn resolve(
        command: &str,
        path: Option<&Path>,
        overrides: &[(String, Value)],
    ) -> Result<Self, String> {
        let known: Vec<&str> = all_keys(command).map(|k| k.name).collect();
        let mut values = BTreeMap::new();
        for k in all_keys(command) {
            if let Some(d) = k.default {
                values.insert(k.name.to_string(), parse_value(d));
            }
        }
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
                format!("malformed config {}: {}", p.display(), e.message())
            })?;
            for (k, v) in table {
                if !known.contains(&k.as_str()) {
                    return Err(format!("unknown config key '{k}' for {command}"));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in overrides {
            if !known.contains(&k.as_str()) {
                return Err(format!("unknown config key '{k}' for {command}"));
            }
            values.insert(k.clone(), v.clone());
        }
        for k in all_keys(command) {
            if !values.contains_key(k.name) {
                return Err(format!("missing required config key '{}'", k.name));
            }
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Result<&Value, String> {
        self.values
            .get(key)
            .ok_or_else(|| format!("missing required config key '{key}'"))
    }

    pub fn f64(&self, key: &str) -> Result<f64, String> {
        match self.get(key)? {
            Value::Float(v) => Ok(*v),
            Value::Integer(v) => Ok(*v as f64),
            other => Err(format!("config key '{key}' must be a number, got {other}")),
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64, String> {
        match self.get(key)? {
            Value::Integer(v) if *v >= 0 => Ok(*v as u64),
            other => Err(format!(
                "config key '{key}' must be a non-negative integer, got {other}"
            )),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, String> {
        self.u64(key).map(|v| v as usize)
    }

    pub fn string(&self, key: &str) -> Result<String, String> {
        match self.get(key)? {
            Value::String(s) => Ok(s.clone()),
            other => Err(format!("config key '{key}' must be a string, got {other}")),
        }
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, String> {
        match self.get(key)? {
            Value::Array(a) => a
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i > 0 => Ok(*i as usize),
                    other => Err(format!(
                        "config key '{key}' must list positive integers, got {other}"
                    )),
                })
                .collect(),
            other => Err(format!("config key '{key}' must be a list, got {other}")),
        }
    }

    /// The configuration as JSON with keys in sorted order.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.values).unwrap_or(serde_json::Value::Null)
    }
}

/// Renders the accepted keys of `command` for `--help` style listings.
pub fn describe(command: &str) -> String {
    all_keys(command)
        .map(|k| match k.default {
            Some(d) => format!("  {} = {}  ({})", k.name, d, k.help),
            None => format!("  {} (required)  ({})", k.name, k.help),
        })
        .collect::<Vec<_>>()
        .join("\n")
}
