//! Command-line surface, config-file merging and per-command parameter
//! resolution.
//!
//! Flags and config entries are first collected as raw strings keyed by flag
//! name, so both sources share a single parser. Flags win over the config
//! file; `HAARBLOCKS_SEED` only fills a seed that neither provides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::error::CliError;

pub const SEED_ENV: &str = "HAARBLOCKS_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "haarblocks",
    version,
    about = "Densities, asymptotic audits, rate functions and deviation experiments for Haar matrix blocks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Draw scaled upper-left blocks of Haar frames.
    Sample,
    /// Evaluate the block density at a point, or a single-entry tail.
    Density,
    /// Break the log-determinant into its expansion terms.
    Expand,
    /// Audit the uniform local-limit bound over a probe set.
    #[command(name = "audit-lll")]
    AuditLll,
    /// Evaluate a rate function on a JSON-described input.
    Rate,
    /// Run a scheduled experiment.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Logmgf,
    LdpDecay,
    AsTrace,
    MdpEntry,
    MdpBlock,
    Concentration,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Logmgf => "logmgf",
            ExperimentKind::LdpDecay => "ldp-decay",
            ExperimentKind::AsTrace => "as-trace",
            ExperimentKind::MdpEntry => "mdp-entry",
            ExperimentKind::MdpBlock => "mdp-block",
            ExperimentKind::Concentration => "concentration",
        }
    }
}

impl Command {
    pub fn label(self) -> String {
        match self {
            Command::Sample => "sample".into(),
            Command::Density => "density".into(),
            Command::Expand => "expand".into(),
            Command::AuditLll => "audit-lll".into(),
            Command::Rate => "rate".into(),
            Command::Experiment { kind } => format!("experiment {}", kind.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Every flag, accepted before or after the subcommand.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Ambient dimension; experiments and audits take a comma-separated list (`1e6,1e7`).
    #[arg(long = "N", global = true, value_name = "N")]
    pub n: Option<String>,
    /// Block rows.
    #[arg(long, global = true)]
    pub m: Option<String>,
    /// Block columns.
    #[arg(long, global = true)]
    pub k: Option<String>,
    /// Radius: a number, or `N^e` for `N` to the power `e`.
    #[arg(long = "R", global = true, value_name = "R")]
    pub r: Option<String>,
    /// Threshold.
    #[arg(long, global = true)]
    pub t: Option<String>,
    /// Exponent b of beta_N = N^b.
    #[arg(long, global = true)]
    pub b: Option<String>,
    /// Exponent of p_N = round(N^alpha).
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// Lévy-distance threshold.
    #[arg(long, global = true)]
    pub epsilon: Option<String>,
    /// Monte Carlo replicas.
    #[arg(long, global = true)]
    pub replicas: Option<String>,
    /// Random probes per audit radius.
    #[arg(long, global = true)]
    pub probes: Option<String>,
    /// Matrix as JSON rows, e.g. `[[0.1,0.2]]`.
    #[arg(long, global = true)]
    pub point: Option<String>,
    /// Treat `--point` as a scaled block (density).
    #[arg(long, global = true)]
    pub scaled: bool,
    /// Tail scaling for `density --t`: unscaled, sqrtn or betan.
    #[arg(long, global = true)]
    pub scaling: Option<String>,
    /// Test function: `tanh:A`, `sin:A`, `quad:A,C` or a JSON object.
    #[arg(long, global = true)]
    pub function: Option<String>,
    /// Rate input as inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    pub input: Option<String>,
    /// Root seed (default: $HAARBLOCKS_SEED, else 1).
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON config file; flags take precedence over its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store the wall time in experiment reports (makes them non-reproducible).
    #[arg(long, global = true)]
    pub record_time: bool,
}

/// Keys a config file may set, i.e. every flag that carries a parameter.
pub const PARAMETER_KEYS: [&str; 16] = [
    "N", "m", "k", "R", "t", "b", "alpha", "epsilon", "replicas", "probes", "point", "scaled",
    "scaling", "function", "input", "seed",
];

impl Flags {
    fn raw(&self) -> BTreeMap<String, String> {
        let mut raw = BTreeMap::new();
        let mut put = |key: &str, v: &Option<String>| {
            if let Some(v) = v {
                raw.insert(key.to_string(), v.clone());
            }
        };
        put("N", &self.n);
        put("m", &self.m);
        put("k", &self.k);
        put("R", &self.r);
        put("t", &self.t);
        put("b", &self.b);
        put("alpha", &self.alpha);
        put("epsilon", &self.epsilon);
        put("replicas", &self.replicas);
        put("probes", &self.probes);
        put("point", &self.point);
        put("scaling", &self.scaling);
        put("function", &self.function);
        put("input", &self.input);
        put("seed", &self.seed);
        if self.scaled {
            raw.insert("scaled".into(), "true".into());
        }
        raw
    }
}

fn value_to_raw(key: &str, v: &Value) -> Result<String, CliError> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) if key == "N" => items
            .iter()
            .map(|x| value_to_raw(key, x))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        Value::Array(_) | Value::Object(_) => v.to_string(),
        Value::Null => {
            return Err(CliError::Usage(format!("config entry `{key}` is null")));
        }
    })
}

/// Reads a config file: either a flat object of parameters, an object with a
/// `parameters` member, or a previous output artifact (its `config`).
pub fn load_config(
    path: &std::path::Path,
    command: Command,
) -> Result<(BTreeMap<String, String>, Option<Format>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    let mut root: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("--config {}: invalid JSON: {e}", path.display())))?;
    if let Some(inner) = root.get("config").cloned() {
        root = inner;
    }
    let Value::Object(mut obj) = root else {
        return Err(CliError::Usage(format!(
            "--config {}: expected a JSON object",
            path.display()
        )));
    };
    if let Some(cmd) = obj.remove("command") {
        if cmd.as_str() != Some(command.label().as_str()) {
            return Err(CliError::Usage(format!(
                "--config {} is for command {cmd}, not `{}`",
                path.display(),
                command.label()
            )));
        }
    }
    let format = match obj.remove("format") {
        None => None,
        Some(Value::String(s)) => Some(
            Format::from_str(&s, true)
                .map_err(|_| CliError::Usage(format!("config entry `format`: unknown format {s}")))?,
        ),
        Some(other) => {
            return Err(CliError::Usage(format!("config entry `format`: expected a string, got {other}")))
        }
    };
    let params = match obj.remove("parameters") {
        Some(Value::Object(p)) => {
            if let Some(extra) = obj.keys().next() {
                return Err(CliError::Usage(format!("unknown config entry `{extra}`")));
            }
            p
        }
        Some(_) => return Err(CliError::Usage("config entry `parameters` must be an object".into())),
        None => obj,
    };
    let mut raw = BTreeMap::new();
    for (key, v) in &params {
        if !PARAMETER_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("unknown config entry `{key}`")));
        }
        raw.insert(key.clone(), value_to_raw(key, v)?);
    }
    Ok((raw, format))
}

/// Merged raw parameters with their origin already resolved.
#[derive(Debug)]
pub struct RawConfig {
    pub command: Command,
    pub params: BTreeMap<String, String>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub record_time: bool,
}

pub fn merge(cli: &Cli) -> Result<RawConfig, CliError> {
    let (mut params, config_format) = match &cli.flags.config {
        Some(path) => load_config(path, cli.command)?,
        None => (BTreeMap::new(), None),
    };
    params.extend(cli.flags.raw());
    if !params.contains_key("seed") {
        if let Ok(env) = std::env::var(SEED_ENV) {
            params.insert("seed".into(), env);
        }
    }
    if let Some(0) = cli.flags.threads {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    Ok(RawConfig {
        command: cli.command,
        params,
        format: cli.flags.format.or(config_format).unwrap_or_default(),
        out: cli.flags.out.clone(),
        threads: cli.flags.threads,
        record_time: cli.flags.record_time,
    })
}

/// Typed access to raw parameters that records every resolved value,
/// defaults included, and rejects parameters the command does not use.
pub struct Resolver {
    label: String,
    raw: BTreeMap<String, String>,
    used: BTreeSet<String>,
    pub resolved: BTreeMap<String, Value>,
}

fn parse_count(key: &str, s: &str) -> Result<u64, CliError> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| CliError::Usage(format!("--{key}: `{s}` is not a number")))?;
    if !(v >= 0.0 && v.fract() == 0.0 && v <= 9.007_199_254_740_992e15) {
        return Err(CliError::Usage(format!(
            "--{key}: `{s}` is not a non-negative integer"
        )));
    }
    Ok(v as u64)
}

/// Radius given either directly or as a power of `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Absolute(f64),
    Power(f64),
}

impl Radius {
    pub fn at(self, n: u64) -> f64 {
        match self {
            Radius::Absolute(r) => r,
            Radius::Power(e) => (n as f64).powf(e),
        }
    }

    fn canonical(self) -> String {
        match self {
            Radius::Absolute(r) => r.to_string(),
            Radius::Power(e) => format!("N^{e}"),
        }
    }
}

impl Resolver {
    pub fn new(raw: &RawConfig) -> Self {
        Self {
            label: raw.command.label(),
            raw: raw.params.clone(),
            used: BTreeSet::new(),
            resolved: BTreeMap::new(),
        }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.raw.get(key).cloned()
    }

    fn missing(&self, key: &str) -> CliError {
        CliError::Usage(format!("`{}` requires --{key}", self.label))
    }

    pub fn seed(&mut self) -> Result<u64, CliError> {
        let seed = match self.take("seed") {
            Some(s) => parse_count("seed", &s)?,
            None => DEFAULT_SEED,
        };
        self.resolved.insert("seed".into(), seed.into());
        Ok(seed)
    }

    pub fn n(&mut self, default: Option<u64>) -> Result<u64, CliError> {
        let v = match (self.take("N"), default) {
            (Some(s), _) => {
                if s.contains(',') {
                    return Err(CliError::Usage(format!(
                        "--N: `{}` takes a single dimension",
                        self.label
                    )));
                }
                parse_count("N", &s)?
            }
            (None, Some(d)) => d,
            (None, None) => return Err(self.missing("N")),
        };
        self.resolved.insert("N".into(), v.into());
        Ok(v)
    }

    pub fn n_list(&mut self, default: Option<&[u64]>) -> Result<Vec<u64>, CliError> {
        let v = match (self.take("N"), default) {
            (Some(s), _) => s
                .split(',')
                .map(|p| parse_count("N", p))
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(d)) => d.to_vec(),
            (None, None) => return Err(self.missing("N")),
        };
        if v.is_empty() || v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage("--N: values must be strictly increasing".into()));
        }
        self.resolved.insert("N".into(), Value::from(v.clone()));
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, default: Option<usize>) -> Result<usize, CliError> {
        let v = match (self.take(key), default) {
            (Some(s), _) => parse_count(key, &s)? as usize,
            (None, Some(d)) => d,
            (None, None) => return Err(self.missing(key)),
        };
        self.resolved.insert(key.into(), v.into());
        Ok(v)
    }

    pub fn f64(&mut self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        let v = match (self.take(key), default) {
            (Some(s), _) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("--{key}: `{s}` is not a finite number")))?,
            (None, Some(d)) => d,
            (None, None) => return Err(self.missing(key)),
        };
        self.resolved.insert(key.into(), v.into());
        Ok(v)
    }

    pub fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        if self.raw.contains_key(key) {
            self.f64(key, None).map(Some)
        } else {
            self.used.insert(key.to_string());
            Ok(None)
        }
    }

    pub fn flag(&mut self, key: &str) -> Result<bool, CliError> {
        let v = match self.take(key).as_deref() {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => {
                return Err(CliError::Usage(format!("--{key}: expected true or false, got {other}")))
            }
        };
        if v {
            self.resolved.insert(key.into(), true.into());
        }
        Ok(v)
    }

    pub fn radius(&mut self, default: Option<Radius>) -> Result<Radius, CliError> {
        let v = match (self.take("R"), default) {
            (Some(s), _) => {
                let s = s.trim();
                if let Some(e) = s.strip_prefix("N^") {
                    Radius::Power(e.parse().map_err(|_| {
                        CliError::Usage(format!("--R: `{s}` is not of the form N^e"))
                    })?)
                } else {
                    Radius::Absolute(s.parse().map_err(|_| {
                        CliError::Usage(format!("--R: `{s}` is neither a number nor N^e"))
                    })?)
                }
            }
            (None, Some(d)) => d,
            (None, None) => return Err(self.missing("R")),
        };
        self.resolved.insert("R".into(), v.canonical().into());
        Ok(v)
    }

    /// A JSON-valued parameter; stored back as parsed JSON.
    pub fn json<T: serde::de::DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        let Some(s) = self.take(key) else {
            return Ok(None);
        };
        let value: Value = serde_json::from_str(&s)
            .map_err(|e| CliError::Usage(format!("--{key}: invalid JSON: {e}")))?;
        let typed = serde_json::from_value(value.clone())
            .map_err(|e| CliError::Usage(format!("--{key}: {e}")))?;
        self.resolved.insert(key.into(), value);
        Ok(Some(typed))
    }

    /// Raw string parameter, recorded as `record` when given.
    pub fn text(&mut self, key: &str) -> Option<String> {
        self.take(key)
    }

    pub fn record(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.into(), value);
    }

    /// Fails on any parameter that was supplied but never consulted.
    pub fn finish(self) -> Result<BTreeMap<String, Value>, CliError> {
        if let Some(extra) = self.raw.keys().find(|k| !self.used.contains(*k)) {
            return Err(CliError::Usage(format!(
                "--{extra} is not used by `{}`",
                self.label
            )));
        }
        Ok(self.resolved)
    }
}
