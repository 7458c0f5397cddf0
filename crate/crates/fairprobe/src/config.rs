//! Effective configuration: defaults, then a config file, then
//! `FAIRPROBE_*` environment variables, then command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use fairprobe_core::assessor::GeoPolicy;
use fairprobe_core::oaipmh::HarvestPolicy;
use fairprobe_core::probe::ProbePolicy;

pub const DEFAULT_REGISTRY: &str = "https://www.re3data.org/api/v1";
pub const DEFAULT_RESOLVER: &str = "https://doi.org/";
pub const ENV_PREFIX: &str = "FAIRPROBE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub out: PathBuf,
    /// `None` when explicitly set empty: the registry is not queried.
    pub registry_url: Option<String>,
    pub seed_file: Option<PathBuf>,
    pub allow_seed_fallback: bool,
    pub workers_registry: usize,
    pub workers_harvest: usize,
    pub workers_select: usize,
    pub workers_probe: usize,
    /// Per-request timeout in seconds.
    pub timeout: f64,
    pub retries: u32,
    pub max_pages: Option<u32>,
    pub politeness_delay_ms: u64,
    pub per_host_delay_ms: u64,
    pub max_redirects: u32,
    pub max_body_bytes: u64,
    pub doi_resolver: String,
    pub geo_require_coordinates: bool,
    /// Lets `step N` run after a partial predecessor.
    pub allow_partial: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            out: PathBuf::from("fairprobe-out"),
            registry_url: Some(DEFAULT_REGISTRY.to_string()),
            seed_file: None,
            allow_seed_fallback: false,
            workers_registry: 4,
            workers_harvest: 4,
            workers_select: 12,
            workers_probe: 34,
            timeout: 20.0,
            retries: 1,
            max_pages: None,
            politeness_delay_ms: 1000,
            per_host_delay_ms: 1000,
            max_redirects: 10,
            max_body_bytes: 0,
            doi_resolver: DEFAULT_RESOLVER.to_string(),
            geo_require_coordinates: false,
            allow_partial: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("{path}:{line}: expected key=value")]
    Syntax { path: String, line: usize },
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

impl Config {
    /// Sets one option by name. Dashes and underscores are interchangeable
    /// and case is ignored.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = key.trim().to_ascii_lowercase().replace('-', "_");
        let v = value.trim();
        let bad = |reason: &str| ConfigError::BadValue { key: k.clone(), value: v.to_string(), reason: reason.into() };
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad("expected a non-negative integer"));
        let flag = || parse_bool(v).ok_or_else(|| bad("expected true or false"));
        match k.as_str() {
            "out" => self.out = PathBuf::from(v),
            "registry_url" => self.registry_url = (!v.is_empty()).then(|| v.to_string()),
            "seed_file" => self.seed_file = (!v.is_empty()).then(|| PathBuf::from(v)),
            "allow_seed_fallback" => self.allow_seed_fallback = flag()?,
            "workers_registry" => self.workers_registry = num(v)? as usize,
            "workers_harvest" => self.workers_harvest = num(v)? as usize,
            "workers_select" => self.workers_select = num(v)? as usize,
            "workers_probe" => self.workers_probe = num(v)? as usize,
            "timeout" => {
                self.timeout = v.parse::<f64>().ok().filter(|t| t.is_finite() && *t > 0.0).ok_or_else(|| bad("expected positive seconds"))?
            }
            "retries" => self.retries = num(v)? as u32,
            "max_pages" => self.max_pages = if v.is_empty() { None } else { Some(num(v)? as u32) },
            "politeness_delay_ms" | "politeness_delay" => self.politeness_delay_ms = num(v)?,
            "per_host_delay_ms" | "per_host_delay" => self.per_host_delay_ms = num(v)?,
            "max_redirects" => self.max_redirects = num(v)? as u32,
            "max_body_bytes" => self.max_body_bytes = num(v)?,
            "doi_resolver" => self.doi_resolver = v.to_string(),
            "geo_require_coordinates" => self.geo_require_coordinates = flag()?,
            "allow_partial" => self.allow_partial = flag()?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a `key=value` file (blank lines and `#` comments ignored) or
    /// a JSON object with the same keys.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        if text.trim_start().starts_with('{') {
            let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text).map_err(|e| {
                ConfigError::BadValue { key: "<file>".into(), value: path.display().to_string(), reason: e.to_string() }
            })?;
            for (k, v) in map {
                let s = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Null => String::new(),
                    other => other.to_string(),
                };
                self.set(&k, &s)?;
            }
            return Ok(());
        }
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { path: path.display().to_string(), line: i + 1 })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Applies `FAIRPROBE_<KEY>` variables from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), ConfigError> {
        let mut pairs: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_string(), v)))
            .filter(|(k, _)| k != "LOG")
            .collect();
        pairs.sort();
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: &str| ConfigError::BadValue { key: key.into(), value: String::new(), reason: reason.into() };
        for (k, v) in [
            ("workers_registry", self.workers_registry),
            ("workers_harvest", self.workers_harvest),
            ("workers_select", self.workers_select),
            ("workers_probe", self.workers_probe),
        ] {
            if v == 0 {
                return Err(bad(k, "must be at least 1"));
            }
        }
        self.harvest_policy().validate().map_err(|r| bad("harvest", r))?;
        self.probe_policy().validate().map_err(|r| bad("probe", r))?;
        if url::Url::parse(&self.doi_resolver).is_err() {
            return Err(bad("doi_resolver", "not a URL"));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }

    pub fn harvest_policy(&self) -> HarvestPolicy {
        HarvestPolicy {
            request_timeout: self.timeout(),
            retries_after_timeout: self.retries,
            politeness_delay: Duration::from_millis(self.politeness_delay_ms),
            max_pages: self.max_pages,
            ..HarvestPolicy::default()
        }
    }

    pub fn probe_policy(&self) -> ProbePolicy {
        ProbePolicy {
            max_redirects: self.max_redirects,
            request_timeout: self.timeout(),
            max_body_bytes: self.max_body_bytes,
            per_host_delay: Duration::from_millis(self.per_host_delay_ms),
        }
    }

    pub fn geo_policy(&self) -> GeoPolicy {
        GeoPolicy { require_coordinates: self.geo_require_coordinates }
    }
}
