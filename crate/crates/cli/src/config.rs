//! Flat key=value run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use xxz_core::numerics::QuadOptions;
use xxz_core::{ModelParams, ParticleConfig};

pub const CACHE_ENV: &str = "XXZ_CACHE_DIR";

pub const KEYS: &[&str] = &[
    "delta",
    "t",
    "n_particles",
    "y",
    "x_min",
    "x_max",
    "method",
    "grid_m",
    "rtol",
    "workers",
    "cache_dir",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub delta: f64,
    pub t: f64,
    pub y: Vec<i64>,
    pub x_min: i64,
    pub x_max: i64,
    pub method: Option<String>,
    pub grid_m: usize,
    pub rtol: f64,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl Config {
    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let y = ParticleConfig::new(self.y.clone()).map_err(|e| ConfigError(e.to_string()))?;
        ModelParams::new(self.delta, self.t, y).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn quad(&self) -> QuadOptions {
        QuadOptions::default().with_rtol(self.rtol).with_max_nodes(self.grid_m).with_workers(Some(self.workers))
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key=value, got {line:?}", k + 1)))?;
        insert(&mut out, key.trim(), value.trim())?;
    }
    Ok(out)
}

pub fn insert(map: &mut BTreeMap<String, String>, key: &str, value: &str) -> Result<(), ConfigError> {
    if !KEYS.contains(&key) {
        return Err(ConfigError(format!("unknown config key {key:?}")));
    }
    map.insert(key.to_string(), value.to_string());
    Ok(())
}

pub fn read_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_file(&text)
}

fn number<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError> {
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}"))))
        .transpose()
}

/// Resolves the layered settings: file values, then the cache-directory
/// environment variable, then command-line overrides.
pub fn resolve(
    file: BTreeMap<String, String>,
    env_cache: Option<String>,
    overrides: BTreeMap<String, String>,
) -> Result<Config, ConfigError> {
    let mut map = file;
    if let Some(dir) = env_cache {
        map.insert("cache_dir".into(), dir);
    }
    map.extend(overrides);

    let delta = number(&map, "delta")?.unwrap_or(0.5);
    let t = number(&map, "t")?.unwrap_or(0.5);
    let n: Option<usize> = number(&map, "n_particles")?;
    let y = match map.get("y").map(String::as_str) {
        None | Some("step") => (1..=n.unwrap_or(2) as i64).collect(),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<i64>().map_err(|_| ConfigError(format!("y: cannot parse {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?,
    };
    if let Some(n) = n {
        if n != y.len() {
            return Err(ConfigError(format!("n_particles = {n} but y has {} sites", y.len())));
        }
    }
    if y.is_empty() {
        return Err(ConfigError("y is empty".into()));
    }
    let x_min = number(&map, "x_min")?.unwrap_or(y[0] - 6);
    let x_max = number(&map, "x_max")?.unwrap_or(y[0] + 2);
    if x_max < x_min {
        return Err(ConfigError(format!("x_max = {x_max} < x_min = {x_min}")));
    }
    let grid_m = number(&map, "grid_m")?.unwrap_or(512);
    let rtol = number(&map, "rtol")?.unwrap_or(1e-10);
    let workers = number(&map, "workers")?.unwrap_or(1);
    if workers == 0 || grid_m < 8 || !(rtol > 0.0) {
        return Err(ConfigError("workers ≥ 1, grid_m ≥ 8 and rtol > 0 are required".into()));
    }
    let config = Config {
        delta,
        t,
        y,
        x_min,
        x_max,
        method: map.get("method").cloned(),
        grid_m,
        rtol,
        seed: number(&map, "seed")?.unwrap_or(1),
        workers,
        cache_dir: map.get("cache_dir").filter(|s| !s.is_empty()).map(PathBuf::from),
    };
    config.params()?;
    Ok(config)
}
