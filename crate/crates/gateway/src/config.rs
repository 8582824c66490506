//! Layered configuration: built-in defaults, then a TOML file, then
//! command-line flags.
//!
//! ```toml
//! [overlap]
//! d_max = 15.0
//!
//! [retrieval]
//! strategy = "fov-non-adj"
//! k = 20
//!
//! [server]
//! bind = "0.0.0.0:8080"
//! ```

use std::path::Path;

use context_memory::geometry::{OverlapConfig, PairingMode};
use context_memory::retrieval::{DedupFill, RetrievalConfig, StrategyKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bind address when neither flag, environment nor file sets one.
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const BIND_ENV: &str = "CTXMEM_BIND";
/// `tracing` filter directive, e.g. `info` or `ctxmem_gateway=debug`.
pub const LOG_ENV: &str = "CTXMEM_LOG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub world_seeds: Vec<u64>,
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategyKind>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            world_seeds: vec![3, 5, 7, 11, 13],
            seeds: vec![1, 2, 3],
            strategies: StrategyKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub overlap: OverlapConfig,
    pub retrieval: RetrievalConfig,
    pub server: ServerConfig,
    pub eval: EvalConfig,
}

/// Flags that override file settings. `None` leaves the file value.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, global = true)]
    pub strategy: Option<StrategyKind>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub far_slots: Option<usize>,
    #[arg(long, global = true)]
    pub dedup_fill: Option<DedupFill>,
    #[arg(long, global = true)]
    pub d_min: Option<f64>,
    #[arg(long, global = true)]
    pub d_max: Option<f64>,
    #[arg(long, global = true, value_parser = parse_pairing)]
    pub pairing: Option<PairingMode>,
    /// Retrieval seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

fn parse_pairing(s: &str) -> Result<PairingMode, String> {
    match s {
        "all-pairs" => Ok(PairingMode::AllPairs),
        "cross-pair" => Ok(PairingMode::CrossPair),
        "same-pair" => Ok(PairingMode::SamePair),
        _ => Err(format!(
            "unknown pairing {s:?}; expected all-pairs, cross-pair or same-pair"
        )),
    }
}

impl Config {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.into(),
            source: Box::new(e),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Defaults, then the file named by `o.config`, then the flags.
    pub fn resolve(o: &Overrides) -> Result<Self, ConfigError> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        c.apply(o);
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let r = &mut self.retrieval;
        if let Some(v) = o.strategy {
            r.strategy = v;
        }
        if let Some(v) = o.k {
            r.k = v;
        }
        if let Some(v) = o.far_slots {
            r.far_slots = v;
        }
        if let Some(v) = o.dedup_fill {
            r.dedup_fill = v;
        }
        if let Some(v) = o.seed {
            r.seed = v;
        }
        let ov = &mut self.overlap;
        if let Some(v) = o.d_min {
            ov.d_min = v;
        }
        if let Some(v) = o.d_max {
            ov.d_max = v;
        }
        if let Some(v) = o.pairing {
            ov.pairing = v;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.overlap.validate().map_err(|e| ConfigError::Invalid {
            field: format!("overlap.{}", e.field()),
            message: e.to_string(),
        })?;
        self.retrieval.validate().map_err(|e| ConfigError::Invalid {
            field: format!("retrieval.{}", e.field().unwrap_or("config")),
            message: e.to_string(),
        })
    }

    /// Flag, then environment, then file, then the default.
    pub fn bind_address(&self, flag: Option<&str>) -> String {
        flag.map(str::to_owned)
            .or_else(|| std::env::var(BIND_ENV).ok().filter(|s| !s.is_empty()))
            .or_else(|| self.server.bind.clone())
            .unwrap_or_else(|| DEFAULT_BIND.to_owned())
    }
}
