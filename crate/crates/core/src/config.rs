//! Engine configuration: defaults, then a TOML file, then `EIPL_*`
//! environment variables. Command-line flags are applied last by the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::DEFAULT_WORD_LIMIT;
use crate::grading::GradingSettings;
use crate::parallel::Exec;

/// Environment variable naming the config file.
pub const CONFIG_ENV: &str = "EIPL_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub model_id: String,
    pub base_url: String,
    pub temperature_one_attempt: f64,
    pub temperature_robustness: f64,
    pub n_variants: usize,
    pub word_limit: usize,
    pub max_attempts: usize,
    pub worker_limit: usize,
    /// Total tries per completion request.
    pub retry_budget: u32,
    pub request_timeout_secs: u64,
    pub cache_path: PathBuf,
    /// Bank file; the built-in bank when unset.
    pub bank_path: Option<PathBuf>,
    /// Command line of the subject-language runner.
    pub runner: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            model_id: "gpt-4o".into(),
            base_url: "https://api.openai.com/v1".into(),
            temperature_one_attempt: 0.0,
            temperature_robustness: 0.7,
            n_variants: 5,
            word_limit: DEFAULT_WORD_LIMIT,
            max_attempts: 3,
            worker_limit: 4,
            retry_budget: 3,
            request_timeout_secs: 60,
            cache_path: PathBuf::from("eipl-cache.jsonl"),
            bank_path: None,
            runner: "eipl-runner".into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("environment variable {var}: cannot parse `{value}`")]
    Env { var: String, value: String },
    #[error("invalid setting: {0}")]
    Invalid(String),
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Defaults, overlaid by the file (explicit path, else `EIPL_CONFIG`),
    /// overlaid by environment variables.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let env_file = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let mut config = match file.map(Path::to_path_buf).or(env_file) {
            Some(path) => Self::from_file(&path)?,
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `EIPL_<FIELD>` overrides (e.g. `EIPL_N_VARIANTS`).
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(var: &str, value: String) -> Result<T, ConfigError> {
            value.trim().parse().map_err(|_| ConfigError::Env {
                var: var.to_string(),
                value,
            })
        }
        macro_rules! overlay {
            ($($field:ident => $var:literal),* $(,)?) => {$(
                if let Some(v) = get($var) {
                    self.$field = parse($var, v)?;
                }
            )*};
        }
        overlay! {
            model_id => "EIPL_MODEL_ID",
            base_url => "EIPL_BASE_URL",
            temperature_one_attempt => "EIPL_TEMPERATURE_ONE_ATTEMPT",
            temperature_robustness => "EIPL_TEMPERATURE_ROBUSTNESS",
            n_variants => "EIPL_N_VARIANTS",
            word_limit => "EIPL_WORD_LIMIT",
            max_attempts => "EIPL_MAX_ATTEMPTS",
            worker_limit => "EIPL_WORKER_LIMIT",
            retry_budget => "EIPL_RETRY_BUDGET",
            request_timeout_secs => "EIPL_REQUEST_TIMEOUT_SECS",
            cache_path => "EIPL_CACHE_PATH",
            runner => "EIPL_RUNNER",
        }
        if let Some(v) = get("EIPL_BANK_PATH") {
            self.bank_path = Some(PathBuf::from(v));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.n_variants == 0 {
            return bad("n_variants must be at least 1");
        }
        if self.word_limit == 0 {
            return bad("word_limit must be at least 1");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        for t in [self.temperature_one_attempt, self.temperature_robustness] {
            if !t.is_finite() || t < 0.0 {
                return bad("temperatures must be finite and non-negative");
            }
        }
        Ok(())
    }

    pub fn grading_settings(&self) -> GradingSettings {
        GradingSettings {
            model_id: self.model_id.clone(),
            temperature_one_attempt: self.temperature_one_attempt,
            temperature_robustness: self.temperature_robustness,
            n_variants: self.n_variants,
            word_limit: self.word_limit,
            max_attempts: self.max_attempts,
            exec: Exec::default(),
        }
    }
}
