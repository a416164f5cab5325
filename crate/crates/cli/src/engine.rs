//! Wiring: config layering, bank, model client, runner and cache.

use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context};
use eipl_core::bank::{load_bank, shipped_bank, QuestionBank};
use eipl_core::codegen::{GenerationClient, HttpClient, RetryPolicy, VariantCache, API_KEY_ENV};
use eipl_core::config::EngineConfig;
use eipl_core::execution::{ExecutionBackend, SubprocessBackend};
use eipl_core::fixtures::MockFixture;

use crate::GlobalArgs;

/// Defaults < config file < environment < flags.
pub fn config(g: &GlobalArgs) -> anyhow::Result<EngineConfig> {
    let mut c = EngineConfig::load(g.config.as_deref()).context("loading configuration")?;
    if let Some(v) = &g.bank {
        c.bank_path = Some(v.clone());
    }
    if let Some(v) = &g.runner {
        c.runner = v.clone();
    }
    if let Some(v) = &g.cache {
        c.cache_path = v.clone();
    }
    if let Some(v) = &g.model {
        c.model_id = v.clone();
    }
    if let Some(v) = &g.base_url {
        c.base_url = v.clone();
    }
    if let Some(v) = g.workers {
        c.worker_limit = v;
    }
    if let Some(v) = g.word_limit {
        c.word_limit = v;
    }
    if let Some(v) = g.n_variants {
        c.n_variants = v;
    }
    c.validate()?;
    Ok(c)
}

pub fn bank(config: &EngineConfig) -> anyhow::Result<QuestionBank> {
    match &config.bank_path {
        Some(path) => load_bank(path).with_context(|| format!("loading bank {}", path.display())),
        None => Ok(shipped_bank()),
    }
}

pub fn runner(config: &EngineConfig) -> anyhow::Result<SubprocessBackend> {
    Ok(SubprocessBackend::from_command_line(&config.runner)?)
}

pub fn retry(config: &EngineConfig) -> RetryPolicy {
    RetryPolicy {
        attempts: config.retry_budget.max(1),
        ..RetryPolicy::default()
    }
}

/// Client, backend and cache for one grading run.
pub struct Services {
    pub client: Box<dyn GenerationClient>,
    pub backend: Box<dyn ExecutionBackend>,
    pub cache: VariantCache,
}

/// With a mock fixture everything stays offline: scripted completions, the
/// fixture's scripted executions (or the runner if it scripts none) and an
/// in-memory cache unless `--cache` was given.
pub fn services(config: &EngineConfig, mock: Option<&Path>, explicit_cache: bool) -> anyhow::Result<Services> {
    let (client, backend, persistent): (Box<dyn GenerationClient>, Box<dyn ExecutionBackend>, bool) = match mock {
        Some(path) => {
            let fixture =
                MockFixture::load(path).with_context(|| format!("loading mock fixture {}", path.display()))?;
            let backend: Box<dyn ExecutionBackend> = match fixture.backend()? {
                Some(stub) => Box::new(stub),
                None => Box::new(runner(config)?),
            };
            (Box::new(fixture.client()), backend, explicit_cache)
        }
        None => {
            if std::env::var_os(API_KEY_ENV).is_none() {
                bail!("{API_KEY_ENV} is not set (use --mock FILE to grade offline)");
            }
            let client = HttpClient::from_env(&config.base_url, Duration::from_secs(config.request_timeout_secs));
            (Box::new(client), Box::new(runner(config)?), true)
        }
    };
    let cache = if persistent {
        VariantCache::open(&config.cache_path)
            .with_context(|| format!("opening cache {}", config.cache_path.display()))?
    } else {
        VariantCache::in_memory()
    };
    Ok(Services { client, backend, cache })
}
