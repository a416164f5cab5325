//! Offline fixture files: scripted completions for the mock client plus
//! scripted suite results for the stub backend.
//!
//! ```json
//! {
//!   "completions": { "count_odd_nums": ["```python\ndef count_odd_nums(x): ...\n```"] },
//!   "executions": [ { "code": "def count_odd_nums(x): ...", "statuses": ["pass", "pass"] } ]
//! }
//! ```
//!
//! An execution is keyed by `code` (hashed on load) or by a precomputed
//! `code_hash`, and gives either per-case `statuses` or `passed`/`total`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::MockClient;
use crate::execution::{code_hash, CaseResult, CaseStatus, StubBackend, SuiteResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixture {
    #[serde(default)]
    pub completions: HashMap<String, Vec<String>>,
    #[serde(default)]
    pub executions: Vec<ScriptedExecution>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedExecution {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statuses: Option<Vec<CaseStatus>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passed: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<usize>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("execution {0}: needs `code` or `code_hash`")]
    MissingKey(usize),
    #[error("execution {0}: needs `statuses` or both `passed` and `total` (passed <= total)")]
    MissingOutcome(usize),
}

impl ScriptedExecution {
    fn suite_result(&self, position: usize) -> Result<SuiteResult, FixtureError> {
        match (&self.statuses, self.passed, self.total) {
            (Some(statuses), _, _) => Ok(SuiteResult::from_cases(
                0,
                statuses
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| CaseResult::new(i, s, if s == CaseStatus::Pass { "" } else { "scripted" }))
                    .collect(),
                0,
            )),
            (None, Some(p), Some(t)) if p <= t => Ok(SuiteResult::with_passes(p, t)),
            _ => Err(FixtureError::MissingOutcome(position)),
        }
    }

    fn key(&self, position: usize) -> Result<String, FixtureError> {
        match (&self.code, &self.code_hash) {
            (Some(code), _) => Ok(code_hash(code)),
            (None, Some(h)) => Ok(h.clone()),
            (None, None) => Err(FixtureError::MissingKey(position)),
        }
    }
}

impl MockFixture {
    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FixtureError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn client(&self) -> MockClient {
        MockClient::new(self.completions.clone())
    }

    /// Stub backend with every scripted execution, or `None` when the fixture
    /// scripts no executions.
    pub fn backend(&self) -> Result<Option<StubBackend>, FixtureError> {
        if self.executions.is_empty() {
            return Ok(None);
        }
        let mut backend = StubBackend::new();
        for (i, e) in self.executions.iter().enumerate() {
            backend.insert_hash(e.key(i)?, e.suite_result(i)?);
        }
        Ok(Some(backend))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TestCase;
    use crate::execution::ExecutionBackend;

    #[test]
    fn both_outcome_forms() {
        let fx = MockFixture::from_json(
            r#"{"completions": {"f": ["x"]},
                "executions": [{"code": "a", "passed": 3, "total": 5},
                               {"code_hash": "abc", "statuses": ["pass", "timeout"]}]}"#,
        )
        .unwrap();
        let backend = fx.backend().unwrap().unwrap();
        assert_eq!(backend.len(), 2);
        let r = backend.run("a", "f", &[] as &[TestCase]).unwrap();
        assert_eq!(r.fraction_passed, 0.6);
    }

    #[test]
    fn incomplete_execution_rejected() {
        let fx = MockFixture::from_json(r#"{"executions": [{"code": "a", "passed": 3}]}"#).unwrap();
        assert!(matches!(fx.backend(), Err(FixtureError::MissingOutcome(0))));
        let fx = MockFixture::from_json(r#"{"executions": [{"passed": 3, "total": 3}]}"#).unwrap();
        assert!(matches!(fx.backend(), Err(FixtureError::MissingKey(0))));
        assert!(MockFixture::from_json(r#"{"typo": 1}"#).is_err());
    }
}
