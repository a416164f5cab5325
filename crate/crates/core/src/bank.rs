//! Question-bank persistence and checks.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::extract_code;
use crate::domain::{Question, QuestionError};
use crate::execution::{run_suite, ExecutionBackend, ExecutionError, SuiteResult};

const SHIPPED_BANK: &str = include_str!("../data/bank.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionBank {
    pub version: String,
    pub questions: Vec<Question>,
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column} (field `{path}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("duplicate question id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Invalid(#[from] QuestionError),
}

impl QuestionBank {
    pub fn from_json(text: &str) -> Result<Self, BankError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let bank: QuestionBank = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            BankError::Parse {
                line: inner.line(),
                column: inner.column(),
                path,
                message: inner.to_string(),
            }
        })?;
        bank.check()?;
        Ok(bank)
    }

    /// Unique ids plus each question's structural checks.
    pub fn check(&self) -> Result<(), BankError> {
        let mut seen = HashSet::new();
        for q in &self.questions {
            if !seen.insert(q.id.as_str()) {
                return Err(BankError::DuplicateId(q.id.clone()));
            }
            q.check()?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn by_id(&self) -> HashMap<String, Question> {
        self.questions.iter().map(|q| (q.id.clone(), q.clone())).collect()
    }
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<QuestionBank, BankError> {
    QuestionBank::from_json(&std::fs::read_to_string(path)?)
}

/// The four built-in questions.
pub fn shipped_bank() -> QuestionBank {
    QuestionBank::from_json(SHIPPED_BANK).expect("shipped bank is valid")
}

pub fn shipped_bank_json() -> &'static str {
    SHIPPED_BANK
}

#[derive(Debug)]
pub struct ReferenceCheck {
    pub question_id: String,
    pub result: Result<SuiteResult, ExecutionError>,
}

impl ReferenceCheck {
    pub fn passed(&self) -> bool {
        matches!(&self.result, Ok(r) if r.passed_all)
    }
}

/// Runs each reference solution against its own suite.
pub fn check_references(bank: &QuestionBank, backend: &dyn ExecutionBackend) -> Vec<ReferenceCheck> {
    bank.questions
        .iter()
        .map(|q| {
            let name = reference_function_name(&q.reference_solution).unwrap_or_else(|| "foo".into());
            let result = run_suite(&q.reference_solution, &name, &q.test_suite, backend);
            ReferenceCheck {
                question_id: q.id.clone(),
                result,
            }
        })
        .collect()
}

fn reference_function_name(code: &str) -> Option<String> {
    code.lines()
        .filter(|l| !l.starts_with(char::is_whitespace))
        .filter_map(|l| l.strip_prefix("def "))
        .filter_map(|rest| rest.split('(').next())
        .map(|n| n.trim().to_string())
        .find(|n| extract_code(code, n).is_ok())
}
