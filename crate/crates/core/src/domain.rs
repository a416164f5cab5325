//! Questions, test cases, student responses and the response-validation rules.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Default word limit for a submitted function name.
pub const DEFAULT_WORD_LIMIT: usize = 10;

/// Default per-case timeout handed to the runner.
pub const DEFAULT_CASE_TIMEOUT_MS: u64 = 5000;

/// One positional parameter of the function under description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub type_annotation: String,
}

/// What a test case checks after calling the function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    ReturnValue,
    ArgumentMutation,
    Both,
}

/// Expected outcome of one test case.
///
/// `return` holds the expected return value (JSON `null` is a real expectation,
/// Python's `None`). `arguments` maps a zero-based argument position to its
/// expected state after the call.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Expected {
    #[serde(
        rename = "return",
        default,
        deserialize_with = "present_value",
        skip_serializing_if = "Option::is_none"
    )]
    pub return_value: Option<Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub arguments: BTreeMap<usize, Value>,
}

// Distinguishes `"return": null` (expect None) from an absent key.
fn present_value<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

impl Expected {
    pub fn returns(value: Value) -> Self {
        Expected {
            return_value: Some(value),
            arguments: BTreeMap::new(),
        }
    }

    pub fn mutates(position: usize, state: Value) -> Self {
        Expected {
            return_value: None,
            arguments: BTreeMap::from([(position, state)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub inputs: Vec<Value>,
    pub expected: Expected,
    pub mode: TestMode,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn default_timeout() -> u64 {
    DEFAULT_CASE_TIMEOUT_MS
}

impl TestCase {
    pub fn returning(inputs: Vec<Value>, value: Value) -> Self {
        TestCase {
            inputs,
            expected: Expected::returns(value),
            mode: TestMode::ReturnValue,
            timeout_ms: DEFAULT_CASE_TIMEOUT_MS,
        }
    }

    pub fn mutating(inputs: Vec<Value>, position: usize, state: Value) -> Self {
        TestCase {
            inputs,
            expected: Expected::mutates(position, state),
            mode: TestMode::ArgumentMutation,
            timeout_ms: DEFAULT_CASE_TIMEOUT_MS,
        }
    }
}

fn default_language() -> String {
    "python".to_string()
}

/// A function-naming question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub title: String,
    #[serde(default = "default_language")]
    pub subject_language: String,
    /// The snippet shown to the student. Never sent to the model.
    pub code: String,
    pub params: Vec<Param>,
    /// Author-provided context handed to the generator.
    #[serde(default)]
    pub assumptions: String,
    pub test_suite: Vec<TestCase>,
    pub reference_solution: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuestionError {
    #[error("question id is empty")]
    EmptyId,
    #[error("question {0}: test suite is empty")]
    EmptySuite(String),
    #[error("question {id}: case {case} has {found} inputs, expected {expected}")]
    ArityMismatch {
        id: String,
        case: usize,
        expected: usize,
        found: usize,
    },
    #[error("question {id}: case {case} checks the return value but has no expected `return`")]
    MissingReturn { id: String, case: usize },
    #[error("question {id}: case {case} checks argument mutation but names no argument state")]
    MissingArgumentState { id: String, case: usize },
    #[error("question {id}: case {case} names argument {position}, function has {arity}")]
    ArgumentOutOfRange {
        id: String,
        case: usize,
        position: usize,
        arity: usize,
    },
}

impl Question {
    /// Structural checks that don't need a runner. Whether the reference
    /// solution passes its suite is verified separately against a backend.
    pub fn check(&self) -> Result<(), QuestionError> {
        if self.id.trim().is_empty() {
            return Err(QuestionError::EmptyId);
        }
        if self.test_suite.is_empty() {
            return Err(QuestionError::EmptySuite(self.id.clone()));
        }
        let arity = self.params.len();
        for (case, tc) in self.test_suite.iter().enumerate() {
            let id = || self.id.clone();
            if tc.inputs.len() != arity {
                return Err(QuestionError::ArityMismatch {
                    id: id(),
                    case,
                    expected: arity,
                    found: tc.inputs.len(),
                });
            }
            let wants_return = matches!(tc.mode, TestMode::ReturnValue | TestMode::Both);
            let wants_args = matches!(tc.mode, TestMode::ArgumentMutation | TestMode::Both);
            if wants_return && tc.expected.return_value.is_none() {
                return Err(QuestionError::MissingReturn { id: id(), case });
            }
            if wants_args && tc.expected.arguments.is_empty() {
                return Err(QuestionError::MissingArgumentState { id: id(), case });
            }
            if let Some(&position) = tc.expected.arguments.keys().find(|&&p| p >= arity) {
                return Err(QuestionError::ArgumentOutOfRange {
                    id: id(),
                    case,
                    position,
                    arity,
                });
            }
        }
        Ok(())
    }
}

/// Identifies one submitted attempt.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResponseRef {
    pub student_id: String,
    pub question_id: String,
    pub attempt: u32,
}

impl fmt::Display for ResponseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.student_id, self.question_id, self.attempt)
    }
}

/// A student's submission, stored verbatim whether or not it validates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentResponse {
    pub student_id: String,
    pub question_id: String,
    pub attempt: u32,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

impl StudentResponse {
    pub fn response_ref(&self) -> ResponseRef {
        ResponseRef {
            student_id: self.student_id.clone(),
            question_id: self.question_id.clone(),
            attempt: self.attempt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    Empty,
    NotAnIdentifier,
    ReservedKeyword,
    TooManyWords,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::Empty => "the name contains no words",
            Violation::NotAnIdentifier => "not a valid function name (letters, digits and underscores only, not starting with a digit)",
            Violation::ReservedKeyword => "reserved keyword",
            Violation::TooManyWords => "too many words",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub valid: bool,
    pub word_count: usize,
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    /// Human-readable resubmission prompt, or `None` when valid.
    pub fn resubmission_message(&self, word_limit: usize) -> Option<String> {
        if self.valid {
            return None;
        }
        let reasons: Vec<String> = self
            .violations
            .iter()
            .map(|v| match v {
                Violation::TooManyWords => {
                    format!("too many words ({} > {word_limit})", self.word_count)
                }
                other => other.to_string(),
            })
            .collect();
        Some(format!(
            "Please resubmit without penalty: {}",
            reasons.join("; ")
        ))
    }
}

fn python_keywords() -> &'static HashSet<&'static str> {
    static KEYWORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    KEYWORDS.get_or_init(|| parse_keyword_list(include_str!("../data/keywords_python.txt")))
}

fn parse_keyword_list(text: &str) -> HashSet<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Reserved words of a subject language, or `None` if the language is unknown.
pub fn reserved_keywords(language: &str) -> Option<&'static HashSet<&'static str>> {
    match language.to_ascii_lowercase().as_str() {
        "python" | "python3" => Some(python_keywords()),
        _ => None,
    }
}

pub fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Counts words in a name: segments between underscores, with a new word
/// starting at every lowercase-to-uppercase transition. Empty segments are
/// ignored. Any other non-identifier character also separates words, so
/// invalid submissions still get a meaningful count.
pub fn count_words(name: &str) -> usize {
    let mut words = 0;
    let mut in_word = false;
    let mut prev_lower = false;
    for c in name.chars() {
        if c == '_' || !(c.is_alphanumeric()) {
            in_word = false;
            prev_lower = false;
            continue;
        }
        if !in_word || (prev_lower && c.is_uppercase()) {
            words += 1;
        }
        in_word = true;
        prev_lower = c.is_lowercase();
    }
    words
}

/// Validates a submitted name against the Python subject language.
pub fn validate_function_name(text: &str, word_limit: usize) -> ValidationResult {
    validate_function_name_for(text, word_limit, python_keywords())
}

/// Validates a submitted name against an arbitrary keyword list.
pub fn validate_function_name_for(
    text: &str,
    word_limit: usize,
    keywords: &HashSet<&str>,
) -> ValidationResult {
    let word_count = count_words(text);
    let mut violations = Vec::new();
    if text.is_empty() {
        violations.push(Violation::Empty);
    } else if !is_identifier(text) {
        violations.push(Violation::NotAnIdentifier);
    } else if word_count == 0 {
        violations.push(Violation::Empty);
    }
    if keywords.contains(text) {
        violations.push(Violation::ReservedKeyword);
    }
    if word_count > word_limit {
        violations.push(Violation::TooManyWords);
    }
    ValidationResult {
        valid: violations.is_empty(),
        word_count,
        violations,
    }
}

/// Modified SOLO categories used when coding function-name responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoloCategory {
    Relational,
    RelationalError,
    Multistructural,
    MultistructuralError,
    OtherError,
}

impl SoloCategory {
    pub const ALL: [SoloCategory; 5] = [
        SoloCategory::Relational,
        SoloCategory::RelationalError,
        SoloCategory::Multistructural,
        SoloCategory::MultistructuralError,
        SoloCategory::OtherError,
    ];
}

/// One rater's SOLO label for one response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoloLabel {
    pub rater_id: String,
    pub response_ref: ResponseRef,
    pub category: SoloCategory,
}
