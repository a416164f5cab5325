//! Grading policies and the multi-attempt flow.
//!
//! One-attempt grading generates a single function and scores it by the
//! fraction of test cases it passes. Robustness grading generates several
//! functions; the response is correct only if every one passes every case,
//! and the fraction of fully passing functions is the partial score.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::{
    build_prompt, CodegenError, GeneratedVariant, GenerationRequest, Generator, PROMPT_VERSION,
};
use crate::domain::{
    validate_function_name, Question, ResponseRef, StudentResponse, ValidationResult,
    DEFAULT_WORD_LIMIT,
};
use crate::execution::{code_hash, run_suite, CaseStatus, ExecutionBackend, ExecutionError, SuiteResult};
use crate::parallel::{map_slice, map_slice_limited, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradingPolicy {
    OneAttempt,
    Robustness,
}

impl std::str::FromStr for GradingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "one-attempt" => Ok(GradingPolicy::OneAttempt),
            "robustness" => Ok(GradingPolicy::Robustness),
            other => Err(format!("unknown policy `{other}` (expected one-attempt or robustness)")),
        }
    }
}

impl std::fmt::Display for GradingPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GradingPolicy::OneAttempt => "one-attempt",
            GradingPolicy::Robustness => "robustness",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub variant: GeneratedVariant,
    pub suite: SuiteResult,
}

/// What the student sees after an attempt. Built from generated code and
/// case statuses only; the reference solution is never consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPayload {
    pub shown_code: String,
    pub case_summaries: Vec<(usize, CaseStatus)>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradingOutcome {
    pub response_ref: ResponseRef,
    pub function_name: String,
    pub policy: GradingPolicy,
    pub prompt_version: String,
    pub model_id: String,
    pub temperature: f64,
    pub variants: Vec<VariantOutcome>,
    pub correct: bool,
    pub partial_score: f64,
    pub feedback: FeedbackPayload,
}

#[derive(Debug, Error)]
pub enum GradingError {
    #[error("response `{text}` is not a valid function name: {violations:?}")]
    InvalidResponse {
        text: String,
        violations: Vec<crate::domain::Violation>,
    },
    #[error("response is for question `{found}`, grading `{expected}`")]
    QuestionMismatch { expected: String, found: String },
    #[error("unknown question `{0}`")]
    UnknownQuestion(String),
    #[error("responses belong to more than one (student, question) pair")]
    MixedResponses,
    #[error("{supplied} valid attempts supplied, at most {limit} allowed")]
    AttemptLimitExceeded { supplied: usize, limit: usize },
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Execution(#[from] ExecutionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradingSettings {
    pub model_id: String,
    pub temperature_one_attempt: f64,
    pub temperature_robustness: f64,
    pub n_variants: usize,
    pub word_limit: usize,
    pub max_attempts: usize,
    /// Strategy for running robustness variants.
    pub exec: Exec,
}

impl Default for GradingSettings {
    fn default() -> Self {
        GradingSettings {
            model_id: "gpt-4o".into(),
            temperature_one_attempt: 0.0,
            temperature_robustness: 0.7,
            n_variants: 5,
            word_limit: DEFAULT_WORD_LIMIT,
            max_attempts: 3,
            exec: Exec::default(),
        }
    }
}

pub struct Grader<'a> {
    pub generator: Generator<'a>,
    pub backend: &'a dyn ExecutionBackend,
    pub settings: GradingSettings,
}

impl<'a> Grader<'a> {
    pub fn new(generator: Generator<'a>, backend: &'a dyn ExecutionBackend, settings: GradingSettings) -> Self {
        Grader {
            generator,
            backend,
            settings,
        }
    }

    pub fn validate(&self, response: &StudentResponse) -> ValidationResult {
        validate_function_name(&response.text, self.settings.word_limit)
    }

    pub fn grade(
        &self,
        policy: GradingPolicy,
        response: &StudentResponse,
        question: &Question,
    ) -> Result<GradingOutcome, GradingError> {
        match policy {
            GradingPolicy::OneAttempt => self.grade_one_attempt(response, question),
            GradingPolicy::Robustness => self.grade_robustness(response, question),
        }
    }

    /// One generated function; correct iff it passes every case, partial
    /// score is the fraction of cases passed.
    pub fn grade_one_attempt(
        &self,
        response: &StudentResponse,
        question: &Question,
    ) -> Result<GradingOutcome, GradingError> {
        let variants = self.generate_and_run(response, question, 1, self.settings.temperature_one_attempt)?;
        let suite = &variants[0].suite;
        let (correct, partial) = (suite.passed_all, suite.fraction_passed);
        Ok(self.outcome(
            response,
            GradingPolicy::OneAttempt,
            self.settings.temperature_one_attempt,
            variants,
            correct,
            partial,
        ))
    }

    /// `n_variants` generated functions; correct iff all of them pass every
    /// case, partial score is the fraction of functions that do.
    pub fn grade_robustness(
        &self,
        response: &StudentResponse,
        question: &Question,
    ) -> Result<GradingOutcome, GradingError> {
        let n = self.settings.n_variants;
        let variants = self.generate_and_run(response, question, n, self.settings.temperature_robustness)?;
        let passing = variants.iter().filter(|v| v.suite.passed_all).count();
        let correct = passing == variants.len();
        let partial = passing as f64 / variants.len() as f64;
        Ok(self.outcome(
            response,
            GradingPolicy::Robustness,
            self.settings.temperature_robustness,
            variants,
            correct,
            partial,
        ))
    }

    /// Grades a student's attempts at one question in order, stopping after
    /// the first correct one. Invalid names are skipped without using up an
    /// attempt. The final score is the best partial score.
    pub fn grade_with_attempts(
        &self,
        responses: &[StudentResponse],
        question: &Question,
        policy: GradingPolicy,
    ) -> Result<AttemptsResult, GradingError> {
        if let Some(first) = responses.first() {
            if responses
                .iter()
                .any(|r| r.student_id != first.student_id || r.question_id != first.question_id)
            {
                return Err(GradingError::MixedResponses);
            }
        }
        let valid: Vec<&StudentResponse> = responses.iter().filter(|r| self.validate(r).valid).collect();
        if valid.len() > self.settings.max_attempts {
            return Err(GradingError::AttemptLimitExceeded {
                supplied: valid.len(),
                limit: self.settings.max_attempts,
            });
        }
        let mut outcomes = Vec::new();
        for response in valid {
            let outcome = self.grade(policy, response, question)?;
            let done = outcome.correct;
            outcomes.push(outcome);
            if done {
                break;
            }
        }
        let final_score = outcomes.iter().map(|o| o.partial_score).fold(0.0, f64::max);
        Ok(AttemptsResult {
            final_score,
            outcomes,
        })
    }

    /// Grades every response independently, at most `workers` at a time.
    /// Results come back in input order.
    pub fn grade_batch(
        &self,
        responses: &[StudentResponse],
        questions: &HashMap<String, Question>,
        policy: GradingPolicy,
        workers: usize,
    ) -> Vec<Result<GradingOutcome, GradingError>> {
        map_slice_limited(self.settings.exec, workers, responses, |r| {
            let question = questions
                .get(&r.question_id)
                .ok_or_else(|| GradingError::UnknownQuestion(r.question_id.clone()))?;
            self.grade(policy, r, question)
        })
    }

    fn generate_and_run(
        &self,
        response: &StudentResponse,
        question: &Question,
        n_variants: usize,
        temperature: f64,
    ) -> Result<Vec<VariantOutcome>, GradingError> {
        if response.question_id != question.id {
            return Err(GradingError::QuestionMismatch {
                expected: question.id.clone(),
                found: response.question_id.clone(),
            });
        }
        let validation = self.validate(response);
        if !validation.valid {
            return Err(GradingError::InvalidResponse {
                text: response.text.clone(),
                violations: validation.violations,
            });
        }
        let prompt = build_prompt(question, &response.text);
        let request = GenerationRequest {
            question_id: question.id.clone(),
            function_name: response.text.clone(),
            n_variants,
            temperature,
            model_id: self.settings.model_id.clone(),
        };
        let variants = self.generator.generate(&request, &prompt)?;
        let suites = map_slice(self.settings.exec, &variants, |v| {
            run_variant(v, &response.text, question, self.backend)
        });
        variants
            .into_iter()
            .zip(suites)
            .map(|(variant, suite)| Ok(VariantOutcome { variant, suite: suite? }))
            .collect()
    }

    fn outcome(
        &self,
        response: &StudentResponse,
        policy: GradingPolicy,
        temperature: f64,
        variants: Vec<VariantOutcome>,
        correct: bool,
        partial_score: f64,
    ) -> GradingOutcome {
        let feedback = feedback_for(&variants, policy, correct, partial_score);
        GradingOutcome {
            response_ref: response.response_ref(),
            function_name: response.text.clone(),
            policy,
            prompt_version: PROMPT_VERSION.to_string(),
            model_id: self.settings.model_id.clone(),
            temperature,
            variants,
            correct,
            partial_score,
            feedback,
        }
    }
}

fn run_variant(
    variant: &GeneratedVariant,
    function_name: &str,
    question: &Question,
    backend: &dyn ExecutionBackend,
) -> Result<SuiteResult, ExecutionError> {
    let mut suite = match &variant.extraction_error {
        Some(err) => SuiteResult::uniform(
            variant.index,
            question.test_suite.len(),
            CaseStatus::LoadError,
            &err.to_string(),
        ),
        None => run_suite(&variant.code, function_name, &question.test_suite, backend)?,
    };
    suite.variant_index = variant.index;
    Ok(suite)
}

fn feedback_for(
    variants: &[VariantOutcome],
    policy: GradingPolicy,
    correct: bool,
    partial_score: f64,
) -> FeedbackPayload {
    let first = &variants[0];
    let case_summaries = first
        .suite
        .case_results
        .iter()
        .map(|c| (c.case_index, c.status))
        .collect();
    let message = if let Some(err) = &first.variant.extraction_error {
        format!("No runnable code was produced from your function name ({err}).")
    } else {
        let passed = first.suite.passed_count();
        let total = first.suite.case_results.len();
        match (policy, correct) {
            (GradingPolicy::OneAttempt, true) => format!("Correct: the generated function passed all {total} tests."),
            (GradingPolicy::OneAttempt, false) => {
                format!("Incorrect: the generated function passed {passed} of {total} tests.")
            }
            (GradingPolicy::Robustness, true) => {
                format!("Correct: all {} generated functions passed every test.", variants.len())
            }
            (GradingPolicy::Robustness, false) => format!(
                "Incorrect: {} of {} generated functions passed every test.",
                (partial_score * variants.len() as f64).round() as usize,
                variants.len()
            ),
        }
    };
    FeedbackPayload {
        shown_code: first.variant.code.clone(),
        case_summaries,
        message,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptsResult {
    pub final_score: f64,
    pub outcomes: Vec<GradingOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub code_hash: String,
    pub fraction_passed: f64,
    pub passed_all: bool,
}

/// One line of the grading-record store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradingRecord {
    pub response_ref: ResponseRef,
    pub text: String,
    pub policy: GradingPolicy,
    pub prompt_version: String,
    pub model_id: String,
    pub temperature: f64,
    pub variants: Vec<VariantSummary>,
    pub correct: bool,
    pub partial_score: f64,
    pub graded_at: DateTime<Utc>,
}

impl GradingRecord {
    pub fn from_outcome(outcome: &GradingOutcome, graded_at: DateTime<Utc>) -> Self {
        GradingRecord {
            response_ref: outcome.response_ref.clone(),
            text: outcome.function_name.clone(),
            policy: outcome.policy,
            prompt_version: outcome.prompt_version.clone(),
            model_id: outcome.model_id.clone(),
            temperature: outcome.temperature,
            variants: outcome
                .variants
                .iter()
                .map(|v| VariantSummary {
                    code_hash: code_hash(&v.variant.code),
                    fraction_passed: v.suite.fraction_passed,
                    passed_all: v.suite.passed_all,
                })
                .collect(),
            correct: outcome.correct,
            partial_score: outcome.partial_score,
            graded_at,
        }
    }

    /// The record with its timestamp removed, for comparing reruns.
    pub fn without_timestamp(&self) -> Self {
        GradingRecord {
            graded_at: DateTime::<Utc>::UNIX_EPOCH,
            ..self.clone()
        }
    }
}
