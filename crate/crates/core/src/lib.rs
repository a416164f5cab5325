//! Autograding engine for function-name ("Function Redefinition") Explain in
//! Plain English questions.
//!
//! A student answers with nothing but a function name. The engine asks a
//! chat-completion model to implement a function with that name from the
//! question's signature and assumptions, runs the generated code against the
//! question's unit tests in a separate runner process, and scores the result
//! under a one-attempt or robustness policy. The [`psychometrics`] module
//! analyses the resulting score matrices with a bounded two-parameter
//! logistic IRT model fitted by cross-entropy minimisation.

pub mod bank;
pub mod codegen;
pub mod config;
pub mod domain;
pub mod execution;
pub mod fixtures;
pub mod grading;
pub mod jsonl;
pub mod parallel;
pub mod psychometrics;

pub use domain::{
    count_words, validate_function_name, Question, ResponseRef, SoloCategory, SoloLabel,
    StudentResponse, TestCase, TestMode, ValidationResult, Violation,
};
pub use grading::{GradingOutcome, GradingPolicy};
