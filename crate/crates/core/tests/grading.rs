use std::collections::HashMap;

use chrono::{TimeZone, Utc};
use eipl_core::codegen::{ExtractError, Generator, MockClient, RetryPolicy, VariantCache};
use eipl_core::domain::{Param, Question, StudentResponse, TestCase};
use eipl_core::execution::{CaseStatus, StubBackend, SuiteResult};
use eipl_core::grading::{Grader, GradingError, GradingOutcome, GradingPolicy, GradingRecord, GradingSettings};
use eipl_core::parallel::Exec;
use serde_json::json;

const REFERENCE: &str = "def foo(x):\n    return sum(1 for e in x if e % 2 == 1)";

fn question() -> Question {
    Question {
        id: "q-odd".into(),
        title: "Count odd".into(),
        subject_language: "python".into(),
        code: "def foo(x):\n    ...".into(),
        params: vec![Param {
            name: "x".into(),
            type_annotation: "List[int]".into(),
        }],
        assumptions: String::new(),
        test_suite: vec![
            TestCase::returning(vec![json!([1, 2, 3])], json!(2)),
            TestCase::returning(vec![json!([])], json!(0)),
            TestCase::returning(vec![json!([2, 4])], json!(0)),
            TestCase::returning(vec![json!([5])], json!(1)),
        ],
        reference_solution: REFERENCE.into(),
    }
}

fn response(text: &str, attempt: u32) -> StudentResponse {
    StudentResponse {
        student_id: "s7".into(),
        question_id: "q-odd".into(),
        attempt,
        text: text.into(),
        timestamp: Utc.with_ymd_and_hms(2024, 3, 4, 10, 0, attempt).unwrap(),
    }
}

/// Code for `name` whose scripted suite passes `passed` of 4 cases.
fn code(name: &str, passed: usize) -> String {
    format!("def {name}(x):\n    return {passed}")
}

struct Setup {
    client: MockClient,
    backend: StubBackend,
    cache: VariantCache,
}

impl Setup {
    /// Each entry maps a function name to the pass counts (out of 4) of its
    /// generated variants, in generation order.
    fn new(script: &[(&str, &[usize])]) -> Self {
        let mut completions = HashMap::new();
        let mut backend = StubBackend::new();
        for (name, passes) in script {
            completions.insert(name.to_string(), passes.iter().map(|&p| code(name, p)).collect());
            for &p in *passes {
                backend = backend.with_code(&code(name, p), SuiteResult::with_passes(p, 4));
            }
        }
        Setup {
            client: MockClient::new(completions),
            backend,
            cache: VariantCache::in_memory(),
        }
    }

    fn grader(&self) -> Grader<'_> {
        Grader::new(
            Generator::new(&self.client, &self.cache).with_retry(RetryPolicy::no_delay(1)),
            &self.backend,
            GradingSettings::default(),
        )
    }
}

#[test]
fn one_attempt_scores_fraction_of_cases() {
    let setup = Setup::new(&[("half_right", &[2])]);
    let outcome = setup.grader().grade_one_attempt(&response("half_right", 1), &question()).unwrap();
    assert!(!outcome.correct);
    assert_eq!(outcome.partial_score, 0.5);
    assert_eq!(outcome.variants.len(), 1);
    assert_eq!(outcome.temperature, 0.0);
    assert!(outcome.feedback.message.contains("2 of 4"));
}

#[test]
fn one_attempt_all_pass_is_correct() {
    let setup = Setup::new(&[("count_odd", &[4])]);
    let outcome = setup.grader().grade_one_attempt(&response("count_odd", 1), &question()).unwrap();
    assert!(outcome.correct);
    assert_eq!(outcome.partial_score, 1.0);
}

#[test]
fn prose_completion_gets_no_code_feedback() {
    let client = MockClient::new(HashMap::new()).with("vague", vec!["It counts some things.".into()]);
    let backend = StubBackend::new();
    let cache = VariantCache::in_memory();
    let grader = Grader::new(Generator::new(&client, &cache), &backend, GradingSettings::default());
    let outcome = grader.grade_one_attempt(&response("vague", 1), &question()).unwrap();
    assert!(!outcome.correct);
    assert_eq!(outcome.partial_score, 0.0);
    assert_eq!(outcome.variants[0].variant.extraction_error, Some(ExtractError::NoCode));
    assert!(outcome.feedback.message.contains("No runnable code"));
    assert!(outcome
        .feedback
        .case_summaries
        .iter()
        .all(|(_, s)| *s == CaseStatus::LoadError));
}

#[test]
fn robustness_counts_fully_passing_variants() {
    let cases: [(&str, &[usize], bool, f64); 3] = [
        ("all_good", &[4, 4, 4, 4, 4], true, 1.0),
        ("mostly_good", &[4, 3, 4, 0, 4], false, 0.6),
        ("all_bad", &[3, 3, 2, 0, 1], false, 0.0),
    ];
    for (name, passes, correct, partial) in cases {
        let setup = Setup::new(&[(name, passes)]);
        let outcome = setup.grader().grade_robustness(&response(name, 1), &question()).unwrap();
        assert_eq!(outcome.correct, correct, "{name}");
        assert_eq!(outcome.partial_score, partial, "{name}");
        assert_eq!(outcome.variants.len(), 5);
        assert_eq!(outcome.temperature, 0.7);
        let indices: Vec<usize> = outcome.variants.iter().map(|v| v.suite.variant_index).collect();
        assert_eq!(indices, vec![0, 1, 2, 3, 4]);
    }
}

#[test]
fn robustness_correct_implies_each_variant_one_attempt_correct() {
    let setup = Setup::new(&[("same", &[4])]);
    let grader = setup.grader();
    let robust = grader.grade_robustness(&response("same", 1), &question()).unwrap();
    assert!(robust.correct);
    assert!(robust.variants.iter().all(|v| v.suite.passed_all));
    assert!(grader.grade_one_attempt(&response("same", 1), &question()).unwrap().correct);
}

#[test]
fn invalid_name_is_rejected_before_generation() {
    let setup = Setup::new(&[]);
    let err = setup.grader().grade_one_attempt(&response("count odd", 1), &question()).unwrap_err();
    assert!(matches!(err, GradingError::InvalidResponse { .. }));
    assert_eq!(setup.client.calls(), 0);
}

#[test]
fn mismatched_question_is_an_error() {
    let setup = Setup::new(&[("x_y", &[4])]);
    let mut r = response("x_y", 1);
    r.question_id = "other".into();
    assert!(matches!(
        setup.grader().grade_one_attempt(&r, &question()),
        Err(GradingError::QuestionMismatch { .. })
    ));
}

#[test]
fn attempts_stop_after_first_correct() {
    let setup = Setup::new(&[("first_try", &[2]), ("second_try", &[4]), ("third_try", &[4])]);
    let responses = [response("first_try", 1), response("second_try", 2), response("third_try", 3)];
    let result = setup
        .grader()
        .grade_with_attempts(&responses, &question(), GradingPolicy::OneAttempt)
        .unwrap();
    assert_eq!(result.final_score, 1.0);
    assert_eq!(result.outcomes.len(), 2);
}

#[test]
fn invalid_attempt_is_free() {
    let setup = Setup::new(&[("quarter", &[1])]);
    let responses = [response("for", 1), response("quarter", 2)];
    let result = setup
        .grader()
        .grade_with_attempts(&responses, &question(), GradingPolicy::OneAttempt)
        .unwrap();
    assert_eq!(result.final_score, 0.25);
    assert_eq!(result.outcomes.len(), 1);
    assert_eq!(result.outcomes[0].response_ref.attempt, 2);
}

#[test]
fn final_score_is_best_attempt() {
    let setup = Setup::new(&[("aa", &[2]), ("bb", &[1]), ("cc", &[0])]);
    let responses = [response("aa", 1), response("bb", 2), response("cc", 3)];
    let result = setup
        .grader()
        .grade_with_attempts(&responses, &question(), GradingPolicy::OneAttempt)
        .unwrap();
    assert_eq!(result.final_score, 0.5);
    assert_eq!(result.outcomes.len(), 3);
}

#[test]
fn too_many_valid_attempts() {
    let setup = Setup::new(&[("aa", &[0])]);
    let responses: Vec<_> = (1..=4).map(|k| response("aa", k)).collect();
    let err = setup
        .grader()
        .grade_with_attempts(&responses, &question(), GradingPolicy::OneAttempt)
        .unwrap_err();
    assert!(matches!(err, GradingError::AttemptLimitExceeded { supplied: 4, limit: 3 }));
}

#[test]
fn attempts_must_share_student_and_question() {
    let setup = Setup::new(&[("aa", &[0])]);
    let mut other = response("aa", 2);
    other.student_id = "s8".into();
    let err = setup
        .grader()
        .grade_with_attempts(&[response("aa", 1), other], &question(), GradingPolicy::OneAttempt)
        .unwrap_err();
    assert!(matches!(err, GradingError::MixedResponses));
}

#[test]
fn outcome_round_trips_through_json() {
    let setup = Setup::new(&[("mostly_good", &[4, 3, 4, 0, 4])]);
    let outcome = setup.grader().grade_robustness(&response("mostly_good", 1), &question()).unwrap();
    let text = serde_json::to_string(&outcome).unwrap();
    let back: GradingOutcome = serde_json::from_str(&text).unwrap();
    assert_eq!(back, outcome);

    let record = GradingRecord::from_outcome(&outcome, Utc::now());
    let back: GradingRecord = serde_json::from_str(&serde_json::to_string(&record).unwrap()).unwrap();
    assert_eq!(back, record);
    assert_eq!(record.variants.len(), 5);
    assert_eq!(record.text, "mostly_good");
}

#[test]
fn grading_is_deterministic_and_strategy_independent() {
    let setup = Setup::new(&[("mostly_good", &[4, 3, 4, 0, 4])]);
    let first = setup.grader().grade_robustness(&response("mostly_good", 1), &question()).unwrap();
    let mut grader = setup.grader();
    grader.settings.exec = Exec::Sequential;
    let second = grader.grade_robustness(&response("mostly_good", 1), &question()).unwrap();
    // The second run is served from the cache; everything else matches.
    assert!(second.variants.iter().all(|v| v.variant.cache_hit));
    assert_eq!(first.partial_score, second.partial_score);
    assert_eq!(first.feedback, second.feedback);
    assert_eq!(
        GradingRecord::from_outcome(&first, Utc::now()).without_timestamp(),
        GradingRecord::from_outcome(&second, Utc::now()).without_timestamp()
    );
}

#[test]
fn feedback_never_contains_reference_solution() {
    let setup = Setup::new(&[("half_right", &[2]), ("mostly_good", &[4, 3, 4, 0, 4])]);
    let grader = setup.grader();
    for (name, policy) in [("half_right", GradingPolicy::OneAttempt), ("mostly_good", GradingPolicy::Robustness)] {
        let outcome = grader.grade(policy, &response(name, 1), &question()).unwrap();
        let feedback = serde_json::to_string(&outcome.feedback).unwrap();
        assert!(!feedback.contains("e % 2 == 1"));
        assert_eq!(outcome.feedback.shown_code, outcome.variants[0].variant.code);
    }
}

#[test]
fn batch_preserves_order_and_reports_errors_per_item() {
    let setup = Setup::new(&[("aa", &[4]), ("bb", &[2])]);
    let mut unknown = response("aa", 1);
    unknown.question_id = "missing".into();
    let responses = [response("aa", 1), response("not valid", 1), unknown, response("bb", 1)];
    let questions = HashMap::from([("q-odd".to_string(), question())]);
    let results = setup
        .grader()
        .grade_batch(&responses, &questions, GradingPolicy::OneAttempt, 3);
    assert_eq!(results.len(), 4);
    assert_eq!(results[0].as_ref().unwrap().partial_score, 1.0);
    assert!(matches!(results[1], Err(GradingError::InvalidResponse { .. })));
    assert!(matches!(results[2], Err(GradingError::UnknownQuestion(_))));
    assert_eq!(results[3].as_ref().unwrap().partial_score, 0.5);
}

#[test]
fn partial_score_is_monotone_in_passing_variants() {
    let mut last = -1.0;
    for k in 0..=5 {
        let passes: Vec<usize> = (0..5).map(|i| if i < k { 4 } else { 3 }).collect();
        let setup = Setup::new(&[("mono", &passes)]);
        let score = setup
            .grader()
            .grade_robustness(&response("mono", 1), &question())
            .unwrap()
            .partial_score;
        assert!(score >= last);
        last = score;
    }
    assert_eq!(last, 1.0);
}
