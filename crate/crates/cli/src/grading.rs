use std::path::Path;

use anyhow::{bail, Context};
use chrono::Utc;
use eipl_core::bank::check_references;
use eipl_core::codegen::{compact_cache, Generator};
use eipl_core::grading::{Grader, GradingPolicy, GradingRecord};
use eipl_core::jsonl::{append_jsonl, read_jsonl};
use eipl_core::{validate_function_name, StudentResponse};

use crate::engine;
use crate::GlobalArgs;

pub fn validate(g: &GlobalArgs, name: &str) -> anyhow::Result<()> {
    let config = engine::config(g)?;
    let result = validate_function_name(name, config.word_limit);
    let words = |n: usize| if n == 1 { "1 word".to_string() } else { format!("{n} words") };
    if result.valid {
        println!("valid ({})", words(result.word_count));
        return Ok(());
    }
    println!("invalid ({})", words(result.word_count));
    if let Some(msg) = result.resubmission_message(config.word_limit) {
        println!("{msg}");
    }
    bail!("`{name}` is not an acceptable function name")
}

pub fn grade(
    g: &GlobalArgs,
    question_id: &str,
    name: &str,
    policy: GradingPolicy,
    mock: Option<&Path>,
    student: &str,
    attempt: u32,
) -> anyhow::Result<()> {
    let config = engine::config(g)?;
    let bank = engine::bank(&config)?;
    let question = bank
        .get(question_id)
        .with_context(|| format!("no question `{question_id}` in bank {}", bank.version))?;
    let services = engine::services(&config, mock, g.cache.is_some())?;
    let grader = Grader::new(
        Generator::new(services.client.as_ref(), &services.cache).with_retry(engine::retry(&config)),
        services.backend.as_ref(),
        config.grading_settings(),
    );
    let response = StudentResponse {
        student_id: student.to_string(),
        question_id: question_id.to_string(),
        attempt,
        text: name.to_string(),
        timestamp: Utc::now(),
    };
    let outcome = grader.grade(policy, &response, question)?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    Ok(())
}

/// Grades every response and appends one record per success to `out`, in
/// input order. Failures are listed on stderr and make the exit status 1.
pub fn batch(
    g: &GlobalArgs,
    responses: &Path,
    policy: GradingPolicy,
    out: &Path,
    mock: Option<&Path>,
) -> anyhow::Result<()> {
    let config = engine::config(g)?;
    let bank = engine::bank(&config)?;
    let responses: Vec<StudentResponse> =
        read_jsonl(responses).with_context(|| format!("reading {}", responses.display()))?;
    let services = engine::services(&config, mock, g.cache.is_some())?;
    let grader = Grader::new(
        Generator::new(services.client.as_ref(), &services.cache).with_retry(engine::retry(&config)),
        services.backend.as_ref(),
        config.grading_settings(),
    );
    let results = grader.grade_batch(&responses, &bank.by_id(), policy, config.worker_limit);

    let graded_at = Utc::now();
    let mut records = Vec::new();
    let mut failures = 0;
    for (response, result) in responses.iter().zip(results) {
        match result {
            Ok(outcome) => records.push(GradingRecord::from_outcome(&outcome, graded_at)),
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e}", response.response_ref());
            }
        }
    }
    append_jsonl(out, &records).with_context(|| format!("writing {}", out.display()))?;
    let correct = records.iter().filter(|r| r.correct).count();
    eprintln!(
        "graded {} of {} responses ({correct} correct, policy {policy}); records appended to {}",
        records.len(),
        responses.len(),
        out.display()
    );
    if failures > 0 {
        bail!("{failures} response(s) could not be graded");
    }
    Ok(())
}

pub fn bank_check(g: &GlobalArgs) -> anyhow::Result<()> {
    let config = engine::config(g)?;
    let bank = engine::bank(&config)?;
    let runner = engine::runner(&config)?;
    let mut failed = 0;
    for check in check_references(&bank, &runner) {
        match &check.result {
            Ok(r) if r.passed_all => println!("PASS {} ({} cases)", check.question_id, r.case_results.len()),
            Ok(r) => {
                failed += 1;
                let bad: Vec<String> = r
                    .case_results
                    .iter()
                    .filter(|c| c.status != eipl_core::execution::CaseStatus::Pass)
                    .map(|c| format!("case {} {:?}: {}", c.case_index, c.status, c.observed))
                    .collect();
                println!("FAIL {}: {}", check.question_id, bad.join("; "));
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {}: {e}", check.question_id);
            }
        }
    }
    if failed > 0 {
        bail!("{failed} reference solution(s) failed their suites");
    }
    Ok(())
}

pub fn bank_list(g: &GlobalArgs) -> anyhow::Result<()> {
    let config = engine::config(g)?;
    let bank = engine::bank(&config)?;
    println!("bank {}", bank.version);
    for q in &bank.questions {
        println!("{}\t{}\t{} cases", q.id, q.title, q.test_suite.len());
    }
    Ok(())
}

pub fn cache_compact(g: &GlobalArgs) -> anyhow::Result<()> {
    let config = engine::config(g)?;
    let path = &config.cache_path;
    if !path.exists() {
        bail!("no cache at {}", path.display());
    }
    let (before, after) = compact_cache(path).with_context(|| format!("compacting {}", path.display()))?;
    println!("{}: {before} lines -> {after}", path.display());
    Ok(())
}
