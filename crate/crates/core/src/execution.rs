//! Running generated code against a question's test suite.
//!
//! Generated code is never evaluated inside the engine. A backend either
//! hands the suite to a runner subprocess over the JSON runner protocol, or
//! (for offline tests and fixtures) answers from a scripted table keyed by
//! the code's hash.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::TestCase;

/// Longest `observed` string kept in a [`CaseResult`].
pub const OBSERVED_MAX_CHARS: usize = 2000;

/// Slack added to the sum of case timeouts before a runner is killed.
pub const RUN_CEILING_SLACK_MS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Pass,
    WrongReturn,
    WrongMutation,
    RuntimeError,
    Timeout,
    LoadError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_index: usize,
    pub status: CaseStatus,
    pub observed: String,
}

impl CaseResult {
    pub fn new(case_index: usize, status: CaseStatus, observed: impl Into<String>) -> Self {
        CaseResult {
            case_index,
            status,
            observed: truncate_chars(observed.into(), OBSERVED_MAX_CHARS),
        }
    }
}

fn truncate_chars(mut s: String, max: usize) -> String {
    if let Some((idx, _)) = s.char_indices().nth(max) {
        s.truncate(idx);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub variant_index: usize,
    pub case_results: Vec<CaseResult>,
    pub passed_all: bool,
    pub fraction_passed: f64,
    pub runtime_ms: u64,
}

impl SuiteResult {
    /// Builds a result, deriving `passed_all` and `fraction_passed` from the
    /// case statuses.
    pub fn from_cases(variant_index: usize, case_results: Vec<CaseResult>, runtime_ms: u64) -> Self {
        let passed = case_results
            .iter()
            .filter(|c| c.status == CaseStatus::Pass)
            .count();
        let total = case_results.len();
        SuiteResult {
            variant_index,
            passed_all: total > 0 && passed == total,
            fraction_passed: if total == 0 { 0.0 } else { passed as f64 / total as f64 },
            case_results,
            runtime_ms,
        }
    }

    /// Every case marked with the same status.
    pub fn uniform(variant_index: usize, cases: usize, status: CaseStatus, observed: &str) -> Self {
        Self::from_cases(
            variant_index,
            (0..cases)
                .map(|i| CaseResult::new(i, status, observed))
                .collect(),
            0,
        )
    }

    /// Scripted result where the first `passed` of `total` cases pass and the
    /// rest return a wrong value.
    pub fn with_passes(passed: usize, total: usize) -> Self {
        Self::from_cases(
            0,
            (0..total)
                .map(|i| {
                    if i < passed {
                        CaseResult::new(i, CaseStatus::Pass, "")
                    } else {
                        CaseResult::new(i, CaseStatus::WrongReturn, "scripted failure")
                    }
                })
                .collect(),
            0,
        )
    }

    pub fn passed_count(&self) -> usize {
        self.case_results
            .iter()
            .filter(|c| c.status == CaseStatus::Pass)
            .count()
    }
}

#[derive(Debug, Error)]
pub enum ExecutionError {
    #[error("runner unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no scripted result for code with hash {0}")]
    UnknownCode(String),
    #[error("test suite is empty")]
    EmptySuite,
    #[error("runner protocol violation: {0}")]
    Protocol(String),
    #[error("runner exited with status {status}: {stderr}")]
    RunnerFailed { status: String, stderr: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Something that can run code against a test suite out of process.
pub trait ExecutionBackend: Send + Sync {
    /// Runs `code` and returns one case result per test case, in order.
    /// `variant_index` of the returned result is left for the caller to set.
    fn run(
        &self,
        code: &str,
        function_name: &str,
        suite: &[TestCase],
    ) -> Result<SuiteResult, ExecutionError>;
}

impl<B: ExecutionBackend + ?Sized> ExecutionBackend for &B {
    fn run(&self, code: &str, function_name: &str, suite: &[TestCase]) -> Result<SuiteResult, ExecutionError> {
        (**self).run(code, function_name, suite)
    }
}

impl<B: ExecutionBackend + ?Sized> ExecutionBackend for Box<B> {
    fn run(&self, code: &str, function_name: &str, suite: &[TestCase]) -> Result<SuiteResult, ExecutionError> {
        (**self).run(code, function_name, suite)
    }
}

/// Runs a suite through `backend` and checks the result shape.
pub fn run_suite(
    code: &str,
    function_name: &str,
    suite: &[TestCase],
    backend: &dyn ExecutionBackend,
) -> Result<SuiteResult, ExecutionError> {
    if suite.is_empty() {
        return Err(ExecutionError::EmptySuite);
    }
    let result = backend.run(code, function_name, suite)?;
    if result.case_results.len() != suite.len() {
        return Err(ExecutionError::Protocol(format!(
            "expected {} case results, got {}",
            suite.len(),
            result.case_results.len()
        )));
    }
    if let Some((pos, c)) = result
        .case_results
        .iter()
        .enumerate()
        .find(|(pos, c)| c.case_index != *pos)
    {
        return Err(ExecutionError::Protocol(format!(
            "case result {pos} carries index {}",
            c.case_index
        )));
    }
    Ok(result)
}

/// Hex SHA-256 of a code string; the key for scripted results and records.
pub fn code_hash(code: &str) -> String {
    hex::encode(Sha256::digest(code.as_bytes()))
}

/// Backend answering from a table of scripted results keyed by [`code_hash`].
#[derive(Debug, Clone, Default)]
pub struct StubBackend {
    script: HashMap<String, SuiteResult>,
}

impl StubBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_code(mut self, code: &str, result: SuiteResult) -> Self {
        self.script.insert(code_hash(code), result);
        self
    }

    pub fn insert_hash(&mut self, hash: String, result: SuiteResult) {
        self.script.insert(hash, result);
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

pub fn stub_backend(script: HashMap<String, SuiteResult>) -> StubBackend {
    StubBackend { script }
}

impl ExecutionBackend for StubBackend {
    fn run(&self, code: &str, _function_name: &str, _suite: &[TestCase]) -> Result<SuiteResult, ExecutionError> {
        let hash = code_hash(code);
        self.script
            .get(&hash)
            .cloned()
            .ok_or(ExecutionError::UnknownCode(hash))
    }
}

/// Document written to the runner's stdin.
#[derive(Debug, Serialize)]
pub struct RunnerInput<'a> {
    pub function_name: &'a str,
    pub code: &'a str,
    pub cases: &'a [TestCase],
}

/// Document the runner writes to stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerOutput {
    pub load_error: Option<String>,
    pub results: Vec<CaseResult>,
}

/// Backend that spawns one runner process per suite.
///
/// The runner enforces per-case timeouts itself; this side only kills the
/// process once the whole run exceeds the sum of case timeouts plus
/// [`RUN_CEILING_SLACK_MS`], marking every unfinished case `Timeout`.
#[derive(Debug, Clone)]
pub struct SubprocessBackend {
    program: String,
    args: Vec<String>,
    slack: Duration,
}

impl SubprocessBackend {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        SubprocessBackend {
            program: program.into(),
            args,
            slack: Duration::from_millis(RUN_CEILING_SLACK_MS),
        }
    }

    /// Parses a whitespace-separated command line such as `python3 runner.py`.
    pub fn from_command_line(command: &str) -> Result<Self, ExecutionError> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| ExecutionError::BackendUnavailable("empty runner command".into()))?;
        Ok(Self::new(program, parts.collect()))
    }

    fn ceiling(&self, suite: &[TestCase]) -> Duration {
        Duration::from_millis(suite.iter().map(|c| c.timeout_ms).sum::<u64>()) + self.slack
    }
}

impl ExecutionBackend for SubprocessBackend {
    fn run(&self, code: &str, function_name: &str, suite: &[TestCase]) -> Result<SuiteResult, ExecutionError> {
        let input = serde_json::to_vec(&RunnerInput {
            function_name,
            code,
            cases: suite,
        })
        .map_err(|e| ExecutionError::Protocol(e.to_string()))?;

        let started = Instant::now();
        let mut command = Command::new(&self.program);
        // Own process group, so a timeout also takes down anything the
        // runner spawned.
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut command, 0);
        let mut child = command
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ExecutionError::BackendUnavailable(format!("{}: {e}", self.program)))?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = thread::spawn(move || {
            // A runner that exits early closes the pipe; that is reported
            // through its exit status, not here.
            let _ = stdin.write_all(&input);
        });
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");
        let out_reader = thread::spawn(move || read_all(stdout));
        let err_reader = thread::spawn(move || read_all(stderr));

        let deadline = started + self.ceiling(suite);
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break Some(status);
            }
            if Instant::now() >= deadline {
                kill_tree(&mut child);
                break None;
            }
            thread::sleep(Duration::from_millis(5));
        };
        let runtime_ms = started.elapsed().as_millis() as u64;
        let Some(status) = status else {
            // Pipe threads are left to finish on their own; a surviving
            // grandchild may still hold the pipes open.
            let mut r = SuiteResult::uniform(
                0,
                suite.len(),
                CaseStatus::Timeout,
                "run exceeded its wall-clock ceiling",
            );
            r.runtime_ms = runtime_ms;
            return Ok(r);
        };
        let _ = writer.join();
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(ExecutionError::RunnerFailed {
                status: status.to_string(),
                stderr: truncate_chars(String::from_utf8_lossy(&stderr).into_owned(), OBSERVED_MAX_CHARS),
            });
        }
        let output: RunnerOutput = serde_json::from_slice(&stdout)
            .map_err(|e| ExecutionError::Protocol(format!("bad runner output: {e}")))?;
        let mut result = interpret_output(output, suite.len())?;
        result.runtime_ms = runtime_ms;
        Ok(result)
    }
}

fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    if let Ok(pid) = i32::try_from(child.id()) {
        // SAFETY: plain syscall; the group was created for this child.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn read_all(mut r: impl Read) -> Vec<u8> {
    let mut buf = Vec::new();
    let _ = r.read_to_end(&mut buf);
    buf
}

/// Turns a runner document into a suite result.
pub fn interpret_output(output: RunnerOutput, cases: usize) -> Result<SuiteResult, ExecutionError> {
    if let Some(err) = output.load_error {
        return Ok(SuiteResult::uniform(0, cases, CaseStatus::LoadError, &err));
    }
    if output.results.len() != cases {
        return Err(ExecutionError::Protocol(format!(
            "runner reported {} results for {cases} cases",
            output.results.len()
        )));
    }
    let mut results = output.results;
    results.sort_by_key(|c| c.case_index);
    if results.iter().enumerate().any(|(i, c)| c.case_index != i) {
        return Err(ExecutionError::Protocol("case indices are not 0..n".into()));
    }
    let results = results
        .into_iter()
        .map(|c| CaseResult::new(c.case_index, c.status, c.observed))
        .collect();
    Ok(SuiteResult::from_cases(0, results, 0))
}
