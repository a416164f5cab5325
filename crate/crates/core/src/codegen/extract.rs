use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractError {
    #[error("no function definition found in the model output")]
    NoCode,
    #[error("model defined `{found}` instead of `{requested}`")]
    NameMismatch { requested: String, found: String },
}

/// Pulls candidate code out of a completion.
///
/// Takes the body of the first fenced block (or the whole output if there is
/// none) and requires a top-level `def` with the requested name. Leading
/// blank lines and trailing whitespace are dropped, which makes the function
/// idempotent on its own output.
pub fn extract_code(raw_output: &str, function_name: &str) -> Result<String, ExtractError> {
    let body = first_fenced_block(raw_output).unwrap_or(raw_output);
    let code = normalize(body);

    let mut any_def = None;
    for line in code.lines() {
        let top_level = !line.starts_with(char::is_whitespace);
        if let Some(name) = def_name(line.trim_start()) {
            if top_level && name == function_name {
                return Ok(code);
            }
            any_def.get_or_insert(name.to_string());
        }
    }
    match any_def {
        Some(found) => Err(ExtractError::NameMismatch {
            requested: function_name.to_string(),
            found,
        }),
        None => Err(ExtractError::NoCode),
    }
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn first_fenced_block(text: &str) -> Option<&str> {
    let mut offset = 0;
    let mut start = None;
    for line in text.split_inclusive('\n') {
        let next = offset + line.len();
        match start {
            None if is_fence(line) => start = Some(next),
            Some(s) if is_fence(line) => return Some(&text[s..offset]),
            _ => {}
        }
        offset = next;
    }
    // An unterminated fence runs to the end of the output.
    start.map(|s| &text[s.min(text.len())..])
}

fn normalize(code: &str) -> String {
    let mut lines: Vec<&str> = code.lines().collect();
    let first = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(lines.len());
    lines.drain(..first);
    lines.join("\n").trim_end().to_string()
}

fn def_name(line: &str) -> Option<&str> {
    let rest = line
        .strip_prefix("async ")
        .map(str::trim_start)
        .unwrap_or(line)
        .strip_prefix("def ")?
        .trim_start();
    let end = rest.find(|c: char| !(c.is_alphanumeric() || c == '_'))?;
    rest[end..].trim_start().starts_with('(').then(|| &rest[..end])
}
