use serde::{Deserialize, Serialize};

use crate::domain::Question;

/// Version tag recorded with every cached completion and grading record.
pub const PROMPT_VERSION: &str = "function-redefinition-v1";

const TEMPLATE_V1: &str = include_str!("../../data/prompt_function_redefinition_v1.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// A rendered prompt: a system message and a user message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatPrompt {
    pub version: &'static str,
    pub system: String,
    pub user: String,
}

impl ChatPrompt {
    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage {
                role: "system".into(),
                content: self.system.clone(),
            },
            ChatMessage {
                role: "user".into(),
                content: self.user.clone(),
            },
        ]
    }

    /// Full prompt text; this is what the cache key hashes.
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

/// Renders the generation prompt for a validated function name.
///
/// The prompt carries the name, the parameter list with annotations and the
/// author's assumptions. It never carries the question's code or reference
/// solution.
pub fn build_prompt(question: &Question, function_name: &str) -> ChatPrompt {
    let signature = question
        .params
        .iter()
        .map(|p| {
            if p.type_annotation.is_empty() {
                p.name.clone()
            } else {
                format!("{}: {}", p.name, p.type_annotation)
            }
        })
        .collect::<Vec<_>>()
        .join(", ");
    let param_list = if question.params.is_empty() {
        "(none)".to_string()
    } else {
        question
            .params
            .iter()
            .map(|p| format!("- {}: {}", p.name, p.type_annotation))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let assumptions = if question.assumptions.trim().is_empty() {
        "None."
    } else {
        question.assumptions.as_str()
    };
    let rendered = render(TEMPLATE_V1, |key| match key {
        "function_name" => Some(function_name),
        "signature" => Some(signature.as_str()),
        "param_list" => Some(param_list.as_str()),
        "assumptions" => Some(assumptions),
        _ => None,
    });
    let (system, user) = rendered
        .split_once("\n---\n")
        .expect("template has a system/user separator");
    ChatPrompt {
        version: PROMPT_VERSION,
        system: system.trim().to_string(),
        user: user.trim().to_string(),
    }
}

// Single pass, so substituted text is never re-expanded.
fn render<'a>(template: &str, lookup: impl Fn(&str) -> Option<&'a str>) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').and_then(|close| lookup(&after[..close]).map(|v| (close, v))) {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Param, TestCase};
    use serde_json::json;

    fn question(params: &[(&str, &str)], assumptions: &str) -> Question {
        Question {
            id: "q".into(),
            title: "Q".into(),
            subject_language: "python".into(),
            code: "def foo(x):\n    SECRET_BODY = 1".into(),
            params: params
                .iter()
                .map(|(n, t)| Param {
                    name: n.to_string(),
                    type_annotation: t.to_string(),
                })
                .collect(),
            assumptions: assumptions.into(),
            test_suite: vec![TestCase::returning(vec![json!(1)], json!(1))],
            reference_solution: "def foo(x):\n    REFERENCE_BODY = 2".into(),
        }
    }

    #[test]
    fn signature_and_name() {
        let p = build_prompt(&question(&[("x", "List[int]")], ""), "count_odd_nums");
        assert!(p.user.contains("def count_odd_nums(x: List[int]):"));
        assert!(p.user.contains("- x: List[int]"));
        assert!(p.user.contains("None."));
        assert!(p.system.contains("fenced"));
        assert_eq!(p.version, PROMPT_VERSION);
    }

    #[test]
    fn lists_every_param_and_assumptions_verbatim() {
        let p = build_prompt(
            &question(&[("x", "List[int]"), ("t", "int")], "x may be empty; {function_name} stays literal"),
            "less_than_t",
        );
        assert!(p.user.contains("def less_than_t(x: List[int], t: int):"));
        assert!(p.user.contains("- t: int"));
        assert!(p.user.contains("x may be empty; {function_name} stays literal"));
    }

    #[test]
    fn never_leaks_code() {
        let p = build_prompt(&question(&[("x", "int")], ""), "f").text();
        assert!(!p.contains("SECRET_BODY"));
        assert!(!p.contains("REFERENCE_BODY"));
    }
}
