//! Level 3: the Generate prompt, plus parsing and linting of its output.

pub mod lint;
pub mod robot;

pub use lint::{error_count, lint, LintFinding, RuleId, Severity, Whitelist};
pub use robot::{emit_robot, normalize_whitespace, parse_robot, ParseError, RobotScript};

use thiserror::Error;

use crate::gateway::{Bindings, Gateway, GatewayError, PromptLevel, Transcript};
use crate::model::{serialize_specification, TestSpecification};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("model returned no script")]
    LlmOutputInvalid { raw: String },
    #[error("generated script is invalid at line {line}: {reason}")]
    ScriptInvalid { line: usize, reason: String, raw: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone)]
pub struct GeneratedScript {
    /// UTF-8 with LF line endings and a final newline.
    pub text: String,
    pub script: RobotScript,
}

pub fn generate_bindings(spec: &TestSpecification) -> Bindings {
    let mut b = Bindings::new();
    b.insert("spec_json".into(), serialize_specification(spec));
    b
}

/// Removes one Markdown fence that wraps the whole response.
pub fn strip_fence(text: &str) -> &str {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        if let Some(body) = rest.strip_suffix("```") {
            return match body.find('\n') {
                Some(nl) => &body[nl + 1..],
                None => body,
            };
        }
    }
    text
}

/// Checks a model response and normalizes its line endings.
pub fn accept_script(raw: &str) -> Result<GeneratedScript, ScriptError> {
    let body = strip_fence(raw);
    if body.trim().is_empty() {
        return Err(ScriptError::LlmOutputInvalid { raw: raw.to_string() });
    }
    let mut text = body.replace("\r\n", "\n").trim_matches('\n').to_string();
    text.push('\n');
    let invalid = |line: usize, reason: String| ScriptError::ScriptInvalid {
        line,
        reason,
        raw: raw.to_string(),
    };
    let script = parse_robot(&text).map_err(|e| invalid(e.line, e.reason))?;
    if !script.sections.iter().any(|h| h.kind == robot::SectionKind::Settings) {
        return Err(invalid(0, "missing *** Settings *** section".into()));
    }
    if !script.has_library("SeleniumLibrary") {
        return Err(invalid(0, "Settings do not import SeleniumLibrary".into()));
    }
    if script.test_cases.is_empty() {
        return Err(invalid(0, "no test case".into()));
    }
    Ok(GeneratedScript { text, script })
}

pub fn generate_script(
    spec: &TestSpecification,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<GeneratedScript, ScriptError> {
    let raw = gateway.ask(PromptLevel::Generate, &generate_bindings(spec), transcript)?;
    accept_script(&raw)
}
