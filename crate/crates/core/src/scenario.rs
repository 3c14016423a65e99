//! Plain-text scenario files: a `urls = [...]` line, a title line and
//! numbered steps, in either order of the first two.

use thiserror::Error;

use crate::model::{SpecError, TestScenario};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("scenario has no {0}")]
    Missing(&'static str),
    #[error(transparent)]
    Invalid(#[from] SpecError),
}

fn parse_urls(rest: &str, line: usize) -> Result<Vec<String>, ScenarioError> {
    let rest = rest.trim();
    if rest.starts_with('[') {
        let value: Vec<String> = serde_json::from_str(rest).or_else(|_| {
            // tolerate single-quoted Python-style lists
            serde_json::from_str(&rest.replace('\'', "\""))
        }).map_err(|e| ScenarioError::Syntax {
            line,
            reason: format!("urls must be a list of strings ({e})"),
        })?;
        Ok(value)
    } else {
        Ok(rest
            .split(',')
            .map(|s| s.trim().trim_matches(|c| c == '"' || c == '\'').to_string())
            .filter(|s| !s.is_empty())
            .collect())
    }
}

fn strip_step_number(line: &str) -> Option<&str> {
    let digits = line.find(|c: char| !c.is_ascii_digit())?;
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    Some(rest.trim())
}

fn strip_title_prefix(line: &str) -> &str {
    // "Test Case 1: Title" -> "Title"
    let lower = line.to_ascii_lowercase();
    if lower.starts_with("test case") {
        if let Some(colon) = line.find(':') {
            return line[colon + 1..].trim();
        }
    }
    line.trim()
}

pub fn parse_scenario(text: &str) -> Result<TestScenario, ScenarioError> {
    let mut urls = None;
    let mut title = None;
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("urls") && line[4..].trim_start().starts_with('=') {
            let eq = line.find('=').unwrap_or(4);
            urls = Some(parse_urls(&line[eq + 1..], line_no)?);
        } else if let Some(step) = strip_step_number(line) {
            if step.is_empty() {
                return Err(ScenarioError::Syntax {
                    line: line_no,
                    reason: "empty step".into(),
                });
            }
            steps.push(step.to_string());
        } else if title.is_none() && steps.is_empty() {
            title = Some(strip_title_prefix(line).to_string());
        } else if let Some(last) = steps.last_mut() {
            // continuation of a wrapped step
            last.push(' ');
            last.push_str(line);
        } else {
            return Err(ScenarioError::Syntax {
                line: line_no,
                reason: format!("unexpected line '{line}'"),
            });
        }
    }
    let urls = urls.ok_or(ScenarioError::Missing("urls line"))?;
    let title = title.ok_or(ScenarioError::Missing("title"))?;
    if steps.is_empty() {
        return Err(ScenarioError::Missing("numbered steps"));
    }
    Ok(TestScenario::new(title, urls, steps)?)
}

/// Canonical text form of a scenario, used as the modularization prompt input.
pub fn render_scenario(scenario: &TestScenario) -> String {
    let mut out = String::new();
    out.push_str("urls = ");
    out.push_str(&serde_json::to_string(&scenario.urls).expect("strings serialize"));
    out.push('\n');
    out.push_str("Test Case: ");
    out.push_str(&scenario.title);
    out.push('\n');
    for (i, s) in scenario.steps.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, s));
    }
    out
}

/// Lowercase ASCII slug of a title: runs of non-alphanumerics become one `-`.
pub fn slugify(title: &str) -> String {
    let mut out = String::with_capacity(title.len());
    let mut dash = false;
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            if dash && !out.is_empty() {
                out.push('-');
            }
            dash = false;
            out.push(c.to_ascii_lowercase());
        } else {
            dash = true;
        }
    }
    if out.is_empty() {
        out.push_str("case");
    }
    out
}
