//! Prompt templates: one per prompting level, stored as plain text with
//! `[[persona]]`, `[[task]]`, `[[output_schema]]` and `[[input]]` sections
//! and `{{slot}}` placeholders.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use super::GatewayError;

pub const DEFAULT_PROMPT_BUDGET: usize = 48_000;

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PromptLevel {
    Modularize,
    Extract,
    Refine,
    Generate,
}

impl PromptLevel {
    pub const ALL: [PromptLevel; 4] = [
        PromptLevel::Modularize,
        PromptLevel::Extract,
        PromptLevel::Refine,
        PromptLevel::Generate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PromptLevel::Modularize => "modularize",
            PromptLevel::Extract => "extract",
            PromptLevel::Refine => "refine",
            PromptLevel::Generate => "generate",
        }
    }

    /// Slots the level's template must reference.
    pub fn required_slots(&self) -> &'static [&'static str] {
        match self {
            PromptLevel::Modularize => &["scenario_text", "urls"],
            PromptLevel::Extract | PromptLevel::Refine => &["module_json", "pruned_html"],
            PromptLevel::Generate => &["spec_json"],
        }
    }

    fn default_text(&self) -> &'static str {
        match self {
            PromptLevel::Modularize => include_str!("../../assets/prompts/modularize.txt"),
            PromptLevel::Extract => include_str!("../../assets/prompts/extract.txt"),
            PromptLevel::Refine => include_str!("../../assets/prompts/refine.txt"),
            PromptLevel::Generate => include_str!("../../assets/prompts/generate.txt"),
        }
    }
}

impl fmt::Display for PromptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const KNOWN_SLOTS: &[&str] = &["scenario_text", "urls", "module_json", "pruned_html", "spec_json"];

/// Slot truncated first when a rendered prompt exceeds its budget.
const ELASTIC_SLOT: &str = "pruned_html";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub level: PromptLevel,
    pub persona: String,
    pub task_instructions: String,
    pub output_schema: String,
    pub input: String,
    pub placeholders: BTreeSet<String>,
}

fn placeholders_in(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                out.insert(after[..end].trim().to_string());
                rest = &after[end + 2..];
            }
            None => break,
        }
    }
    out
}

/// Literal single-pass substitution; substituted text is never rescanned.
fn substitute(text: &str, bindings: &Bindings) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = after[..end].trim();
                match bindings.get(name) {
                    Some(v) => out.push_str(v),
                    None => out.push_str(&rest[start..start + 2 + end + 2]),
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

impl PromptTemplate {
    pub fn parse(level: PromptLevel, text: &str) -> Result<Self, GatewayError> {
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<String> = None;
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.starts_with("[[") && trimmed.ends_with("]]") && trimmed.len() > 4 {
                let name = trimmed[2..trimmed.len() - 2].trim().to_ascii_lowercase();
                if sections.contains_key(&name) {
                    return Err(GatewayError::Template(format!("{level}: duplicate section [[{name}]]")));
                }
                sections.insert(name.clone(), String::new());
                current = Some(name);
                continue;
            }
            match &current {
                Some(name) => {
                    let body = sections.get_mut(name).expect("section inserted above");
                    body.push_str(line);
                    body.push('\n');
                }
                None if trimmed.is_empty() => {}
                None => {
                    return Err(GatewayError::Template(format!(
                        "{level}: text before the first section"
                    )))
                }
            }
        }
        let mut take = |name: &str| sections.remove(name).map(|s| s.trim().to_string()).unwrap_or_default();
        let persona = take("persona");
        let task_instructions = take("task");
        let output_schema = take("output_schema");
        let input = take("input");
        if let Some(unknown) = sections.keys().next() {
            return Err(GatewayError::Template(format!("{level}: unknown section [[{unknown}]]")));
        }
        let mut placeholders = BTreeSet::new();
        for part in [&persona, &task_instructions, &output_schema, &input] {
            placeholders.extend(placeholders_in(part));
        }
        Ok(PromptTemplate {
            level,
            persona,
            task_instructions,
            output_schema,
            input,
            placeholders,
        })
    }

    pub fn default_for(level: PromptLevel) -> Self {
        Self::parse(level, level.default_text()).expect("bundled templates parse")
    }

    pub fn render(&self, bindings: &Bindings, budget: usize) -> Result<RenderedPrompt, GatewayError> {
        for slot in &self.placeholders {
            if !bindings.contains_key(slot) {
                return Err(GatewayError::MissingSlot(slot.clone()));
            }
        }
        let mut rendered = self.render_unchecked(bindings);
        let len = rendered.char_len();
        if len > budget {
            log::warn!(
                "{} prompt is {len} characters, over the {budget}-character budget",
                self.level
            );
            if let Some(html) = bindings.get(ELASTIC_SLOT).filter(|_| self.placeholders.contains(ELASTIC_SLOT)) {
                let html_len = html.chars().count();
                let excess = len - budget;
                let keep = html_len.saturating_sub(excess);
                let mut shortened = bindings.clone();
                shortened.insert(ELASTIC_SLOT.to_string(), html.chars().take(keep).collect());
                let removed = html_len - keep;
                rendered = self.render_unchecked(&shortened);
                rendered.truncated_chars = removed;
                log::warn!("dropped the last {removed} characters of page HTML from the {} prompt", self.level);
            }
            if rendered.char_len() > budget {
                log::warn!("{} prompt instructions alone exceed the budget; sent as is", self.level);
            }
        }
        Ok(rendered)
    }

    fn render_unchecked(&self, bindings: &Bindings) -> RenderedPrompt {
        let mut r = RenderedPrompt {
            level: self.level,
            persona: substitute(&self.persona, bindings),
            task: substitute(&self.task_instructions, bindings),
            output_schema: substitute(&self.output_schema, bindings),
            input: substitute(&self.input, bindings),
            length: 0,
            truncated_chars: 0,
        };
        r.length = r.text().chars().count();
        r
    }

    /// Checks the content rules every template must satisfy.
    pub fn lint(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.persona.is_empty() {
            problems.push("persona section is empty".to_string());
        } else if !self.persona.to_ascii_lowercase().starts_with("you are") {
            problems.push("persona should assign a role (\"You are ...\")".to_string());
        }
        if self.task_instructions.is_empty() {
            problems.push("task section is empty".to_string());
        }
        if self.output_schema.is_empty() {
            problems.push("output_schema section is empty".to_string());
        }
        for slot in self.level.required_slots() {
            if !self.placeholders.contains(*slot) {
                problems.push(format!("required slot {{{{{slot}}}}} is not referenced"));
            }
        }
        for slot in &self.placeholders {
            if !KNOWN_SLOTS.contains(&slot.as_str()) {
                problems.push(format!("unknown slot {{{{{slot}}}}}"));
            }
        }
        // zero-shot: no worked examples
        for part in [&self.persona, &self.task_instructions, &self.output_schema, &self.input] {
            for line in part.lines() {
                let l = line.trim().to_ascii_lowercase();
                if l.starts_with("example:") || l.starts_with("examples:") || l.starts_with("example output")
                    || l.starts_with("example input")
                {
                    problems.push(format!("worked example found: '{}'", line.trim()));
                }
            }
        }
        problems
    }
}

/// Renders with the default budget.
pub fn render_prompt(template: &PromptTemplate, bindings: &Bindings) -> Result<RenderedPrompt, GatewayError> {
    template.render(bindings, DEFAULT_PROMPT_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub level: PromptLevel,
    pub persona: String,
    pub task: String,
    pub output_schema: String,
    pub input: String,
    /// Length of [`RenderedPrompt::text`] in characters.
    pub length: usize,
    /// Characters cut from the page HTML to respect the budget.
    pub truncated_chars: usize,
}

impl RenderedPrompt {
    pub fn text(&self) -> String {
        [&self.persona, &self.task, &self.output_schema, &self.input]
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn char_len(&self) -> usize {
        self.length
    }
}

/// The four templates a pipeline run uses.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<PromptLevel, PromptTemplate>,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            templates: PromptLevel::ALL
                .iter()
                .map(|&l| (l, PromptTemplate::default_for(l)))
                .collect(),
        }
    }
}

impl PromptSet {
    pub fn get(&self, level: PromptLevel) -> &PromptTemplate {
        &self.templates[&level]
    }

    pub fn set(&mut self, template: PromptTemplate) {
        self.templates.insert(template.level, template);
    }

    pub fn load_override(&mut self, level: PromptLevel, path: &Path) -> Result<(), GatewayError> {
        let text = fs::read_to_string(path)
            .map_err(|e| GatewayError::Template(format!("{}: {e}", path.display())))?;
        let template = PromptTemplate::parse(level, &text)?;
        let problems = template.lint();
        if !problems.is_empty() {
            return Err(GatewayError::Template(format!(
                "{}: {}",
                path.display(),
                problems.join("; ")
            )));
        }
        self.set(template);
        Ok(())
    }
}
