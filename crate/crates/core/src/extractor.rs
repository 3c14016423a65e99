//! Level 2: per-module element extraction, refinement, selector ranking and
//! validation against the page.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde_json::Value;
use thiserror::Error;

use crate::crawler::PageSnapshot;
use crate::gateway::{extract_json, Bindings, Gateway, GatewayError, PromptLevel, Transcript};
use crate::model::{normalize_step, parse_step, ExecutionStep, IdentifierType, PageModule, UiElementRef};
use crate::selector::xpath::{Condition, Predicate};
use crate::selector::{check_locator, classify, parse_html, parse_xpath, Dom, MatchClass};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("model output is not a valid module: {reason}")]
    LlmOutputInvalid { reason: String, raw: String },
    #[error("model changed the module's steps: {0}")]
    StepMismatch(String),
    #[error("module URL {module} does not match snapshot URL {snapshot}")]
    UrlMismatch { module: String, snapshot: String },
    #[error("module already has extracted elements")]
    NotLevel1,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn same_url(a: &str, b: &str) -> bool {
    a.trim().trim_end_matches('/') == b.trim().trim_end_matches('/')
}

pub fn module_bindings(module: &PageModule, snapshot: &PageSnapshot) -> Bindings {
    let mut b = Bindings::new();
    b.insert(
        "module_json".into(),
        serde_json::to_string_pretty(module).expect("module serializes"),
    );
    b.insert("pruned_html".into(), snapshot.pruned_html.clone());
    b
}

/// Finds the step list in the shapes models answer with: a module object,
/// a `modules` wrapper, or a bare step array.
fn response_steps<'a>(value: &'a Value, url: &str) -> Option<&'a Vec<Value>> {
    match value {
        Value::Array(items) if items.iter().all(|i| i.get("step").is_some()) => Some(items),
        Value::Array(items) if items.len() == 1 => response_steps(&items[0], url),
        Value::Object(map) => {
            if let Some(Value::Array(steps)) = map.get("execution_steps") {
                return Some(steps);
            }
            for key in ["modules", "module"] {
                match map.get(key) {
                    Some(Value::Array(modules)) => {
                        let chosen = modules
                            .iter()
                            .find(|m| m.get("url").and_then(Value::as_str).is_some_and(|u| same_url(u, url)))
                            .or_else(|| (modules.len() == 1).then(|| &modules[0]))?;
                        return response_steps(chosen, url);
                    }
                    Some(inner @ Value::Object(_)) => return response_steps(inner, url),
                    _ => {}
                }
            }
            None
        }
        _ => None,
    }
}

/// Merges the model's answer into `module`: the step texts must be the
/// module's own, in order; only `extracted_data` is taken from the answer.
pub fn merge_response(module: &PageModule, raw: &str) -> Result<PageModule, ExtractError> {
    let invalid = |reason: String| ExtractError::LlmOutputInvalid {
        reason,
        raw: raw.to_string(),
    };
    let value = extract_json(raw).map_err(|e| invalid(e.to_string()))?;
    let steps_json =
        response_steps(&value, &module.url).ok_or_else(|| invalid("no execution_steps in response".into()))?;
    let steps: Vec<ExecutionStep> = steps_json
        .iter()
        .enumerate()
        .map(|(i, v)| parse_step(v, format!("$.execution_steps[{i}]")))
        .collect::<Result<_, _>>()
        .map_err(|e| invalid(e.to_string()))?;
    if steps.len() != module.execution_steps.len() {
        return Err(ExtractError::StepMismatch(format!(
            "expected {} steps, got {}",
            module.execution_steps.len(),
            steps.len()
        )));
    }
    let mut out = module.clone();
    for (i, (mine, theirs)) in out.execution_steps.iter_mut().zip(steps).enumerate() {
        if normalize_step(&mine.step) != normalize_step(&theirs.step) {
            return Err(ExtractError::StepMismatch(format!(
                "step {i} is '{}', answer has '{}'",
                mine.step, theirs.step
            )));
        }
        mine.extracted_data = theirs.extracted_data;
    }
    Ok(out)
}

/// One Extract call for the module against its page.
pub fn extract_elements(
    module: &PageModule,
    snapshot: &PageSnapshot,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<PageModule, ExtractError> {
    if !same_url(&module.url, &snapshot.url) {
        return Err(ExtractError::UrlMismatch {
            module: module.url.clone(),
            snapshot: snapshot.url.clone(),
        });
    }
    if module.element_count() > 0 {
        return Err(ExtractError::NotLevel1);
    }
    let raw = gateway.ask(PromptLevel::Extract, &module_bindings(module, snapshot), transcript)?;
    merge_response(module, &raw)
}

/// How a locator ties itself to the page, best first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SelectorClass {
    IdAnchored,
    AttributePredicate,
    TextContains,
    Positional,
    Unparseable,
}

pub fn selector_class(element: &UiElementRef) -> SelectorClass {
    let expr = element.identifier_tracking.trim();
    match element.identifier_type {
        IdentifierType::Id => SelectorClass::IdAnchored,
        IdentifierType::Css => {
            if check_locator(IdentifierType::Css, expr).is_err() {
                SelectorClass::Unparseable
            } else if expr.contains(":nth-") {
                SelectorClass::Positional
            } else if expr.contains('#') {
                SelectorClass::IdAnchored
            } else if expr.contains('[') {
                SelectorClass::AttributePredicate
            } else {
                SelectorClass::Positional
            }
        }
        IdentifierType::XPath => {
            let Ok(parsed) = parse_xpath(expr) else {
                return SelectorClass::Unparseable;
            };
            let predicates = || parsed.steps.iter().flat_map(|s| s.predicates.iter());
            let conditions = || {
                predicates().flat_map(|p| match p {
                    Predicate::All(c) => c.as_slice(),
                    Predicate::Position(_) => &[],
                })
            };
            let last_bare = parsed.steps.last().is_some_and(|s| s.predicates.is_empty());
            if last_bare || predicates().any(|p| matches!(p, Predicate::Position(_))) {
                SelectorClass::Positional
            } else if conditions().any(|c| matches!(c, Condition::AttrEquals { name, .. } if name == "id")) {
                SelectorClass::IdAnchored
            } else if conditions().any(|c| !matches!(c, Condition::TextContains(_))) {
                SelectorClass::AttributePredicate
            } else {
                SelectorClass::TextContains
            }
        }
    }
}

/// Preference order between two locators; `Less` means `a` is preferred.
pub fn rank_selector(a: &UiElementRef, b: &UiElementRef) -> Ordering {
    let (ea, eb) = (a.identifier_tracking.trim(), b.identifier_tracking.trim());
    selector_class(a)
        .cmp(&selector_class(b))
        .then_with(|| ea.chars().count().cmp(&eb.chars().count()))
        .then_with(|| ea.cmp(eb))
}

fn dedup_key(e: &UiElementRef) -> (String, String) {
    (
        e.element_type.as_str().to_ascii_lowercase(),
        e.request_description.split_whitespace().collect::<Vec<_>>().join(" "),
    )
}

/// Keeps the best-ranked entry of each (type, description) group in place
/// of the group's first entry.
pub fn dedup_step(elements: Vec<UiElementRef>) -> Vec<UiElementRef> {
    let mut slot_of: HashMap<(String, String), usize> = HashMap::new();
    let mut out: Vec<UiElementRef> = Vec::new();
    for e in elements {
        match slot_of.get(&dedup_key(&e)) {
            Some(&slot) => {
                if rank_selector(&e, &out[slot]) == Ordering::Less {
                    out[slot] = e;
                }
            }
            None => {
                slot_of.insert(dedup_key(&e), out.len());
                out.push(e);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    Matched(MatchClass),
    /// CSS locators are not evaluated.
    Unchecked,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Matched(m) => m.fmt(f),
            Classification::Unchecked => f.write_str("Unchecked"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationRow {
    pub module: usize,
    pub step: usize,
    pub identifier_type: IdentifierType,
    pub expression: String,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedSelector {
    pub module: usize,
    pub step: usize,
    pub expression: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub rejected: Vec<RejectedSelector>,
}

impl ValidationReport {
    /// Appends another module's report with its module index rewritten.
    pub fn extend_module(&mut self, module: usize, other: ValidationReport) {
        self.rows.extend(other.rows.into_iter().map(|r| ValidationRow { module, ..r }));
        self.rejected
            .extend(other.rejected.into_iter().map(|r| RejectedSelector { module, ..r }));
    }

    pub fn count(&self, pred: impl Fn(&Classification) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.classification)).count()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["module", "step", "expression", "classification"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.module.to_string(),
                r.step.to_string(),
                r.expression.clone(),
                r.classification.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn id_xpath(id: &str) -> Option<String> {
    if !id.contains('\'') {
        Some(format!("//*[@id='{id}']"))
    } else if !id.contains('"') {
        Some(format!("//*[@id=\"{id}\"]"))
    } else {
        None
    }
}

pub fn classify_element(element: &UiElementRef, dom: &Dom) -> Classification {
    let expr = element.identifier_tracking.trim();
    let xpath = match element.identifier_type {
        IdentifierType::XPath => Some(expr.to_string()),
        IdentifierType::Id => id_xpath(expr),
        IdentifierType::Css => None,
    };
    match xpath.map(|x| parse_xpath(&x)) {
        Some(Ok(parsed)) => Classification::Matched(classify(&parsed, dom)),
        _ => Classification::Unchecked,
    }
}

/// Deterministic refinement: dedup per step, drop locators that fail their
/// syntax check, classify the survivors against the page.
pub fn postprocess_module(module: &PageModule, dom: &Dom) -> (PageModule, ValidationReport) {
    let mut out = module.clone();
    let mut report = ValidationReport::default();
    for (si, step) in out.execution_steps.iter_mut().enumerate() {
        let mut kept = Vec::new();
        for e in dedup_step(std::mem::take(&mut step.extracted_data)) {
            match check_locator(e.identifier_type, &e.identifier_tracking) {
                Ok(()) => kept.push(e),
                Err(reason) => {
                    log::warn!("dropping locator '{}': {reason}", e.identifier_tracking);
                    report.rejected.push(RejectedSelector {
                        module: 0,
                        step: si,
                        expression: e.identifier_tracking.clone(),
                        reason,
                    });
                }
            }
        }
        for e in &kept {
            report.rows.push(ValidationRow {
                module: 0,
                step: si,
                identifier_type: e.identifier_type,
                expression: e.identifier_tracking.trim().to_string(),
                classification: classify_element(e, dom),
            });
        }
        step.extracted_data = kept;
    }
    (out, report)
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub module: PageModule,
    /// Rows carry module index 0; see [`ValidationReport::extend_module`].
    pub report: ValidationReport,
    pub warnings: Vec<String>,
}

/// One Refine call, then the deterministic pass. An unusable answer falls
/// back to the deterministic pass alone; gateway failures propagate.
pub fn refine_elements(
    module: &PageModule,
    snapshot: &PageSnapshot,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<RefineOutcome, ExtractError> {
    let mut warnings = Vec::new();
    let dom = parse_html(&snapshot.raw_html);
    if module.element_count() == 0 {
        let (module, report) = postprocess_module(module, &dom);
        return Ok(RefineOutcome {
            module,
            report,
            warnings,
        });
    }
    let raw = gateway.ask(PromptLevel::Refine, &module_bindings(module, snapshot), transcript)?;
    let refined = match merge_response(module, &raw) {
        Ok(m) => m,
        Err(e) => {
            let msg = format!("refinement of {} unusable ({e}); keeping extracted elements", module.url);
            log::warn!("{msg}");
            warnings.push(msg);
            module.clone()
        }
    };
    let (module, report) = postprocess_module(&refined, &dom);
    Ok(RefineOutcome {
        module,
        report,
        warnings,
    })
}
