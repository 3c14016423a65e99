//! Level 1: splits a scenario into page modules, through the model or through
//! a deterministic rule-based splitter.

use thiserror::Error;

use crate::gateway::{extract_json, Bindings, Gateway, GatewayError, PromptLevel, Transcript};
use crate::model::{
    mentioned_url, normalize_step, specification_from_value, validate_boundaries, ExecutionStep, PageModule, SpecError,
    TestScenario, TestSpecification, Violation,
};
use crate::scenario::render_scenario;

#[derive(Debug, Error)]
pub enum ModularizeError {
    /// The response could not be turned into a Level-1 specification.
    #[error("model output is not a valid Level-1 specification: {reason}")]
    LlmOutputInvalid { reason: String, raw: String },
    #[error("specification violates the scenario: {}", join_violations(.0))]
    Boundary(Vec<Violation>),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error(transparent)]
    Scenario(SpecError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl ModularizeError {
    /// Raw model response, when the failure happened after a response arrived.
    pub fn raw_response(&self) -> Option<&str> {
        match self {
            ModularizeError::LlmOutputInvalid { raw, .. } => Some(raw),
            _ => None,
        }
    }
}

pub fn modularize_bindings(scenario: &TestScenario) -> Bindings {
    let urls = scenario
        .urls
        .iter()
        .enumerate()
        .map(|(i, u)| format!("{}. {u}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let mut b = Bindings::new();
    b.insert("scenario_text".into(), render_scenario(scenario).trim_end().to_string());
    b.insert("urls".into(), urls);
    b
}

/// Checks a Level-1 response and turns it into a specification.
pub fn accept_level1(raw: &str, scenario: &TestScenario) -> Result<TestSpecification, ModularizeError> {
    let invalid = |reason: String| ModularizeError::LlmOutputInvalid {
        reason,
        raw: raw.to_string(),
    };
    let value = extract_json(raw).map_err(|e| invalid(e.to_string()))?;
    let spec = match specification_from_value(&value) {
        Ok(spec) => spec,
        Err(SpecError::Boundary(v)) => return Err(ModularizeError::Boundary(v)),
        Err(e) => return Err(invalid(e.to_string())),
    };
    if !spec.is_level1() {
        return Err(invalid("extracted_data must be empty at Level 1".into()));
    }
    let violations = validate_boundaries(&spec, scenario);
    if !violations.is_empty() {
        return Err(ModularizeError::Boundary(violations));
    }
    Ok(spec)
}

/// One model call for the whole scenario; the answer must pass boundary
/// validation as is.
pub fn modularize(
    scenario: &TestScenario,
    gateway: &Gateway,
    transcript: &Transcript,
) -> Result<TestSpecification, ModularizeError> {
    scenario.validate().map_err(ModularizeError::Scenario)?;
    let raw = gateway
        .ask(PromptLevel::Modularize, &modularize_bindings(scenario), transcript)
        .map_err(ModularizeError::Gateway)?;
    accept_level1(&raw, scenario)
}

#[derive(Debug, Clone)]
pub struct BaselineOptions {
    /// Lowercase phrases that open a new module wherever they occur.
    pub navigation_phrases: Vec<String>,
    /// Lowercase verbs of a step that may leave the page by naming the next URL.
    pub transition_verbs: Vec<String>,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            navigation_phrases: vec!["navigate to".into()],
            transition_verbs: ["click", "press", "tap", "submit", "follow"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub spec: TestSpecification,
    pub warnings: Vec<String>,
}

pub fn baseline_modularize(scenario: &TestScenario) -> TestSpecification {
    baseline_modularize_with(scenario, &BaselineOptions::default()).spec
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Tokens of the last non-empty path segment; empty for a bare host.
fn url_tokens(raw: &str) -> Vec<String> {
    match url::Url::parse(raw) {
        Ok(u) => {
            let segment = u.path_segments().and_then(|s| s.filter(|p| !p.is_empty()).last());
            match segment {
                Some(seg) => tokens(seg),
                None => Vec::new(),
            }
        }
        Err(_) => Vec::new(),
    }
}

/// Rule-based splitter. A module opens at every step that contains a
/// scenario URL or a navigation phrase, and closes after a transition-verb
/// step whose words name the next unused URL.
pub fn baseline_modularize_with(scenario: &TestScenario, options: &BaselineOptions) -> BaselineOutcome {
    let mut warnings = Vec::new();
    let urls: Vec<&str> = scenario.urls.iter().map(String::as_str).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut close_after_current = false;
    let mut used = vec![false; urls.len()];
    let next_unused = |used: &[bool]| used.iter().position(|u| !u);

    for (i, step) in scenario.steps.iter().enumerate() {
        let lower = step.to_lowercase();
        let names_url = mentioned_url(step, urls.iter().copied());
        let navigates = names_url.is_some() || options.navigation_phrases.iter().any(|p| lower.contains(p.as_str()));
        if groups.is_empty() || navigates || close_after_current {
            groups.push(Vec::new());
        }
        close_after_current = false;
        groups.last_mut().expect("group opened").push(i);

        let module_index = groups.len() - 1;
        if let Some(u) = names_url {
            if let Some(k) = urls.iter().position(|x| *x == u) {
                used[k] = true;
            }
        } else if groups.last().is_some_and(|g| g.len() == 1) && module_index < urls.len() {
            used[module_index] = true;
        }

        let step_tokens = tokens(step);
        let is_transition = step_tokens
            .first()
            .is_some_and(|t| options.transition_verbs.iter().any(|v| v == t));
        if is_transition && i + 1 < scenario.steps.len() {
            if let Some(k) = next_unused(&used) {
                let target = url_tokens(urls[k]);
                if !target.is_empty() && target.iter().all(|t| step_tokens.contains(t)) {
                    close_after_current = true;
                }
            }
        }
    }

    let mut modules = Vec::with_capacity(groups.len());
    for (mi, group) in groups.iter().enumerate() {
        let first = &scenario.steps[group[0]];
        let url = match mentioned_url(first, urls.iter().copied()) {
            Some(u) => u.to_string(),
            None => {
                if mi >= urls.len() {
                    let msg = format!(
                        "module {mi} has no URL of its own; reusing the last scenario URL {}",
                        urls[urls.len() - 1]
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                urls[mi.min(urls.len() - 1)].to_string()
            }
        };
        let steps = group
            .iter()
            .map(|&si| ExecutionStep::new(scenario.steps[si].clone()))
            .collect();
        modules.push(PageModule::new(url, "auto", steps));
    }
    let spec = TestSpecification::new(scenario.title.clone(), modules);
    debug_assert!(validate_boundaries(&spec, scenario).is_empty());
    BaselineOutcome { spec, warnings }
}

/// Steps of `spec` in order, normalized; used to compare partitions.
pub fn step_partition(spec: &TestSpecification) -> Vec<Vec<String>> {
    spec.modules
        .iter()
        .map(|m| m.execution_steps.iter().map(|s| normalize_step(&s.step)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewaySettings, PromptSet, TranscriptEntry};
    use crate::model::{parse_specification, ViolationKind};

    fn login_scenario() -> TestScenario {
        TestScenario::new(
            "Login User with incorrect email and password",
            vec![
                "http://automationexercise.com".into(),
                "https://automationexercise.com/login".into(),
            ],
            vec![
                "Launch browser and navigate to url 'http://automationexercise.com'".into(),
                "Click on 'Signup / Login' button".into(),
                "Enter incorrect email address and password".into(),
                "Click 'login' button".into(),
                "Verify error 'Your email or password is incorrect!' is visible".into(),
            ],
        )
        .unwrap()
    }

    fn replaying(scenario: &TestScenario, response: &str) -> (Gateway, Transcript) {
        let g = Gateway::offline(GatewaySettings::default(), PromptSet::default());
        let prompt = g.render(PromptLevel::Modularize, &modularize_bindings(scenario)).unwrap();
        let fp = g.build_request(&prompt).fingerprint();
        let t = Transcript::replay(vec![TranscriptEntry {
            fingerprint: fp,
            response: response.into(),
        }])
        .unwrap();
        (g, t)
    }

    #[test]
    fn baseline_matches_login_partition() {
        let spec = baseline_modularize(&login_scenario());
        let expected = parse_specification(crate::model::tests::LOGIN_LEVEL1).unwrap();
        assert_eq!(step_partition(&spec), step_partition(&expected));
        let urls: Vec<_> = spec.modules.iter().map(|m| m.url.as_str()).collect();
        assert_eq!(urls, ["http://automationexercise.com", "https://automationexercise.com/login"]);
        assert!(spec.modules.iter().all(|m| m.purpose == "auto"));
        assert!(validate_boundaries(&spec, &login_scenario()).is_empty());
    }

    #[test]
    fn baseline_single_url() {
        let s = TestScenario::new(
            "t",
            vec!["https://example.org/".into()],
            vec!["Type a query".into(), "Press search".into(), "See results".into()],
        )
        .unwrap();
        let spec = baseline_modularize(&s);
        assert_eq!(spec.modules.len(), 1);
        assert_eq!(spec.modules[0].execution_steps.len(), 3);
    }

    #[test]
    fn baseline_clamps_url() {
        let s = TestScenario::new(
            "t",
            vec!["https://example.org/".into()],
            vec![
                "Open the app".into(),
                "Navigate to settings".into(),
                "Navigate to profile".into(),
            ],
        )
        .unwrap();
        let out = baseline_modularize_with(&s, &BaselineOptions::default());
        assert_eq!(out.spec.modules.len(), 3);
        assert!(out.spec.modules.iter().all(|m| m.url == "https://example.org/"));
        assert_eq!(out.warnings.len(), 2);
        assert!(validate_boundaries(&out.spec, &s).is_empty());
    }

    #[test]
    fn extra_phrase_from_options() {
        let s = TestScenario::new(
            "t",
            vec!["https://a.test/".into(), "https://a.test/b".into()],
            vec!["Open it".into(), "Go to page b".into(), "Check b".into()],
        )
        .unwrap();
        let mut opts = BaselineOptions::default();
        opts.navigation_phrases.push("go to".into());
        let spec = baseline_modularize_with(&s, &opts).spec;
        assert_eq!(spec.modules.len(), 2);
        assert_eq!(spec.modules[1].url, "https://a.test/b");
    }

    #[test]
    fn modularize_via_replay() {
        let s = login_scenario();
        let (g, t) = replaying(&s, &format!("```json\n{}\n```", crate::model::tests::LOGIN_LEVEL1));
        let spec = modularize(&s, &g, &t).unwrap();
        assert_eq!(spec.modules.len(), 2);
        assert!(spec.is_level1());
    }

    #[test]
    fn non_empty_extracted_data_rejected() {
        let s = login_scenario();
        let text = crate::model::tests::LOGIN_LEVEL1.replacen(
            r#""extracted_data": []"#,
            r#""extracted_data": [{"type":"Link","request_description":"x","identifier_type":"XPath","identifier_tracking":"//a"}]"#,
            1,
        );
        let (g, t) = replaying(&s, &text);
        match modularize(&s, &g, &t) {
            Err(ModularizeError::LlmOutputInvalid { reason, raw }) => {
                assert_eq!(reason, "extracted_data must be empty at Level 1");
                assert_eq!(raw, text);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prose_rejected() {
        let s = login_scenario();
        let (g, t) = replaying(&s, "I cannot help with that.");
        let err = modularize(&s, &g, &t).unwrap_err();
        assert!(matches!(err, ModularizeError::LlmOutputInvalid { .. }));
        assert!(err.to_string().contains("no JSON"));
        assert_eq!(err.raw_response(), Some("I cannot help with that."));
    }

    #[test]
    fn violations_surface_verbatim() {
        let s = login_scenario();
        let mut spec = parse_specification(crate::model::tests::LOGIN_LEVEL1).unwrap();
        let moved = spec.modules[1].execution_steps.pop().unwrap();
        spec.modules[0].execution_steps.push(moved);
        let (g, t) = replaying(&s, &crate::model::serialize_specification(&spec));
        match modularize(&s, &g, &t) {
            Err(ModularizeError::Boundary(v)) => {
                assert_eq!(v, validate_boundaries(&spec, &s));
                assert!(v.iter().any(|x| x.kind == ViolationKind::BoundaryViolation));
            }
            other => panic!("{other:?}"),
        }
    }
}
