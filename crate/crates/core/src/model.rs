//! Domain types shared by every pipeline level, and the JSON specification
//! schema that carries a test case from modularization to script generation.
//!
//! The on-disk form uses the field names `testCase`, `modules`, `url`,
//! `purpose`, `execution_steps`, `step`, `extracted_data`, `type`,
//! `request_description`, `identifier_type` and `identifier_tracking`.
//! Unknown fields are kept verbatim so richer model output survives a
//! round-trip, but they never take part in validation.

use std::fmt;

use serde::{Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;
use url::Url;

/// Opaque fields carried through a round-trip untouched.
pub type ExtraFields = Map<String, Value>;

/// Kind of UI element an extracted locator points at.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ElementType {
    Input,
    Button,
    Link,
    Checkbox,
    Select,
    Text,
    /// Anything outside the closed set, original spelling preserved.
    Other(String),
}

impl ElementType {
    pub fn parse(raw: &str) -> Self {
        match raw.trim().to_ascii_lowercase().as_str() {
            "input" => ElementType::Input,
            "button" => ElementType::Button,
            "link" => ElementType::Link,
            "checkbox" => ElementType::Checkbox,
            "select" => ElementType::Select,
            "text" => ElementType::Text,
            _ => ElementType::Other(raw.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            ElementType::Input => "input",
            ElementType::Button => "button",
            ElementType::Link => "link",
            ElementType::Checkbox => "checkbox",
            ElementType::Select => "select",
            ElementType::Text => "text",
            ElementType::Other(s) => s,
        }
    }
}

impl Serialize for ElementType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// Locator strategy of an extracted element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdentifierType {
    XPath,
    Css,
    Id,
}

impl IdentifierType {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "xpath" => Some(IdentifierType::XPath),
            "css" | "css selector" | "css_selector" => Some(IdentifierType::Css),
            "id" => Some(IdentifierType::Id),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            IdentifierType::XPath => "XPath",
            IdentifierType::Css => "CSS",
            IdentifierType::Id => "Id",
        }
    }
}

impl fmt::Display for IdentifierType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for IdentifierType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// One interface element extracted for a step. The owning step is the
/// [`ExecutionStep`] this entry is nested under.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiElementRef {
    #[serde(rename = "type")]
    pub element_type: ElementType,
    pub request_description: String,
    pub identifier_type: IdentifierType,
    pub identifier_tracking: String,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl UiElementRef {
    pub fn new(
        element_type: ElementType,
        request_description: impl Into<String>,
        identifier_type: IdentifierType,
        identifier_tracking: impl Into<String>,
    ) -> Self {
        UiElementRef {
            element_type,
            request_description: request_description.into(),
            identifier_type,
            identifier_tracking: identifier_tracking.into(),
            extra: ExtraFields::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionStep {
    pub step: String,
    pub extracted_data: Vec<UiElementRef>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl ExecutionStep {
    pub fn new(step: impl Into<String>) -> Self {
        ExecutionStep {
            step: step.into(),
            extracted_data: Vec::new(),
            extra: ExtraFields::new(),
        }
    }
}

/// The part of a scenario that happens on a single page.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PageModule {
    pub url: String,
    pub purpose: String,
    pub execution_steps: Vec<ExecutionStep>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl PageModule {
    pub fn new(url: impl Into<String>, purpose: impl Into<String>, steps: Vec<ExecutionStep>) -> Self {
        PageModule {
            url: url.into(),
            purpose: purpose.into(),
            execution_steps: steps,
            extra: ExtraFields::new(),
        }
    }

    pub fn element_count(&self) -> usize {
        self.execution_steps.iter().map(|s| s.extracted_data.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSpecification {
    #[serde(rename = "testCase")]
    pub test_case: String,
    pub modules: Vec<PageModule>,
    #[serde(flatten)]
    pub extra: ExtraFields,
}

impl TestSpecification {
    pub fn new(test_case: impl Into<String>, modules: Vec<PageModule>) -> Self {
        TestSpecification {
            test_case: test_case.into(),
            modules,
            extra: ExtraFields::new(),
        }
    }

    pub fn steps(&self) -> impl Iterator<Item = &ExecutionStep> {
        self.modules.iter().flat_map(|m| m.execution_steps.iter())
    }

    /// True when no step has extracted elements yet (Level-1 form).
    pub fn is_level1(&self) -> bool {
        self.steps().all(|s| s.extracted_data.is_empty())
    }
}

/// A natural-language scenario as written by a tester.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestScenario {
    pub title: String,
    pub urls: Vec<String>,
    pub steps: Vec<String>,
}

impl TestScenario {
    pub fn new(title: impl Into<String>, urls: Vec<String>, steps: Vec<String>) -> Result<Self, SpecError> {
        let scenario = TestScenario {
            title: title.into(),
            urls,
            steps,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.urls.is_empty() {
            return Err(SpecError::schema("$.urls", "urls must be non-empty"));
        }
        for (i, u) in self.urls.iter().enumerate() {
            check_http_url(u).map_err(|m| SpecError::schema(format!("$.urls[{i}]"), m))?;
        }
        if self.steps.is_empty() {
            return Err(SpecError::schema("$.steps", "steps must be non-empty"));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.trim().is_empty() {
                return Err(SpecError::schema(format!("$.steps[{i}]"), "step must be non-blank"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ViolationKind {
    UnknownUrl,
    MissingStep,
    UnexpectedStep,
    OutOfOrder,
    BoundaryViolation,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::UnknownUrl => "UnknownUrl",
            ViolationKind::MissingStep => "MissingStep",
            ViolationKind::UnexpectedStep => "UnexpectedStep",
            ViolationKind::OutOfOrder => "OutOfOrder",
            ViolationKind::BoundaryViolation => "BoundaryViolation",
        };
        f.write_str(s)
    }
}

/// A structural inconsistency between a specification and its scenario.
///
/// `module` and `step` index into the specification; for
/// [`ViolationKind::MissingStep`] `module` is `None` and `step` is the
/// scenario step index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub module: Option<usize>,
    pub step: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(m) = self.module {
            write!(f, " at module {m}")?;
        }
        if let Some(s) = self.step {
            write!(f, " step {s}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("boundary violation: {}", join_violations(.0))]
    Boundary(Vec<Violation>),
}

impl SpecError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        SpecError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub(crate) fn check_http_url(raw: &str) -> Result<(), String> {
    match Url::parse(raw.trim()) {
        Ok(u) if u.scheme() == "http" || u.scheme() == "https" => Ok(()),
        Ok(u) => Err(format!("unsupported URL scheme '{}'", u.scheme())),
        Err(e) => Err(format!("not an absolute URL ({e})")),
    }
}

// ---------------------------------------------------------------------------
// parsing

struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, path: String) -> Result<Self, SpecError> {
        match value {
            Value::Object(map) => Ok(Obj { map, path }),
            other => Err(SpecError::schema(path, format!("expected object, found {}", type_name(other)))),
        }
    }

    fn field_path(&self, key: &str) -> String {
        format!("{}.{}", self.path, key)
    }

    fn get(&self, key: &str) -> Result<&'a Value, SpecError> {
        self.map
            .get(key)
            .ok_or_else(|| SpecError::schema(self.field_path(key), format!("missing required field '{key}'")))
    }

    fn string(&self, key: &str) -> Result<String, SpecError> {
        match self.get(key)? {
            Value::String(s) => Ok(s.clone()),
            other => Err(SpecError::schema(
                self.field_path(key),
                format!("expected string, found {}", type_name(other)),
            )),
        }
    }

    fn non_blank(&self, key: &str) -> Result<String, SpecError> {
        let s = self.string(key)?;
        if s.trim().is_empty() {
            return Err(SpecError::schema(self.field_path(key), format!("{key} must be non-blank")));
        }
        Ok(s)
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>, SpecError> {
        match self.get(key)? {
            Value::Array(a) => Ok(a),
            other => Err(SpecError::schema(
                self.field_path(key),
                format!("expected array, found {}", type_name(other)),
            )),
        }
    }

    fn extra(&self, known: &[&str]) -> ExtraFields {
        self.map
            .iter()
            .filter(|(k, _)| !known.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn parse_element(value: &Value, path: String) -> Result<UiElementRef, SpecError> {
    let obj = Obj::new(value, path)?;
    let element_type = ElementType::parse(&obj.string("type")?);
    let request_description = obj.string("request_description")?;
    let raw_type = obj.string("identifier_type")?;
    let identifier_type = IdentifierType::parse(&raw_type).ok_or_else(|| {
        SpecError::schema(
            obj.field_path("identifier_type"),
            format!("unknown locator strategy '{raw_type}' (expected XPath, CSS or Id)"),
        )
    })?;
    let identifier_tracking = obj.non_blank("identifier_tracking")?;
    Ok(UiElementRef {
        element_type,
        request_description,
        identifier_type,
        identifier_tracking,
        extra: obj.extra(&["type", "request_description", "identifier_type", "identifier_tracking"]),
    })
}

pub(crate) fn parse_step(value: &Value, path: String) -> Result<ExecutionStep, SpecError> {
    let obj = Obj::new(value, path)?;
    let step = obj.non_blank("step")?;
    let extracted_data = obj
        .array("extracted_data")?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_element(v, format!("{}.extracted_data[{i}]", obj.path)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExecutionStep {
        step,
        extracted_data,
        extra: obj.extra(&["step", "extracted_data"]),
    })
}

pub(crate) fn parse_module(value: &Value, path: String) -> Result<PageModule, SpecError> {
    let obj = Obj::new(value, path)?;
    let url = obj.non_blank("url")?;
    check_http_url(&url).map_err(|m| SpecError::schema(obj.field_path("url"), m))?;
    let purpose = obj.string("purpose")?;
    let steps = obj.array("execution_steps")?;
    if steps.is_empty() {
        return Err(SpecError::schema(
            obj.field_path("execution_steps"),
            "execution_steps must be non-empty",
        ));
    }
    let execution_steps = steps
        .iter()
        .enumerate()
        .map(|(i, v)| parse_step(v, format!("{}.execution_steps[{i}]", obj.path)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PageModule {
        url,
        purpose,
        execution_steps,
        extra: obj.extra(&["url", "purpose", "execution_steps"]),
    })
}

/// Builds a specification from an already-decoded JSON value.
pub fn specification_from_value(value: &Value) -> Result<TestSpecification, SpecError> {
    let obj = Obj::new(value, "$".to_string())?;
    let test_case = obj.non_blank("testCase")?;
    let modules = obj.array("modules")?;
    if modules.is_empty() {
        return Err(SpecError::schema("$.modules", "modules must be non-empty"));
    }
    let modules = modules
        .iter()
        .enumerate()
        .map(|(i, v)| parse_module(v, format!("$.modules[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = TestSpecification {
        test_case,
        modules,
        extra: obj.extra(&["testCase", "modules"]),
    };
    let literal = literal_transition_violations(&spec);
    if !literal.is_empty() {
        return Err(SpecError::Boundary(literal));
    }
    Ok(spec)
}

/// Parses and validates a specification document.
pub fn parse_specification(json_text: &str) -> Result<TestSpecification, SpecError> {
    let value: Value = serde_json::from_str(json_text)?;
    specification_from_value(&value)
}

/// Canonical JSON: two-space indentation, keys in schema order, extra
/// fields after the known ones.
pub fn serialize_specification(spec: &TestSpecification) -> String {
    serde_json::to_string_pretty(spec).expect("specification serializes to JSON")
}

// ---------------------------------------------------------------------------
// boundary validation

/// Comparison form of a step: whitespace collapsed, every quote style folded
/// to a single apostrophe.
pub fn normalize_step(text: &str) -> String {
    let folded: String = text
        .chars()
        .map(|c| match c {
            '"' | '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{201C}' | '\u{201D}' | '\u{201E}'
            | '\u{2032}' | '\u{2033}' | '`' | '\u{00B4}' => '\'',
            other => other,
        })
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn same_url(a: &str, b: &str) -> bool {
    a.trim().trim_end_matches('/') == b.trim().trim_end_matches('/')
}

/// Longest candidate URL literally contained in `step`.
pub(crate) fn mentioned_url<'a>(step: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .filter(|u| {
            let u = u.trim().trim_end_matches('/');
            !u.is_empty() && step.contains(u)
        })
        .max_by_key(|u| u.trim().trim_end_matches('/').len())
}

/// A non-final step that literally names the next module's URL (and not its
/// own) is a navigation that should have closed the module.
fn literal_transition_violations(spec: &TestSpecification) -> Vec<Violation> {
    let mut out = Vec::new();
    for (mi, pair) in spec.modules.windows(2).enumerate() {
        let (current, next) = (&pair[0], &pair[1]);
        if same_url(&current.url, &next.url) {
            continue;
        }
        let Some(last) = current.execution_steps.len().checked_sub(1) else { continue };
        for (si, step) in current.execution_steps.iter().enumerate().take(last) {
            let hit = mentioned_url(&step.step, [current.url.as_str(), next.url.as_str()]);
            if hit.is_some_and(|u| same_url(u, &next.url)) {
                out.push(Violation {
                    kind: ViolationKind::BoundaryViolation,
                    module: Some(mi),
                    step: Some(si),
                    detail: format!(
                        "step navigates to '{}' but is followed by further steps in the same module",
                        next.url
                    ),
                });
            }
        }
    }
    out
}

/// Checks a specification against the scenario it was derived from.
///
/// An empty result means every module URL is one of the scenario URLs, the
/// module steps concatenate to the scenario steps in order, and no module
/// holds a step that belongs past one of its URL transitions.
pub fn validate_boundaries(spec: &TestSpecification, scenario: &TestScenario) -> Vec<Violation> {
    let mut violations = Vec::new();

    for (mi, module) in spec.modules.iter().enumerate() {
        if !scenario.urls.iter().any(|u| same_url(u, &module.url)) {
            violations.push(Violation {
                kind: ViolationKind::UnknownUrl,
                module: Some(mi),
                step: None,
                detail: format!("module URL '{}' is not one of the scenario URLs", module.url),
            });
        }
    }

    // Assign each spec step the earliest unused scenario step with the same
    // normalized text; equal texts keep their relative order.
    let wanted: Vec<String> = scenario.steps.iter().map(|s| normalize_step(s)).collect();
    let mut used = vec![false; wanted.len()];
    let mut placed: Vec<Vec<Option<usize>>> = Vec::with_capacity(spec.modules.len());
    for (mi, module) in spec.modules.iter().enumerate() {
        let mut row = Vec::with_capacity(module.execution_steps.len());
        for (si, step) in module.execution_steps.iter().enumerate() {
            let norm = normalize_step(&step.step);
            let hit = (0..wanted.len()).find(|&i| !used[i] && wanted[i] == norm);
            match hit {
                Some(i) => used[i] = true,
                None => violations.push(Violation {
                    kind: ViolationKind::UnexpectedStep,
                    module: Some(mi),
                    step: Some(si),
                    detail: format!("step '{}' does not appear in the scenario", step.step),
                }),
            }
            row.push(hit);
        }
        placed.push(row);
    }
    for (i, was_used) in used.iter().enumerate() {
        if !was_used {
            violations.push(Violation {
                kind: ViolationKind::MissingStep,
                module: None,
                step: Some(i),
                detail: format!("scenario step '{}' is missing from the specification", scenario.steps[i]),
            });
        }
    }

    // min_after[m]: smallest scenario index held by any module after m.
    let mut min_after = vec![usize::MAX; placed.len()];
    let mut running = usize::MAX;
    for mi in (0..placed.len()).rev() {
        min_after[mi] = running;
        if let Some(m) = placed[mi].iter().flatten().min() {
            running = running.min(*m);
        }
    }
    let mut crossed = Vec::new();
    for (mi, row) in placed.iter().enumerate() {
        for (si, idx) in row.iter().enumerate() {
            if let Some(idx) = idx {
                if *idx > min_after[mi] {
                    crossed.push(Violation {
                        kind: ViolationKind::BoundaryViolation,
                        module: Some(mi),
                        step: Some(si),
                        detail: format!(
                            "step '{}' follows the module's URL transition in the scenario",
                            spec.modules[mi].execution_steps[si].step
                        ),
                    });
                }
            }
        }
    }
    if crossed.is_empty() {
        for (mi, row) in placed.iter().enumerate() {
            let mut seen_max: Option<usize> = None;
            for (si, idx) in row.iter().enumerate() {
                let Some(idx) = *idx else { continue };
                if seen_max.is_some_and(|m| idx < m) {
                    violations.push(Violation {
                        kind: ViolationKind::OutOfOrder,
                        module: Some(mi),
                        step: Some(si),
                        detail: format!(
                            "step '{}' is out of scenario order",
                            spec.modules[mi].execution_steps[si].step
                        ),
                    });
                }
                seen_max = Some(seen_max.map_or(idx, |m| m.max(idx)));
            }
        }
    }
    violations.extend(crossed);
    violations.extend(literal_transition_violations(spec));
    violations
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const LOGIN_LEVEL1: &str = r#"{
  "testCase": "Login User with incorrect email and password",
  "modules": [
      {
      "url": "http://automationexercise.com",
      "purpose": "Home page of the application",
      "execution_steps": [{
          "step": "Launch browser and navigate to url 'http://automationexercise.com'",
          "extracted_data": []
        },{
          "step": "Click on 'Signup / Login' button",
          "extracted_data": []
        }]},
      {
      "url": "https://automationexercise.com/login",
      "purpose": "Login page for users to enter their credentials",
      "execution_steps": [{
          "step": "Enter incorrect email address and password",
          "extracted_data": []
        },{
          "step": "Click 'login' button",
          "extracted_data": []
        },{
          "step": "Verify error 'Your email or password is incorrect!' is visible",
          "extracted_data": []
        } ] } ] }"#;

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

    #[test]
    fn parses_login_level1() {
        let spec = parse_specification(LOGIN_LEVEL1).unwrap();
        assert_eq!(spec.test_case, "Login User with incorrect email and password");
        let counts: Vec<usize> = spec.modules.iter().map(|m| m.execution_steps.len()).collect();
        assert_eq!(counts, vec![2, 3]);
        assert!(spec.is_level1());
    }

    #[test]
    fn empty_modules_rejected() {
        let err = parse_specification(r#"{"testCase":"t","modules":[]}"#).unwrap_err();
        match err {
            SpecError::Schema { path, message } => {
                assert_eq!(path, "$.modules");
                assert_eq!(message, "modules must be non-empty");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_names_its_path() {
        let text = LOGIN_LEVEL1.replace(r#""purpose": "Login page for users to enter their credentials","#, "");
        match parse_specification(&text).unwrap_err() {
            SpecError::Schema { path, .. } => assert_eq!(path, "$.modules[1].purpose"),
            other => panic!("unexpected {other:?}"),
        }
        let text = LOGIN_LEVEL1.replacen(r#""extracted_data": []"#, r#""extracted_data": {}"#, 1);
        match parse_specification(&text).unwrap_err() {
            SpecError::Schema { path, message } => {
                assert_eq!(path, "$.modules[0].execution_steps[0].extracted_data");
                assert!(message.contains("expected array"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn serialized_first_key_is_test_case() {
        let spec = TestSpecification::new(
            "t",
            vec![PageModule::new("http://a.test", "p", vec![ExecutionStep::new("s")])],
        );
        let text = serialize_specification(&spec);
        assert!(text.starts_with("{\n  \"testCase\": \"t\""), "{text}");
        assert_eq!(parse_specification(&text).unwrap(), spec);
    }

    #[test]
    fn extra_fields_survive_round_trip() {
        let text = r#"{"testCase":"t","notes":{"k":1},"modules":[{"url":"http://a.test","purpose":"p",
            "execution_steps":[{"step":"s","extracted_data":[{"type":"Widget","request_description":"d",
            "identifier_type":"xpath","identifier_tracking":"//a","confidence":0.9}]}]}]}"#;
        let spec = parse_specification(text).unwrap();
        let el = &spec.modules[0].execution_steps[0].extracted_data[0];
        assert_eq!(el.element_type, ElementType::Other("Widget".into()));
        assert_eq!(el.identifier_type, IdentifierType::XPath);
        assert!(el.extra.contains_key("confidence"));
        let again = parse_specification(&serialize_specification(&spec)).unwrap();
        assert_eq!(again, spec);
    }

    #[test]
    fn login_scenario_and_level1_are_consistent() {
        let spec = parse_specification(LOGIN_LEVEL1).unwrap();
        assert_eq!(validate_boundaries(&spec, &login_scenario()), vec![]);
    }

    #[test]
    fn verification_step_moved_into_first_module() {
        let mut spec = parse_specification(LOGIN_LEVEL1).unwrap();
        let moved = spec.modules[1].execution_steps.pop().unwrap();
        spec.modules[0].execution_steps.push(moved);
        let v = validate_boundaries(&spec, &login_scenario());
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].kind, ViolationKind::BoundaryViolation);
        assert_eq!(v[0].module, Some(0));
        assert_eq!(v[0].step, Some(2));
    }

    #[test]
    fn unknown_url_flagged() {
        let mut spec = parse_specification(LOGIN_LEVEL1).unwrap();
        spec.modules[1].url = "https://automationexercise.com/signup".into();
        let v = validate_boundaries(&spec, &login_scenario());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::UnknownUrl);
        assert_eq!(v[0].module, Some(1));
    }

    #[test]
    fn quote_style_and_whitespace_are_ignored() {
        let mut spec = parse_specification(LOGIN_LEVEL1).unwrap();
        spec.modules[0].execution_steps[1].step = "Click  on \u{2018}Signup / Login\u{2019} button ".into();
        assert!(validate_boundaries(&spec, &login_scenario()).is_empty());
    }

    #[test]
    fn missing_and_unexpected_steps() {
        let mut spec = parse_specification(LOGIN_LEVEL1).unwrap();
        spec.modules[1].execution_steps[0].step = "Type something else".into();
        let kinds: Vec<_> = validate_boundaries(&spec, &login_scenario()).iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::UnexpectedStep, ViolationKind::MissingStep]);
    }

    #[test]
    fn reorder_within_module_is_out_of_order() {
        let mut spec = parse_specification(LOGIN_LEVEL1).unwrap();
        spec.modules[1].execution_steps.swap(0, 2);
        let v = validate_boundaries(&spec, &login_scenario());
        assert!(!v.is_empty());
        assert!(v.iter().all(|v| v.kind == ViolationKind::OutOfOrder), "{v:?}");
    }

    #[test]
    fn literal_navigation_mid_module_is_rejected_at_parse() {
        let text = LOGIN_LEVEL1.replace(
            "Click on 'Signup / Login' button\",\n          \"extracted_data\": []\n        }]}",
            "Go to https://automationexercise.com/login\",\n          \"extracted_data\": []\n        },{\"step\":\"Wait\",\"extracted_data\":[]}]}",
        );
        assert_ne!(text, LOGIN_LEVEL1);
        match parse_specification(&text).unwrap_err() {
            SpecError::Boundary(v) => assert_eq!(v[0].module, Some(0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeated_module_urls_are_accepted() {
        let scen = TestScenario::new("r", vec!["http://a.test".into()], vec!["one".into(), "two".into()]).unwrap();
        let spec = TestSpecification::new(
            "r",
            vec![
                PageModule::new("http://a.test", "p", vec![ExecutionStep::new("one")]),
                PageModule::new("http://a.test", "p", vec![ExecutionStep::new("two")]),
            ],
        );
        assert!(validate_boundaries(&spec, &scen).is_empty());
    }

    #[test]
    fn empty_module_reports_missing_steps() {
        let mut spec = parse_specification(LOGIN_LEVEL1).unwrap();
        spec.modules[1].execution_steps.clear();
        let v = validate_boundaries(&spec, &login_scenario());
        assert!(v.iter().any(|v| v.kind == ViolationKind::MissingStep), "{v:?}");
    }

    #[test]
    fn scenario_rejects_relative_url() {
        assert!(TestScenario::new("t", vec!["/login".into()], vec!["s".into()]).is_err());
        assert!(TestScenario::new("t", vec!["ftp://x.test".into()], vec!["s".into()]).is_err());
        assert!(TestScenario::new("t", vec!["http://x.test".into()], vec!["  ".into()]).is_err());
    }
}
