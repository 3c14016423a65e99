//! Deterministic checks over a parsed Robot script.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::robot::{KeywordCall, RobotScript, SectionKind};
use crate::model::TestSpecification;
use crate::selector::parse_xpath;

const DEFAULT_WHITELIST: &str = include_str!("../../assets/robot_keywords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RuleId {
    /// Unknown keyword.
    R1,
    /// Undefined variable.
    R2,
    /// Section order.
    R3,
    /// Interaction right after navigation with no wait.
    R4,
    /// Locator outside the XPath subset.
    R5,
    /// Test-case title differs from the specification.
    R6,
}

impl RuleId {
    pub const ALL: [RuleId; 6] = [RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4, RuleId::R5, RuleId::R6];

    pub fn severity(&self) -> Severity {
        match self {
            RuleId::R1 | RuleId::R2 | RuleId::R3 => Severity::Error,
            RuleId::R4 | RuleId::R5 | RuleId::R6 => Severity::Warning,
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LintFinding {
    pub severity: Severity,
    pub rule: RuleId,
    pub line: usize,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
}

impl fmt::Display for LintFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {:?} {}: {}", self.line, self.severity, self.rule, self.message)?;
        if let Some(s) = &self.suggestion {
            write!(f, " (suggestion: {s})")?;
        }
        Ok(())
    }
}

/// Keyword names compare case-insensitively, ignoring spaces and underscores.
pub fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| *c != ' ' && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct KeywordInfo {
    pub name: String,
    /// Index of the argument holding a locator.
    pub locator_arg: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Whitelist {
    keywords: Vec<KeywordInfo>,
    by_name: HashMap<String, usize>,
}

impl Default for Whitelist {
    fn default() -> Self {
        Whitelist::parse(DEFAULT_WHITELIST).expect("bundled whitelist is valid")
    }
}

impl Whitelist {
    /// One keyword per line, optionally followed by a cell with the locator
    /// argument index. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut keywords = Vec::new();
        let mut by_name = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let cells = super::robot::split_cells(line);
            let Some(name) = cells.first() else { continue };
            let locator_arg = match cells.get(1) {
                Some(c) => Some(
                    c.parse::<usize>()
                        .map_err(|_| format!("line {}: locator index '{c}' is not a number", i + 1))?,
                ),
                None => None,
            };
            if by_name.insert(normalize_name(name), keywords.len()).is_none() {
                keywords.push(KeywordInfo {
                    name: name.clone(),
                    locator_arg,
                });
            }
        }
        if keywords.is_empty() {
            return Err("whitelist is empty".into());
        }
        Ok(Whitelist { keywords, by_name })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn get(&self, keyword: &str) -> Option<&KeywordInfo> {
        self.by_name.get(&normalize_name(strip_library(keyword))).map(|&i| &self.keywords[i])
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.get(keyword).is_some()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(|k| k.name.as_str())
    }

    /// Closest known keyword: verb synonyms first, then edit distance.
    pub fn suggest(&self, keyword: &str) -> Option<String> {
        let words: Vec<String> = keyword.split_whitespace().map(str::to_lowercase).collect();
        if let Some((first, rest)) = words.split_first() {
            if let Some(&(_, verb)) = VERB_SYNONYMS.iter().find(|(from, _)| from == first) {
                let candidate = std::iter::once(verb.to_string()).chain(rest.iter().cloned()).collect::<Vec<_>>();
                if let Some(k) = self.get(&candidate.join(" ")) {
                    return Some(k.name.clone());
                }
            }
        }
        let target = normalize_name(keyword);
        let (best, distance) = self
            .keywords
            .iter()
            .map(|k| (k, strsim::levenshtein(&normalize_name(&k.name), &target)))
            .min_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.name.cmp(&b.0.name)))?;
        (distance * 2 <= target.chars().count().max(1)).then(|| best.name.clone())
    }
}

const VERB_SYNONYMS: &[(&str, &str)] = &[
    ("launch", "open"),
    ("start", "open"),
    ("navigate", "go"),
    ("goto", "go"),
    ("type", "input"),
    ("enter", "input"),
    ("fill", "input"),
    ("press", "click"),
    ("tap", "click"),
    ("quit", "close"),
    ("exit", "close"),
];

const LIBRARY_PREFIXES: &[&str] = &["seleniumlibrary.", "builtin."];

fn strip_library(keyword: &str) -> &str {
    let lower = keyword.to_ascii_lowercase();
    for p in LIBRARY_PREFIXES {
        if lower.starts_with(p) {
            return &keyword[p.len()..];
        }
    }
    keyword
}

/// Control-structure markers that are not keywords.
const CONTROL: &[&str] = &[
    "for", "end", "if", "else", "elseif", "while", "try", "except", "finally", "break", "continue", "return", "in",
    "inrange", "inenumerate", "inzip", "var",
];

const BUILTIN_VARIABLES: &[&str] = &[
    "empty", "space", "true", "false", "none", "null", "curdir", "tempdir", "execdir", "outputdir", "outputfile",
    "logfile", "reportfile", "testname", "testdocumentation", "testtags", "teststatus", "testmessage", "suitename",
    "suitesource", "suitedocumentation", "suitemetadata", "suitestatus", "suitemessage", "prevtestname",
    "prevteststatus", "prevtestmessage", "keywordstatus", "keywordmessage", "loglevel", "options", "/", ":", "\\n",
];

fn variable_key(inner: &str) -> String {
    // extended syntax: ${URL.lower()}, ${ITEMS}[0]
    let base = inner.split(['.', '[']).next().unwrap_or(inner);
    normalize_name(base)
}

/// Variables referenced in `cell`, as the text between the braces.
/// References that nest other references are skipped.
pub fn variable_references(cell: &str) -> Vec<String> {
    let bytes = cell.as_bytes();
    let mut refs = Vec::new();
    let mut i = 0;
    while i + 1 < bytes.len() {
        if matches!(bytes[i], b'$' | b'@' | b'&') && bytes[i + 1] == b'{' && (i == 0 || bytes[i - 1] != b'\\') {
            let start = i + 2;
            let mut depth = 1;
            let mut j = start;
            let mut nested = false;
            while j < bytes.len() && depth > 0 {
                match bytes[j] {
                    b'{' => {
                        depth += 1;
                        nested = true;
                    }
                    b'}' => depth -= 1,
                    _ => {}
                }
                j += 1;
            }
            if depth == 0 {
                let inner = &cell[start..j - 1];
                if !nested && !inner.is_empty() {
                    refs.push(inner.to_string());
                }
                i = if nested { start } else { j };
                continue;
            }
            break;
        }
        i += 1;
    }
    refs
}

fn is_builtin(inner: &str) -> bool {
    let key = variable_key(inner);
    BUILTIN_VARIABLES.contains(&key.as_str()) || key.parse::<f64>().is_ok() || inner.starts_with("0x")
}

fn defined_name(name: &str) -> String {
    variable_key(name.get(2..name.len().saturating_sub(1)).unwrap_or(name))
}

fn is_navigation(name: &str) -> bool {
    matches!(name, "openbrowser" | "goto" | "reloadpage" | "goback")
}

fn is_wait(name: &str) -> bool {
    name.starts_with("waituntil") || name == "sleep"
}

fn is_interaction(name: &str) -> bool {
    ["click", "doubleclick", "input", "select", "unselect", "choosefile", "presskeys", "clearelementtext", "mouseover", "submitform"]
        .iter()
        .any(|p| name.starts_with(p))
}

fn targets_link(call: &KeywordCall, name: &str) -> bool {
    if name == "clicklink" {
        return true;
    }
    if !name.starts_with("click") {
        return false;
    }
    let Some(loc) = call.args.first() else { return false };
    let loc = loc.trim();
    let loc = loc
        .strip_prefix("xpath:")
        .or_else(|| loc.strip_prefix("xpath="))
        .unwrap_or(loc);
    if loc.starts_with("link:") || loc.starts_with("link=") || loc.starts_with("partial link:") {
        return true;
    }
    if let Ok(expr) = parse_xpath(loc) {
        return expr
            .steps
            .last()
            .is_some_and(|s| matches!(&s.test, crate::selector::xpath::NodeTest::Tag(t) if t == "a"));
    }
    let css = loc.strip_prefix("css:").or_else(|| loc.strip_prefix("css=")).unwrap_or(loc);
    css.rsplit([' ', '>']).next().is_some_and(|last| {
        last == "a" || last.starts_with("a[") || last.starts_with("a.") || last.starts_with("a#") || last.starts_with("a:")
    })
}

fn xpath_locator(arg: &str) -> Option<&str> {
    let a = arg.trim();
    if a.contains("${") {
        return None;
    }
    if let Some(rest) = a.strip_prefix("xpath:").or_else(|| a.strip_prefix("xpath=")) {
        return Some(rest.trim());
    }
    (a.starts_with('/') || a.starts_with('(')).then_some(a)
}

fn check_refs(cells: &[String], line: usize, defined: &HashSet<String>, out: &mut Vec<LintFinding>) {
    for cell in cells {
        for r in variable_references(cell) {
            if !is_builtin(&r) && !defined.contains(&variable_key(&r)) {
                out.push(finding(
                    RuleId::R2,
                    line,
                    format!("variable '${{{r}}}' is not defined"),
                    Some("define it in *** Variables ***".into()),
                ));
            }
        }
    }
}

fn finding(rule: RuleId, line: usize, message: String, suggestion: Option<String>) -> LintFinding {
    LintFinding {
        severity: rule.severity(),
        rule,
        line,
        message,
        suggestion,
    }
}

/// Applies rules R1 to R6 in script order. Findings are sorted by line,
/// then rule.
pub fn lint(script: &RobotScript, spec: Option<&TestSpecification>, whitelist: &Whitelist) -> Vec<LintFinding> {
    let mut out = Vec::new();

    // R3
    let expected = [SectionKind::Settings, SectionKind::Variables, SectionKind::TestCases];
    let mut highest: Option<(usize, SectionKind)> = None;
    for h in &script.sections {
        let Some(rank) = expected.iter().position(|k| *k == h.kind) else { continue };
        if let Some((top, top_kind)) = highest {
            if rank < top {
                out.push(finding(
                    RuleId::R3,
                    h.line,
                    format!("{} appears after {}", h.kind.header(), top_kind.header()),
                    Some("order sections as Settings, Variables, Test Cases".into()),
                ));
                continue;
            }
        }
        highest = Some((rank, h.kind));
    }

    // R2 over variable values; the whole table is visible to every value
    let defined: HashSet<String> = script.variables.iter().map(|v| defined_name(&v.name)).collect();
    for v in &script.variables {
        check_refs(&v.values, v.line, &defined, &mut out);
    }
    for s in &script.settings {
        check_refs(&s.args, s.line, &defined, &mut out);
    }

    let user_keywords: HashSet<String> = script.keywords.iter().map(|k| normalize_name(&k.title)).collect();

    for case in &script.test_cases {
        let mut local = defined.clone();
        let mut pending_nav = false;
        for call in &case.calls {
            let name = normalize_name(strip_library(&call.keyword));
            if call.is_setting() {
                check_refs(&call.args, call.line, &local, &mut out);
                continue;
            }
            if name == "for" {
                for v in call.args.iter().take_while(|a| !a.to_ascii_uppercase().starts_with("IN")) {
                    local.insert(defined_name(v));
                }
                continue;
            }
            if name == "var" {
                check_refs(call.args.get(1..).unwrap_or_default(), call.line, &local, &mut out);
                if let Some(v) = call.args.first() {
                    local.insert(defined_name(v));
                }
                continue;
            }
            if CONTROL.contains(&name.as_str()) {
                check_refs(&call.args, call.line, &local, &mut out);
                continue;
            }

            // R1
            let known = whitelist.get(&call.keyword);
            if known.is_none() && !user_keywords.contains(&name) {
                let suggestion = whitelist.suggest(&call.keyword);
                out.push(finding(
                    RuleId::R1,
                    call.line,
                    format!("unknown keyword '{}'", call.keyword),
                    suggestion,
                ));
            }

            // R2
            check_refs(&call.args, call.line, &local, &mut out);
            for a in &call.assign {
                local.insert(defined_name(a));
            }

            // R4
            if is_wait(&name) {
                pending_nav = false;
            } else if is_interaction(&name) {
                if pending_nav {
                    out.push(finding(
                        RuleId::R4,
                        call.line,
                        format!("'{}' runs right after a navigation with no explicit wait", call.keyword),
                        Some(match call.args.first() {
                            Some(loc) => format!("insert 'Wait Until Element Is Visible    {loc}' or 'Sleep' before it"),
                            None => "insert 'Sleep' or 'Wait Until Element Is Visible' before it".into(),
                        }),
                    ));
                }
                pending_nav = targets_link(call, &name);
            } else if is_navigation(&name) {
                pending_nav = true;
            }

            // R5
            let locator_index = known.and_then(|k| k.locator_arg);
            if let Some(arg) = locator_index.and_then(|i| call.args.get(i)) {
                if let Some(xp) = xpath_locator(arg) {
                    if let Err(e) = parse_xpath(xp) {
                        out.push(finding(
                            RuleId::R5,
                            call.line,
                            format!("locator '{xp}' is outside the supported XPath subset ({e})"),
                            None,
                        ));
                    }
                }
            }
        }
    }

    // R6
    if let Some(spec) = spec {
        let want = title_key(&spec.test_case);
        if !script.test_cases.iter().any(|t| title_key(&t.title) == want) {
            let line = script.test_cases.first().map_or(0, |t| t.line);
            out.push(finding(
                RuleId::R6,
                line,
                format!("no test case is named '{}'", spec.test_case),
                Some(spec.test_case.clone()),
            ));
        }
    }

    out.sort_by(|a, b| a.line.cmp(&b.line).then(a.rule.cmp(&b.rule)));
    out
}

fn title_key(title: &str) -> String {
    title.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn error_count(findings: &[LintFinding]) -> usize {
    findings.iter().filter(|f| f.severity == Severity::Error).count()
}
