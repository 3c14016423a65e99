//! Robot Framework plain-text format: cells separated by two or more
//! spaces or a tab, `#` comments, `...` continuation lines.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    /// 1-based; 0 when the problem concerns the whole text.
    pub line: usize,
    pub reason: String,
}

fn perr(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SectionKind {
    Settings,
    Variables,
    TestCases,
    Keywords,
    Comments,
}

impl SectionKind {
    fn from_header(text: &str) -> Option<Self> {
        let name = text.trim_matches(|c: char| c == '*' || c.is_whitespace()).to_ascii_lowercase();
        let name = name.split_whitespace().collect::<Vec<_>>().join(" ");
        match name.as_str() {
            "settings" | "setting" => Some(SectionKind::Settings),
            "variables" | "variable" => Some(SectionKind::Variables),
            "test cases" | "test case" | "tasks" | "task" => Some(SectionKind::TestCases),
            "keywords" | "keyword" => Some(SectionKind::Keywords),
            "comments" | "comment" => Some(SectionKind::Comments),
            _ => None,
        }
    }

    pub fn header(&self) -> &'static str {
        match self {
            SectionKind::Settings => "*** Settings ***",
            SectionKind::Variables => "*** Variables ***",
            SectionKind::TestCases => "*** Test Cases ***",
            SectionKind::Keywords => "*** Keywords ***",
            SectionKind::Comments => "*** Comments ***",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionHeader {
    pub kind: SectionKind,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setting {
    pub name: String,
    pub args: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    /// As written, e.g. `${URL}`, without a trailing `=`.
    pub name: String,
    pub values: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordCall {
    /// Variables assigned from the call's return value.
    pub assign: Vec<String>,
    /// Keyword name, or a `[Setting]` such as `[Tags]`.
    pub keyword: String,
    pub args: Vec<String>,
    pub line: usize,
}

impl KeywordCall {
    pub fn is_setting(&self) -> bool {
        self.keyword.starts_with('[') && self.keyword.ends_with(']')
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub title: String,
    pub line: usize,
    pub calls: Vec<KeywordCall>,
}

/// A user keyword; parsed for completeness, never linted.
pub type UserKeyword = TestCase;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotScript {
    pub sections: Vec<SectionHeader>,
    pub settings: Vec<Setting>,
    pub variables: Vec<Variable>,
    pub test_cases: Vec<TestCase>,
    pub keywords: Vec<UserKeyword>,
}

impl RobotScript {
    pub fn has_library(&self, library: &str) -> bool {
        self.settings.iter().any(|s| {
            s.name.eq_ignore_ascii_case("library") && s.args.first().is_some_and(|a| a.eq_ignore_ascii_case(library))
        })
    }

    pub fn call_count(&self) -> usize {
        self.test_cases.iter().map(|t| t.calls.len()).sum()
    }

    /// The same script with every line number set to 0, for structural comparison.
    pub fn without_lines(&self) -> RobotScript {
        let mut s = self.clone();
        s.sections.iter_mut().for_each(|h| h.line = 0);
        s.settings.iter_mut().for_each(|x| x.line = 0);
        s.variables.iter_mut().for_each(|x| x.line = 0);
        for t in s.test_cases.iter_mut().chain(s.keywords.iter_mut()) {
            t.line = 0;
            t.calls.iter_mut().for_each(|c| c.line = 0);
        }
        s
    }
}

/// Splits a data line into cells; a cell starting with `#` ends the line.
pub fn split_cells(line: &str) -> Vec<String> {
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut spaces = 0usize;
    for c in line.trim().chars() {
        match c {
            '\t' => spaces = 2,
            ' ' => spaces += 1,
            _ => {
                if spaces >= 2 {
                    cells.push(std::mem::take(&mut cur));
                } else if spaces == 1 {
                    cur.push(' ');
                }
                spaces = 0;
                cur.push(c);
            }
        }
    }
    if !cur.is_empty() {
        cells.push(cur);
    }
    if let Some(pos) = cells.iter().position(|c| c.starts_with('#')) {
        cells.truncate(pos);
    }
    cells
}

pub fn is_variable_name(cell: &str) -> bool {
    let name = cell.trim_end_matches('=').trim_end();
    name.len() >= 3 && ["${", "@{", "&{"].iter().any(|p| name.starts_with(p)) && name.ends_with('}')
}

enum Target {
    None,
    Setting,
    Variable,
    Call,
}

pub fn parse_robot(text: &str) -> Result<RobotScript, ParseError> {
    let mut script = RobotScript::default();
    let mut section: Option<SectionKind> = None;
    let mut last = Target::None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim_start().starts_with('*') {
            let kind = SectionKind::from_header(line)
                .ok_or_else(|| perr(line_no, format!("unknown section header '{}'", line.trim())))?;
            script.sections.push(SectionHeader { kind, line: line_no });
            section = Some(kind);
            last = Target::None;
            continue;
        }
        if section == Some(SectionKind::Comments) {
            continue;
        }
        let indented = line.starts_with(' ') || line.starts_with('\t');
        let cells = split_cells(line);
        if cells.is_empty() {
            continue;
        }
        let Some(kind) = section else {
            return Err(perr(line_no, "data before the first section header"));
        };

        if cells[0] == "..." {
            let more = cells[1..].to_vec();
            match last {
                Target::Setting => script.settings.last_mut().expect("target exists").args.extend(more),
                Target::Variable => script.variables.last_mut().expect("target exists").values.extend(more),
                Target::Call => {
                    let owner = match kind {
                        SectionKind::Keywords => script.keywords.last_mut(),
                        _ => script.test_cases.last_mut(),
                    };
                    owner
                        .and_then(|t| t.calls.last_mut())
                        .expect("target exists")
                        .args
                        .extend(more);
                }
                Target::None => return Err(perr(line_no, "continuation line with nothing to continue")),
            }
            continue;
        }

        match kind {
            SectionKind::Settings => {
                script.settings.push(Setting {
                    name: cells[0].clone(),
                    args: cells[1..].to_vec(),
                    line: line_no,
                });
                last = Target::Setting;
            }
            SectionKind::Variables => {
                if !is_variable_name(&cells[0]) {
                    return Err(perr(line_no, format!("'{}' is not a variable name", cells[0])));
                }
                script.variables.push(Variable {
                    name: cells[0].trim_end_matches('=').trim_end().to_string(),
                    values: cells[1..].to_vec(),
                    line: line_no,
                });
                last = Target::Variable;
            }
            SectionKind::TestCases | SectionKind::Keywords => {
                let list = if kind == SectionKind::Keywords {
                    &mut script.keywords
                } else {
                    &mut script.test_cases
                };
                if !indented {
                    list.push(TestCase {
                        title: cells[0].clone(),
                        line: line_no,
                        calls: Vec::new(),
                    });
                    last = Target::None;
                    if cells.len() == 1 {
                        continue;
                    }
                }
                let owner = list
                    .last_mut()
                    .ok_or_else(|| perr(line_no, "keyword call outside a test case"))?;
                let body = if indented { &cells[..] } else { &cells[1..] };
                let assigned = body
                    .iter()
                    .take_while(|c| is_variable_name(c))
                    .count()
                    .min(body.len() - 1);
                owner.calls.push(KeywordCall {
                    assign: body[..assigned]
                        .iter()
                        .map(|c| c.trim_end_matches('=').trim_end().to_string())
                        .collect(),
                    keyword: body[assigned].clone(),
                    args: body[assigned + 1..].to_vec(),
                    line: line_no,
                });
                last = Target::Call;
            }
            SectionKind::Comments => unreachable!("comment lines skipped above"),
        }
    }
    if script.sections.is_empty() {
        return Err(perr(0, "no sections"));
    }
    Ok(script)
}

const SEP: &str = "    ";

fn push_row(out: &mut String, indent: bool, cells: impl IntoIterator<Item = String>) {
    let cells: Vec<String> = cells.into_iter().collect();
    if indent {
        out.push_str(SEP);
    }
    out.push_str(&cells.join(SEP));
    out.push('\n');
}

fn call_cells(c: &KeywordCall) -> Vec<String> {
    let mut cells: Vec<String> = c.assign.iter().map(|a| format!("{a}=")).collect();
    cells.push(c.keyword.clone());
    cells.extend(c.args.iter().cloned());
    cells
}

/// Writes the script with four-space separators. Each section's content is
/// written under the first header of that kind.
pub fn emit_robot(script: &RobotScript) -> String {
    let mut out = String::new();
    let mut written = Vec::new();
    for (i, h) in script.sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(h.kind.header());
        out.push('\n');
        if written.contains(&h.kind) {
            continue;
        }
        written.push(h.kind);
        match h.kind {
            SectionKind::Settings => {
                for s in &script.settings {
                    push_row(&mut out, false, std::iter::once(s.name.clone()).chain(s.args.iter().cloned()));
                }
            }
            SectionKind::Variables => {
                for v in &script.variables {
                    push_row(&mut out, false, std::iter::once(v.name.clone()).chain(v.values.iter().cloned()));
                }
            }
            SectionKind::TestCases | SectionKind::Keywords => {
                let list = if h.kind == SectionKind::Keywords {
                    &script.keywords
                } else {
                    &script.test_cases
                };
                for t in list {
                    out.push_str(&t.title);
                    out.push('\n');
                    for c in &t.calls {
                        push_row(&mut out, true, call_cells(c));
                    }
                }
            }
            SectionKind::Comments => {}
        }
    }
    out
}

/// Canonical form for comparing scripts: separators of two or more spaces
/// become four spaces, tabs count as separators, trailing whitespace and
/// trailing blank lines go.
pub fn normalize_whitespace(text: &str) -> String {
    let mut lines: Vec<String> = text
        .lines()
        .map(|l| {
            let l = l.trim_end_matches('\r').replace('\t', SEP);
            let mut out = String::with_capacity(l.len());
            let mut spaces = 0;
            for c in l.chars() {
                if c == ' ' {
                    spaces += 1;
                    continue;
                }
                match spaces {
                    0 => {}
                    1 => out.push(' '),
                    _ => out.push_str(SEP),
                }
                spaces = 0;
                out.push(c);
            }
            out
        })
        .collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let mut s = lines.join("\n");
    s.push('\n');
    s
}
