//! The XPath fragment that locators in generated specifications use:
//! absolute location paths over the child (`/`) and descendant (`//`)
//! axes, tag or `*` node tests, and predicates of the forms `[n]`,
//! `[@a='v']`, `[contains(@a,'v')]` and `[contains(text(),'v')]`, joined
//! with `and` or stacked.
//!
//! Anything else is rejected with [`XPathError::Unsupported`] rather than
//! being evaluated with partial semantics.
//!
//! `contains(text(), 'v')` tests the concatenation of the element's direct
//! text children, not only the first text node.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::dom::{Dom, NodeId, NodeKind, NodeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Child,
    Descendant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeTest {
    Any,
    Tag(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    AttrEquals { name: String, value: String },
    AttrContains { name: String, value: String },
    TextContains(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    /// 1-based position among the candidates that survived earlier predicates.
    Position(usize),
    /// Conditions joined with `and`; never empty.
    All(Vec<Condition>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub axis: Axis,
    pub test: NodeTest,
    pub predicates: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct XPathExpr {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XPathError {
    #[error("unsupported XPath at offset {position}: {construct}")]
    Unsupported { position: usize, construct: String },
    #[error("malformed XPath at offset {position}: {reason}")]
    Syntax { position: usize, reason: String },
}

impl XPathError {
    pub fn position(&self) -> usize {
        match self {
            XPathError::Unsupported { position, .. } | XPathError::Syntax { position, .. } => *position,
        }
    }
}

// ---------------------------------------------------------------------------
// printing

fn write_literal(f: &mut fmt::Formatter<'_>, value: &str) -> fmt::Result {
    if value.contains('\'') {
        write!(f, "\"{value}\"")
    } else {
        write!(f, "'{value}'")
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::AttrEquals { name, value } => {
                write!(f, "@{name}=")?;
                write_literal(f, value)
            }
            Condition::AttrContains { name, value } => {
                write!(f, "contains(@{name}, ")?;
                write_literal(f, value)?;
                f.write_str(")")
            }
            Condition::TextContains(value) => {
                f.write_str("contains(text(), ")?;
                write_literal(f, value)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for XPathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            f.write_str(match step.axis {
                Axis::Child => "/",
                Axis::Descendant => "//",
            })?;
            match &step.test {
                NodeTest::Any => f.write_str("*")?,
                NodeTest::Tag(t) => f.write_str(t)?,
            }
            for p in &step.predicates {
                match p {
                    Predicate::Position(n) => write!(f, "[{n}]")?,
                    Predicate::All(conds) => {
                        f.write_str("[")?;
                        for (i, c) in conds.iter().enumerate() {
                            if i > 0 {
                                f.write_str(" and ")?;
                            }
                            write!(f, "{c}")?;
                        }
                        f.write_str("]")?;
                    }
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// parsing

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.'
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn unsupported<T>(&self, at: usize, construct: impl Into<String>) -> Result<T, XPathError> {
        Err(XPathError::Unsupported {
            position: at,
            construct: construct.into(),
        })
    }

    fn syntax<T>(&self, reason: impl Into<String>) -> Result<T, XPathError> {
        Err(XPathError::Syntax {
            position: self.pos,
            reason: reason.into(),
        })
    }

    fn name(&mut self) -> Option<&'a str> {
        let start = self.pos;
        if !self.peek().is_some_and(is_name_start) {
            return None;
        }
        while self.peek().is_some_and(is_name_char) {
            self.bump();
        }
        Some(&self.src[start..self.pos])
    }

    fn literal(&mut self) -> Result<String, XPathError> {
        let quote = match self.peek() {
            Some(q @ ('\'' | '"')) => q,
            _ => return self.syntax("expected string literal"),
        };
        self.bump();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == quote {
                let value = self.src[start..self.pos].to_string();
                self.bump();
                return Ok(value);
            }
            self.bump();
        }
        self.syntax("unterminated string literal")
    }

    fn expr(&mut self) -> Result<XPathExpr, XPathError> {
        self.ws();
        if self.src[self.pos..].trim().is_empty() {
            return self.syntax("empty expression");
        }
        match self.peek() {
            Some('/') => {}
            Some('(') => return self.unsupported(self.pos, "parenthesized expression"),
            Some('.') => return self.unsupported(self.pos, "relative location path"),
            _ => {
                let at = self.pos;
                if let Some(n) = self.name() {
                    if self.rest().starts_with("::") {
                        return self.unsupported(at, format!("axis '{n}::'"));
                    }
                    if self.rest().trim_start().starts_with('(') {
                        return self.unsupported(at, format!("function '{n}()'"));
                    }
                }
                return self.unsupported(at, "relative location path");
            }
        }
        let mut steps = Vec::new();
        loop {
            self.ws();
            if self.peek().is_none() {
                break;
            }
            steps.push(self.step()?);
        }
        Ok(XPathExpr { steps })
    }

    fn step(&mut self) -> Result<Step, XPathError> {
        let axis = if self.eat("//") {
            Axis::Descendant
        } else if self.eat("/") {
            Axis::Child
        } else {
            return match self.peek() {
                Some('|') => self.unsupported(self.pos, "union operator '|'"),
                Some(c) => self.syntax(format!("unexpected '{c}'")),
                None => self.syntax("unexpected end"),
            };
        };
        let at = self.pos;
        let test = match self.peek() {
            Some('*') => {
                self.bump();
                NodeTest::Any
            }
            Some('.') => {
                if self.rest().starts_with("..") {
                    return self.unsupported(at, "parent step '..'");
                }
                return self.unsupported(at, "self step '.'");
            }
            Some('@') => return self.unsupported(at, "attribute step"),
            Some(c) if is_name_start(c) => {
                let n = self.name().unwrap_or_default();
                if self.rest().starts_with("::") {
                    return self.unsupported(at, format!("axis '{n}::'"));
                }
                if self.rest().starts_with(':') {
                    return self.unsupported(at, "namespace prefix");
                }
                if self.peek() == Some('(') {
                    return self.unsupported(at, format!("node test '{n}()'"));
                }
                NodeTest::Tag(n.to_ascii_lowercase())
            }
            None => return self.syntax("location step expected after '/'"),
            Some(c) => return self.syntax(format!("unexpected '{c}' in node test")),
        };
        let mut predicates = Vec::new();
        loop {
            self.ws();
            if self.peek() == Some('[') {
                self.bump();
                predicates.push(self.predicate()?);
            } else {
                break;
            }
        }
        if self.peek() == Some('|') {
            return self.unsupported(self.pos, "union operator '|'");
        }
        Ok(Step { axis, test, predicates })
    }

    fn predicate(&mut self) -> Result<Predicate, XPathError> {
        self.ws();
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            let n: usize = self.src[start..self.pos]
                .parse()
                .map_err(|_| XPathError::Syntax {
                    position: start,
                    reason: "position out of range".into(),
                })?;
            self.ws();
            if self.peek() != Some(']') {
                return self.unsupported(self.pos, "arithmetic or compound positional predicate");
            }
            self.bump();
            return Ok(Predicate::Position(n));
        }
        let mut conds = vec![self.condition()?];
        loop {
            self.ws();
            match self.peek() {
                Some(']') => {
                    self.bump();
                    return Ok(Predicate::All(conds));
                }
                Some(_) => {
                    let at = self.pos;
                    if self.eat("and") && !self.peek().is_some_and(is_name_char) {
                        self.ws();
                        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                            return self.unsupported(self.pos, "position inside a conjunction");
                        }
                        conds.push(self.condition()?);
                        continue;
                    }
                    self.pos = at;
                    if self.eat("or") {
                        return self.unsupported(at, "'or' disjunction");
                    }
                    return match self.peek() {
                        Some('!') => self.unsupported(at, "'!=' comparison"),
                        Some('<' | '>') => self.unsupported(at, "relational comparison"),
                        Some('|') => self.unsupported(at, "union operator '|'"),
                        Some(c) => self.syntax(format!("unexpected '{c}' in predicate")),
                        None => self.syntax("unterminated predicate"),
                    };
                }
                None => return self.syntax("unterminated predicate"),
            }
        }
    }

    fn condition(&mut self) -> Result<Condition, XPathError> {
        self.ws();
        let at = self.pos;
        if self.eat("@") {
            let name = match self.name() {
                Some(n) => n.to_ascii_lowercase(),
                None if self.peek() == Some('*') => return self.unsupported(at, "attribute wildcard"),
                None => return self.syntax("attribute name expected"),
            };
            self.ws();
            if self.rest().starts_with("!=") {
                return self.unsupported(self.pos, "'!=' comparison");
            }
            if !self.eat("=") {
                return self.unsupported(at, format!("attribute existence test '@{name}'"));
            }
            self.ws();
            let value = self.literal()?;
            return Ok(Condition::AttrEquals { name, value });
        }
        let Some(func) = self.name() else {
            return match self.peek() {
                Some('.') => self.unsupported(at, "context item '.'"),
                Some('\'' | '"') => self.unsupported(at, "literal comparison"),
                Some(c) => self.syntax(format!("unexpected '{c}' in predicate")),
                None => self.syntax("unterminated predicate"),
            };
        };
        self.ws();
        if self.peek() != Some('(') {
            return self.unsupported(at, format!("path or name '{func}' inside predicate"));
        }
        if func == "text" {
            return self.unsupported(at, "comparison on text()");
        }
        if func != "contains" {
            return self.unsupported(at, format!("function '{func}()'"));
        }
        self.bump();
        self.ws();
        let arg_at = self.pos;
        let target = if self.eat("@") {
            match self.name() {
                Some(n) => Some(n.to_ascii_lowercase()),
                None => return self.syntax("attribute name expected"),
            }
        } else if self.eat("text") {
            self.ws();
            if !self.eat("(") {
                return self.syntax("expected '(' after text");
            }
            self.ws();
            if !self.eat(")") {
                return self.syntax("expected ')' after text(");
            }
            None
        } else {
            return self.unsupported(arg_at, "contains() on something other than @attr or text()");
        };
        self.ws();
        if !self.eat(",") {
            return self.syntax("expected ',' in contains()");
        }
        self.ws();
        let value = self.literal()?;
        self.ws();
        if !self.eat(")") {
            return self.syntax("expected ')' closing contains()");
        }
        Ok(match target {
            Some(name) => Condition::AttrContains { name, value },
            None => Condition::TextContains(value),
        })
    }
}

pub fn parse_xpath(text: &str) -> Result<XPathExpr, XPathError> {
    Parser { src: text, pos: 0 }.expr()
}

// ---------------------------------------------------------------------------
// evaluation

impl Condition {
    fn holds(&self, node: NodeRef<'_>) -> bool {
        match self {
            Condition::AttrEquals { name, value } => node.attr(name) == Some(value.as_str()),
            // a missing attribute compares as the empty string
            Condition::AttrContains { name, value } => node.attr(name).unwrap_or("").contains(value.as_str()),
            Condition::TextContains(value) => node.own_text().contains(value.as_str()),
        }
    }
}

impl NodeTest {
    fn matches(&self, node: NodeRef<'_>) -> bool {
        match (self, node.tag()) {
            (NodeTest::Any, Some(_)) => true,
            (NodeTest::Tag(t), Some(tag)) => t.eq_ignore_ascii_case(tag),
            _ => false,
        }
    }
}

fn child_step(dom: &Dom, base: NodeId, step: &Step, out: &mut BTreeSet<NodeId>) {
    let mut candidates: Vec<NodeId> = dom
        .children(base)
        .iter()
        .copied()
        .filter(|&c| step.test.matches(dom.get(c)))
        .collect();
    for p in &step.predicates {
        match p {
            Predicate::Position(n) => {
                candidates = match n.checked_sub(1).and_then(|i| candidates.get(i)) {
                    Some(&c) => vec![c],
                    None => Vec::new(),
                };
            }
            Predicate::All(conds) => candidates.retain(|&c| conds.iter().all(|k| k.holds(dom.get(c)))),
        }
        if candidates.is_empty() {
            break;
        }
    }
    out.extend(candidates);
}

/// Matches of `expr` in document order.
pub fn evaluate<'a>(expr: &XPathExpr, dom: &'a Dom) -> Vec<NodeRef<'a>> {
    evaluate_ids(expr, dom).into_iter().map(|id| dom.get(id)).collect()
}

pub fn evaluate_ids(expr: &XPathExpr, dom: &Dom) -> Vec<NodeId> {
    let mut context: BTreeSet<NodeId> = BTreeSet::from([dom.root().id()]);
    for step in &expr.steps {
        let mut next = BTreeSet::new();
        match step.axis {
            Axis::Child => {
                for &c in &context {
                    child_step(dom, c, step, &mut next);
                }
            }
            Axis::Descendant => {
                // descendant-or-self of every context node; nested contexts
                // are covered by their outermost ancestor
                let mut covered_until = 0usize;
                for &c in &context {
                    if c.0 < covered_until {
                        continue;
                    }
                    covered_until = dom.subtree_end(c);
                    for base in dom.subtree(c) {
                        if matches!(dom.kind(base), NodeKind::Element { .. } | NodeKind::Document) {
                            child_step(dom, base, step, &mut next);
                        }
                    }
                }
            }
        }
        context = next;
        if context.is_empty() {
            break;
        }
    }
    context.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchClass {
    Unique,
    Multiple(usize),
    None,
}

impl fmt::Display for MatchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchClass::Unique => f.write_str("Unique"),
            MatchClass::Multiple(n) => write!(f, "Multiple({n})"),
            MatchClass::None => f.write_str("None"),
        }
    }
}

pub fn classify(expr: &XPathExpr, dom: &Dom) -> MatchClass {
    match evaluate_ids(expr, dom).len() {
        0 => MatchClass::None,
        1 => MatchClass::Unique,
        n => MatchClass::Multiple(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selector::dom::parse_html;

    const HEADER: &str = r#"<html><body><header id="header"><div class="top"></div><div class="bottom">
      <div class="container"><div class="row"><div class="col-sm-4"></div><div class="col-sm-8">
      <div class="shop-menu"><ul class="nav"><li><a href="/login">Signup / Login</a></li>
      <li><a href="/cart">Cart</a></li></ul></div></div></div></div></div></header></body></html>"#;

    #[test]
    fn text_contains_anchor() {
        let e = parse_xpath("//a[contains(text(), 'Signup / Login')]").unwrap();
        assert_eq!(e.steps.len(), 1);
        assert_eq!(e.steps[0].axis, Axis::Descendant);
        assert_eq!(e.steps[0].test, NodeTest::Tag("a".into()));
        assert_eq!(
            e.steps[0].predicates,
            vec![Predicate::All(vec![Condition::TextContains("Signup / Login".into())])]
        );
        let dom = parse_html(HEADER);
        let hits = evaluate(&e, &dom);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].attr("href"), Some("/login"));
        assert_eq!(classify(&e, &dom), MatchClass::Unique);
    }

    #[test]
    fn id_anchored_descendants() {
        let e = parse_xpath("//*[@id='form']//input[@name='email']").unwrap();
        assert_eq!(e.steps.len(), 2);
        assert!(e.steps.iter().all(|s| s.axis == Axis::Descendant));
        assert_eq!(e.steps[0].test, NodeTest::Any);
        assert_eq!(
            e.steps[1].predicates,
            vec![Predicate::All(vec![Condition::AttrEquals {
                name: "name".into(),
                value: "email".into()
            }])]
        );
    }

    #[test]
    fn positional_header_path() {
        let e = parse_xpath("//*[@id='header']/div[2]/div/div/div[2]/div[1]/ul/li[1]/a").unwrap();
        assert_eq!(e.steps.len(), 9);
        let dom = parse_html(HEADER);
        let hits = evaluate(&e, &dom);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].text_content(), "Signup / Login");
    }

    #[test]
    fn unsupported_constructs() {
        for (src, pos) in [
            ("//a[last()]", 4),
            ("//a/ancestor::div", 4),
            ("//a | //b", 4),
            ("(//a)[1]", 0),
            ("a/b", 0),
            ("//a/..", 4),
            ("//a[@href]", 4),
            ("//a[text()='x']", 4),
            ("//a[@x='1' or @y='2']", 11),
            ("//a[starts-with(@x,'1')]", 4),
            ("//a[1 + 1]", 6),
        ] {
            match parse_xpath(src) {
                Err(XPathError::Unsupported { position, .. }) => assert_eq!(position, pos, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
        assert!(matches!(parse_xpath(""), Err(XPathError::Syntax { .. })));
        assert!(matches!(parse_xpath("//a[@x='1"), Err(XPathError::Syntax { .. })));
        assert!(matches!(parse_xpath("//"), Err(XPathError::Syntax { .. })));
    }

    #[test]
    fn no_text_match_is_empty() {
        let dom = parse_html(HEADER);
        let e = parse_xpath("//div[contains(text(),'nope')]").unwrap();
        assert!(evaluate(&e, &dom).is_empty());
        assert_eq!(classify(&e, &dom), MatchClass::None);
    }

    #[test]
    fn counts_divs() {
        let dom = parse_html(&"<div></div>".repeat(7));
        assert_eq!(classify(&parse_xpath("//div").unwrap(), &dom), MatchClass::Multiple(7));
    }

    #[test]
    fn id_equality_is_exact() {
        let dom = parse_html("<p id='x'></p><p id='xy'></p><p id='X'></p>");
        let hits = evaluate(&parse_xpath("//*[@id='x']").unwrap(), &dom);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].attr("id"), Some("x"));
    }

    #[test]
    fn positions_are_per_parent() {
        let dom = parse_html("<ul><li>a</li><li>b</li></ul><ul><li>c</li></ul>");
        let texts: Vec<_> = evaluate(&parse_xpath("//li[1]").unwrap(), &dom)
            .iter()
            .map(|n| n.text_content())
            .collect();
        assert_eq!(texts, vec!["a", "c"]);
        let second: Vec<_> = evaluate(&parse_xpath("//ul[2]/li").unwrap(), &dom)
            .iter()
            .map(|n| n.text_content())
            .collect();
        // both ul are children of body
        assert_eq!(second, vec!["c"]);
    }

    #[test]
    fn stacked_predicates_apply_in_sequence() {
        let dom = parse_html("<i class='a'>1</i><i>2</i><i class='a'>3</i>");
        let by_class_then_pos: Vec<_> = evaluate(&parse_xpath("//i[@class='a'][2]").unwrap(), &dom)
            .iter()
            .map(|n| n.text_content())
            .collect();
        assert_eq!(by_class_then_pos, vec!["3"]);
        assert!(evaluate(&parse_xpath("//i[2][@class='a']").unwrap(), &dom).is_empty());
    }

    #[test]
    fn text_contains_uses_direct_text_only() {
        let dom = parse_html("<div>Hello <b>World</b> again</div>");
        assert_eq!(evaluate(&parse_xpath("//div[contains(text(),'again')]").unwrap(), &dom).len(), 1);
        assert!(evaluate(&parse_xpath("//div[contains(text(),'World')]").unwrap(), &dom).is_empty());
    }

    #[test]
    fn tag_names_case_insensitive_values_case_sensitive() {
        let dom = parse_html("<INPUT NAME='Email'>");
        assert_eq!(evaluate(&parse_xpath("//Input[@NAME='Email']").unwrap(), &dom).len(), 1);
        assert!(evaluate(&parse_xpath("//input[@name='email']").unwrap(), &dom).is_empty());
    }

    #[test]
    fn display_round_trip() {
        for src in [
            "//a[contains(text(), 'Signup / Login')]",
            "//*[@id='form']//input[@name='email']",
            "/html/body/div[2][@class='x' and contains(@title, \"it's\")]",
        ] {
            let e = parse_xpath(src).unwrap();
            assert_eq!(parse_xpath(&e.to_string()).unwrap(), e);
        }
    }
}
