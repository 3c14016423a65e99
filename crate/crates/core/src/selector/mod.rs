//! HTML DOM and the XPath subset used to validate extracted locators.

pub mod dom;
pub mod xpath;

pub use dom::{parse_html, Dom, DomBuilder, NodeId, NodeKind, NodeRef};
pub use xpath::{classify, evaluate, evaluate_ids, parse_xpath, MatchClass, XPathError, XPathExpr};

use crate::model::IdentifierType;

/// Syntax check for a locator of the given strategy. XPath must fall in the
/// supported subset; CSS and Id locators only get a shallow check.
pub fn check_locator(kind: IdentifierType, expression: &str) -> Result<(), String> {
    let expression = expression.trim();
    if expression.is_empty() {
        return Err("empty locator".into());
    }
    match kind {
        IdentifierType::XPath => parse_xpath(expression).map(|_| ()).map_err(|e| e.to_string()),
        IdentifierType::Id => {
            if expression.chars().any(char::is_whitespace) {
                Err("id locator contains whitespace".into())
            } else {
                Ok(())
            }
        }
        IdentifierType::Css => check_css(expression),
    }
}

fn check_css(expression: &str) -> Result<(), String> {
    let mut depth_square = 0i32;
    let mut depth_paren = 0i32;
    let mut quote: Option<char> = None;
    for c in expression.chars() {
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '\'' | '"' => quote = Some(c),
            '[' => depth_square += 1,
            ']' => depth_square -= 1,
            '(' => depth_paren += 1,
            ')' => depth_paren -= 1,
            _ => {}
        }
        if depth_square < 0 || depth_paren < 0 {
            return Err("unbalanced brackets in CSS selector".into());
        }
    }
    if quote.is_some() {
        return Err("unterminated string in CSS selector".into());
    }
    if depth_square != 0 || depth_paren != 0 {
        return Err("unbalanced brackets in CSS selector".into());
    }
    if expression.ends_with(['>', '+', '~', ',']) {
        return Err("CSS selector ends with a combinator".into());
    }
    Ok(())
}
