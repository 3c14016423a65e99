//! Random DOMs and subset XPath expressions, plus an independent evaluator
//! (sxd-xpath over an sxd-document copy of the same tree).
//!
//! Every generated text node starts and ends with a space and no search
//! value contains two spaces in a row, so "the concatenated direct text
//! contains v" and "some direct text node contains v" coincide. The oracle
//! can then use `text()[contains(., v)]`, which is plain XPath 1.0.

#![allow(dead_code)]

use genia_core::selector::xpath::{Axis, Condition, NodeTest, Predicate, Step};
use genia_core::selector::{evaluate_ids, Dom, DomBuilder, NodeId, XPathExpr};
use rand::seq::SliceRandom;
use rand::Rng;

pub const TAGS: &[&str] = &["div", "span", "a", "ul", "li", "p", "form", "input", "button", "section"];
const WORDS: &[&str] = &["Signup / Login", "Login", "Home", "Cart", "Products", "Add to cart", "item", "Go"];
const NEEDLES: &[&str] = &["Login", "Signup / Login", "ogi", "Cart", "to", "item", "Home", "zzz"];
const CLASSES: &[&str] = &["btn", "nav", "item", "btn primary", "card", "nav-item"];
const CLASS_PARTS: &[&str] = &["btn", "nav", "pri", "-", "card", "x"];
const NAMES: &[&str] = &["email", "password", "q"];
const TYPES: &[&str] = &["submit", "text", "button"];
const IDS: &[&str] = &["header", "form", "main", "footer", "menu"];

#[derive(Debug, Clone)]
pub enum Node {
    Element {
        tag: String,
        attrs: Vec<(String, String)>,
        children: Vec<Node>,
    },
    Text(String),
    Comment(String),
}

/// A random tree under a single `html` element, at most `max_nodes` nodes.
pub fn random_tree(rng: &mut impl Rng, max_nodes: usize) -> Node {
    let mut budget = max_nodes.saturating_sub(1);
    let children = random_children(rng, &mut budget, 1);
    Node::Element {
        tag: "html".into(),
        attrs: vec![],
        children,
    }
}

fn random_children(rng: &mut impl Rng, budget: &mut usize, depth: usize) -> Vec<Node> {
    let mut out: Vec<Node> = Vec::new();
    let want = match depth {
        0..=2 => rng.gen_range(2..=5),
        3..=6 => rng.gen_range(0..=3),
        _ => rng.gen_range(0..=1),
    };
    for _ in 0..want {
        if *budget == 0 {
            break;
        }
        *budget -= 1;
        let roll = rng.gen_range(0..10);
        if roll < 3 && !matches!(out.last(), Some(Node::Text(_))) {
            let n = rng.gen_range(1..=2);
            let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
            out.push(Node::Text(format!(" {} ", words.join(" "))));
        } else if roll == 3 {
            out.push(Node::Comment(" Login note ".into()));
        } else {
            let tag = TAGS.choose(rng).unwrap().to_string();
            let mut attrs = Vec::new();
            if rng.gen_bool(0.25) {
                attrs.push(("id".to_string(), IDS.choose(rng).unwrap().to_string()));
            }
            if rng.gen_bool(0.4) {
                attrs.push(("class".to_string(), CLASSES.choose(rng).unwrap().to_string()));
            }
            if rng.gen_bool(0.2) {
                attrs.push(("name".to_string(), NAMES.choose(rng).unwrap().to_string()));
            }
            if rng.gen_bool(0.2) {
                attrs.push(("type".to_string(), TYPES.choose(rng).unwrap().to_string()));
            }
            let children = random_children(rng, budget, depth + 1);
            out.push(Node::Element { tag, attrs, children });
        }
    }
    out
}

pub fn node_count(node: &Node) -> usize {
    match node {
        Node::Element { children, .. } => 1 + children.iter().map(node_count).sum::<usize>(),
        _ => 1,
    }
}

/// The engine's DOM plus the element id of every element in preorder.
pub fn build_dom(tree: &Node) -> (Dom, Vec<NodeId>) {
    fn walk(b: &mut DomBuilder, n: &Node, ids: &mut Vec<NodeId>) {
        match n {
            Node::Element { tag, attrs, children } => {
                ids.push(b.open(tag, attrs.iter().map(|(k, v)| (k.as_str(), v.as_str()))));
                for c in children {
                    walk(b, c, ids);
                }
                b.close();
            }
            Node::Text(t) => {
                b.text(t);
            }
            Node::Comment(t) => {
                b.comment(t);
            }
        }
    }
    let mut b = DomBuilder::new();
    let mut ids = Vec::new();
    walk(&mut b, tree, &mut ids);
    (b.finish(), ids)
}

pub fn random_expr(rng: &mut impl Rng) -> XPathExpr {
    let n = *[1, 1, 2, 2, 3].choose(rng).unwrap();
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        let axis = if i == 0 && rng.gen_bool(0.15) {
            Axis::Child
        } else if i == 0 || rng.gen_bool(0.6) {
            Axis::Descendant
        } else {
            Axis::Child
        };
        let test = if i == 0 && axis == Axis::Child {
            NodeTest::Tag("html".into())
        } else if rng.gen_bool(0.25) {
            NodeTest::Any
        } else {
            NodeTest::Tag(TAGS.choose(rng).unwrap().to_string())
        };
        let mut predicates = Vec::new();
        for _ in 0..*[0, 1, 1, 2].choose(rng).unwrap() {
            predicates.push(if rng.gen_bool(0.35) {
                Predicate::Position(rng.gen_range(1..=3))
            } else {
                let k = rng.gen_range(1..=2);
                Predicate::All((0..k).map(|_| random_condition(rng)).collect())
            });
        }
        steps.push(Step { axis, test, predicates });
    }
    XPathExpr { steps }
}

fn random_condition(rng: &mut impl Rng) -> Condition {
    match rng.gen_range(0..6) {
        0 => Condition::AttrEquals {
            name: "id".into(),
            value: IDS.choose(rng).unwrap().to_string(),
        },
        1 => Condition::AttrEquals {
            name: "class".into(),
            value: CLASSES.choose(rng).unwrap().to_string(),
        },
        2 => Condition::AttrEquals {
            name: ["name", "type"].choose(rng).unwrap().to_string(),
            value: [NAMES, TYPES].concat().choose(rng).unwrap().to_string(),
        },
        3 => Condition::AttrContains {
            name: "class".into(),
            value: CLASS_PARTS.choose(rng).unwrap().to_string(),
        },
        _ => Condition::TextContains(NEEDLES.choose(rng).unwrap().to_string()),
    }
}

fn literal(v: &str) -> String {
    if v.contains('\'') {
        format!("\"{v}\"")
    } else {
        format!("'{v}'")
    }
}

/// The same query in full XPath 1.0 for the oracle.
pub fn oracle_expr(expr: &XPathExpr) -> String {
    let mut s = String::new();
    for step in &expr.steps {
        s.push_str(match step.axis {
            Axis::Child => "/",
            Axis::Descendant => "//",
        });
        match &step.test {
            NodeTest::Any => s.push('*'),
            NodeTest::Tag(t) => s.push_str(t),
        }
        for p in &step.predicates {
            match p {
                Predicate::Position(n) => s.push_str(&format!("[{n}]")),
                Predicate::All(conds) => {
                    let parts: Vec<String> = conds
                        .iter()
                        .map(|c| match c {
                            Condition::AttrEquals { name, value } => format!("@{name}={}", literal(value)),
                            Condition::AttrContains { name, value } => format!("contains(@{name}, {})", literal(value)),
                            Condition::TextContains(v) => format!("text()[contains(., {})]", literal(v)),
                        })
                        .collect();
                    s.push_str(&format!("[{}]", parts.join(" and ")));
                }
            }
        }
    }
    s
}

/// Preorder element indices matched by the oracle, in document order.
pub fn oracle_eval(tree: &Node, xpath: &str) -> Result<Vec<usize>, String> {
    use sxd_document::dom::{Document, Element};
    use sxd_document::Package;

    fn walk<'d>(doc: &Document<'d>, parent: Element<'d>, n: &Node, next: &mut usize) {
        match n {
            Node::Element { tag, attrs, children } => {
                let e = doc.create_element(tag.as_str());
                for (k, v) in attrs {
                    e.set_attribute_value(k.as_str(), v);
                }
                e.set_attribute_value("data-oracle-key", &next.to_string());
                *next += 1;
                parent.append_child(e);
                for c in children {
                    walk(doc, e, c, next);
                }
            }
            Node::Text(t) => parent.append_child(doc.create_text(t)),
            Node::Comment(t) => parent.append_child(doc.create_comment(t)),
        }
    }

    let package = Package::new();
    let doc = package.as_document();
    let Node::Element { tag, attrs, children } = tree else {
        return Err("tree root must be an element".into());
    };
    let root = doc.create_element(tag.as_str());
    for (k, v) in attrs {
        root.set_attribute_value(k.as_str(), v);
    }
    root.set_attribute_value("data-oracle-key", "0");
    doc.root().append_child(root);
    let mut next = 1;
    for c in children {
        walk(&doc, root, c, &mut next);
    }

    let factory = sxd_xpath::Factory::new();
    let compiled = factory
        .build(xpath)
        .map_err(|e| format!("{xpath}: {e}"))?
        .ok_or_else(|| format!("{xpath}: empty expression"))?;
    let context = sxd_xpath::Context::new();
    let value = compiled
        .evaluate(&context, doc.root())
        .map_err(|e| format!("{xpath}: {e}"))?;
    let sxd_xpath::Value::Nodeset(nodes) = value else {
        return Err(format!("{xpath}: not a node-set"));
    };
    nodes
        .document_order()
        .into_iter()
        .map(|n| {
            n.element()
                .and_then(|e| e.attribute_value("data-oracle-key"))
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| format!("{xpath}: matched a non-element node"))
        })
        .collect()
}

/// Preorder element indices matched by the engine.
pub fn engine_eval(dom: &Dom, element_ids: &[NodeId], expr: &XPathExpr) -> Vec<usize> {
    evaluate_ids(expr, dom)
        .into_iter()
        .map(|id| element_ids.iter().position(|&e| e == id).expect("matches are elements"))
        .collect()
}

#[derive(Debug, Default)]
pub struct OracleTally {
    pub cases: usize,
    pub agree: usize,
    pub non_empty: usize,
    pub first_mismatch: Option<String>,
}

/// Runs `exprs × doms` through both the engine (via the printed and
/// re-parsed expression) and the oracle.
pub fn compare_all(exprs: &[XPathExpr], trees: &[Node]) -> OracleTally {
    let mut tally = OracleTally::default();
    for tree in trees {
        let (dom, ids) = build_dom(tree);
        for expr in exprs {
            tally.cases += 1;
            let printed = expr.to_string();
            let ours = match genia_core::selector::parse_xpath(&printed) {
                Ok(parsed) => engine_eval(&dom, &ids, &parsed),
                Err(e) => {
                    tally.first_mismatch.get_or_insert(format!("{printed}: engine rejected it ({e})"));
                    continue;
                }
            };
            match oracle_eval(tree, &oracle_expr(expr)) {
                Ok(theirs) if theirs == ours => {
                    tally.agree += 1;
                    if !ours.is_empty() {
                        tally.non_empty += 1;
                    }
                }
                Ok(theirs) => {
                    tally
                        .first_mismatch
                        .get_or_insert(format!("{printed}: engine {ours:?}, oracle {theirs:?}"));
                }
                Err(e) => {
                    tally.first_mismatch.get_or_insert(e);
                }
            }
        }
    }
    tally
}
