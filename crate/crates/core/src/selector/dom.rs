//! Arena DOM built from forgiving HTML parsing.
//!
//! Nodes are stored in preorder, so a [`NodeId`] comparison is a document
//! order comparison and a subtree is a contiguous id range.

use std::fmt::Write as _;

use scraper::Html;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Document,
    Element { tag: String, attrs: Vec<(String, String)> },
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone)]
struct NodeData {
    kind: NodeKind,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    /// One past the last id in this node's subtree.
    end: usize,
}

#[derive(Debug, Clone)]
pub struct Dom {
    nodes: Vec<NodeData>,
}

pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "keygen", "link", "meta", "param", "source",
    "track", "wbr",
];

pub(crate) const RAW_TEXT_ELEMENTS: &[&str] = &[
    "script", "style", "xmp", "iframe", "noembed", "noframes", "noscript", "plaintext",
];

pub fn is_void(tag: &str) -> bool {
    VOID_ELEMENTS.contains(&tag)
}

/// Builds a [`Dom`] in document order: open, add content, close.
#[derive(Debug)]
pub struct DomBuilder {
    dom: Dom,
    stack: Vec<NodeId>,
}

impl Default for DomBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl DomBuilder {
    pub fn new() -> Self {
        let root = NodeData {
            kind: NodeKind::Document,
            parent: None,
            children: Vec::new(),
            end: 1,
        };
        DomBuilder {
            dom: Dom { nodes: vec![root] },
            stack: vec![NodeId(0)],
        }
    }

    fn push(&mut self, kind: NodeKind) -> NodeId {
        let id = NodeId(self.dom.nodes.len());
        let parent = *self.stack.last().expect("document root stays on the stack");
        self.dom.nodes.push(NodeData {
            kind,
            parent: Some(parent),
            children: Vec::new(),
            end: id.0 + 1,
        });
        self.dom.nodes[parent.0].children.push(id);
        id
    }

    pub fn open<I, K, V>(&mut self, tag: &str, attrs: I) -> NodeId
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let attrs = attrs
            .into_iter()
            .map(|(k, v)| (k.into().to_ascii_lowercase(), v.into()))
            .collect();
        let id = self.push(NodeKind::Element {
            tag: tag.to_ascii_lowercase(),
            attrs,
        });
        self.stack.push(id);
        id
    }

    pub fn close(&mut self) {
        if self.stack.len() > 1 {
            self.stack.pop();
        }
    }

    pub fn text(&mut self, text: &str) -> NodeId {
        // adjacent text merges, as a parser would produce
        let parent = *self.stack.last().expect("root");
        if let Some(&last) = self.dom.nodes[parent.0].children.last() {
            if last.0 == self.dom.nodes.len() - 1 {
                if let NodeKind::Text(t) = &mut self.dom.nodes[last.0].kind {
                    t.push_str(text);
                    return last;
                }
            }
        }
        self.push(NodeKind::Text(text.to_string()))
    }

    pub fn comment(&mut self, text: &str) -> NodeId {
        self.push(NodeKind::Comment(text.to_string()))
    }

    pub fn finish(mut self) -> Dom {
        let total = self.dom.nodes.len();
        // ends: process in reverse preorder so children are done first
        for i in (0..total).rev() {
            let end = self.dom.nodes[i]
                .children
                .last()
                .map(|c| self.dom.nodes[c.0].end)
                .unwrap_or(i + 1);
            self.dom.nodes[i].end = end;
        }
        self.dom
    }
}

impl Dom {
    pub fn root(&self) -> NodeRef<'_> {
        NodeRef { dom: self, id: NodeId(0) }
    }

    pub fn get(&self, id: NodeId) -> NodeRef<'_> {
        NodeRef { dom: self, id }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn kind(&self, id: NodeId) -> &NodeKind {
        &self.nodes[id.0].kind
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    /// Ids of `id` and all its descendants, in document order.
    pub fn subtree(&self, id: NodeId) -> impl Iterator<Item = NodeId> {
        (id.0..self.nodes[id.0].end).map(NodeId)
    }

    pub fn subtree_end(&self, id: NodeId) -> usize {
        self.nodes[id.0].end
    }

    pub fn elements(&self) -> impl Iterator<Item = NodeRef<'_>> {
        (0..self.nodes.len())
            .map(move |i| self.get(NodeId(i)))
            .filter(|n| n.is_element())
    }

    pub fn to_html(&self) -> String {
        let mut out = String::new();
        for &c in self.children(NodeId(0)) {
            self.write_node(c, &mut out);
        }
        out
    }

    fn write_node(&self, id: NodeId, out: &mut String) {
        match &self.nodes[id.0].kind {
            NodeKind::Document => {
                for &c in self.children(id) {
                    self.write_node(c, out);
                }
            }
            NodeKind::Text(t) => {
                let raw = self
                    .parent(id)
                    .and_then(|p| self.get(p).tag())
                    .is_some_and(|t| RAW_TEXT_ELEMENTS.contains(&t));
                if raw {
                    out.push_str(t);
                } else {
                    escape_text(t, out);
                }
            }
            NodeKind::Comment(c) => {
                out.push_str("<!--");
                out.push_str(c);
                out.push_str("-->");
            }
            NodeKind::Element { tag, attrs } => {
                out.push('<');
                out.push_str(tag);
                for (k, v) in attrs {
                    out.push(' ');
                    out.push_str(k);
                    out.push_str("=\"");
                    escape_attr(v, out);
                    out.push('"');
                }
                out.push('>');
                if is_void(tag) {
                    return;
                }
                for &c in self.children(id) {
                    self.write_node(c, out);
                }
                let _ = write!(out, "</{tag}>");
            }
        }
    }
}

pub(crate) fn escape_text(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

pub(crate) fn escape_attr(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}

/// Borrowed view of one node.
#[derive(Debug, Clone, Copy)]
pub struct NodeRef<'a> {
    dom: &'a Dom,
    id: NodeId,
}

impl<'a> NodeRef<'a> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn kind(&self) -> &'a NodeKind {
        self.dom.kind(self.id)
    }

    pub fn is_element(&self) -> bool {
        matches!(self.kind(), NodeKind::Element { .. })
    }

    pub fn tag(&self) -> Option<&'a str> {
        match self.kind() {
            NodeKind::Element { tag, .. } => Some(tag),
            _ => None,
        }
    }

    pub fn attributes(&self) -> &'a [(String, String)] {
        match self.kind() {
            NodeKind::Element { attrs, .. } => attrs,
            _ => &[],
        }
    }

    pub fn attr(&self, name: &str) -> Option<&'a str> {
        self.attributes()
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn parent(&self) -> Option<NodeRef<'a>> {
        self.dom.parent(self.id).map(|id| self.dom.get(id))
    }

    pub fn children(&self) -> impl Iterator<Item = NodeRef<'a>> + 'a {
        let dom = self.dom;
        dom.children(self.id).iter().map(move |&id| dom.get(id))
    }

    pub fn element_children(&self) -> impl Iterator<Item = NodeRef<'a>> + 'a {
        self.children().filter(|c| c.is_element())
    }

    /// Concatenation of all descendant text.
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        for id in self.dom.subtree(self.id) {
            if let NodeKind::Text(t) = self.dom.kind(id) {
                out.push_str(t);
            }
        }
        out
    }

    /// Concatenation of the direct text children only.
    pub fn own_text(&self) -> String {
        let mut out = String::new();
        for c in self.children() {
            if let NodeKind::Text(t) = c.kind() {
                out.push_str(t);
            }
        }
        out
    }

    pub fn outer_html(&self) -> String {
        let mut out = String::new();
        self.dom.write_node(self.id, &mut out);
        out
    }

    pub fn depth(&self) -> usize {
        let mut d = 0;
        let mut cur = self.dom.parent(self.id);
        while let Some(p) = cur {
            d += 1;
            cur = self.dom.parent(p);
        }
        d
    }
}

/// Parses HTML the way a browser would, including implied `html`, `head`
/// and `body` elements. A blank input yields a document with no children.
pub fn parse_html(text: &str) -> Dom {
    let mut builder = DomBuilder::new();
    if text.trim().is_empty() {
        return builder.finish();
    }
    let html = Html::parse_document(text);
    for edge in html.tree.root().traverse() {
        use ego_tree::iter::Edge;
        match edge {
            Edge::Open(node) => match node.value() {
                scraper::Node::Element(el) => {
                    builder.open(
                        el.name(),
                        el.attrs().map(|(k, v)| (k.to_string(), v.to_string())),
                    );
                }
                scraper::Node::Text(t) => {
                    builder.text(t);
                }
                scraper::Node::Comment(c) => {
                    builder.comment(c);
                }
                _ => {}
            },
            Edge::Close(node) => {
                if node.value().is_element() {
                    builder.close();
                }
            }
        }
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_anchor() {
        let dom = parse_html("<a href='/login'>Signup / Login</a>");
        let anchors: Vec<_> = dom.elements().filter(|e| e.tag() == Some("a")).collect();
        assert_eq!(anchors.len(), 1);
        assert_eq!(anchors[0].text_content(), "Signup / Login");
        assert_eq!(anchors[0].attr("href"), Some("/login"));
        // everything else is the implied document skeleton
        let tags: Vec<_> = dom.elements().filter_map(|e| e.tag()).collect();
        assert_eq!(tags, vec!["html", "head", "body", "a"]);
    }

    #[test]
    fn empty_input_is_empty_root() {
        let dom = parse_html("");
        assert!(dom.is_empty());
        assert_eq!(dom.root().children().count(), 0);
        assert_eq!(dom.to_html(), "");
    }

    #[test]
    fn entities_voids_and_case() {
        let dom = parse_html("<DIV ID=X>a &amp; b<br><INPUT Name=q></DIV>");
        let div = dom.elements().find(|e| e.tag() == Some("div")).unwrap();
        assert_eq!(div.attr("id"), Some("X"));
        assert_eq!(div.own_text(), "a & b");
        let input = dom.elements().find(|e| e.tag() == Some("input")).unwrap();
        assert_eq!(input.attr("name"), Some("q"));
        assert_eq!(input.children().count(), 0);
        assert_eq!(
            div.outer_html(),
            "<div id=\"X\">a &amp; b<br><input name=\"q\"></div>"
        );
    }

    #[test]
    fn preorder_ids_and_subtree_ranges() {
        let dom = parse_html("<div><p>x</p><p>y</p></div><span></span>");
        let ids: Vec<_> = dom.elements().map(|e| e.id().0).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        let div = dom.elements().find(|e| e.tag() == Some("div")).unwrap();
        let inside: Vec<_> = dom.subtree(div.id()).filter_map(|id| dom.get(id).tag()).collect();
        assert_eq!(inside, vec!["div", "p", "p"]);
    }

    #[test]
    fn serialization_reparses_to_same_shape() {
        let src = "<html><head><title>t</title></head><body><form id=\"f\"><input type=\"text\" value=\"a&quot;b\"><textarea>x &lt; y</textarea></form><!-- c --></body></html>";
        let dom = parse_html(src);
        let again = parse_html(&dom.to_html());
        assert_eq!(dom.to_html(), again.to_html());
    }

    #[test]
    fn builder_merges_adjacent_text() {
        let mut b = DomBuilder::new();
        b.open("p", Vec::<(String, String)>::new());
        b.text("a");
        b.text("b");
        b.close();
        let dom = b.finish();
        let p = dom.elements().next().unwrap();
        assert_eq!(p.children().count(), 1);
        assert_eq!(p.own_text(), "ab");
    }
}
