//! Page snapshots: static fetch or file load, pruning to an
//! interaction-relevant skeleton, and a content-addressed snapshot store.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::selector::dom::{escape_attr, escape_text, is_void, Dom, DomBuilder, NodeId, NodeKind, RAW_TEXT_ELEMENTS};
use crate::selector::parse_html;

pub const DEFAULT_PAGE_BUDGET: usize = 200_000;
pub const DEFAULT_FETCH_TIMEOUT: Duration = Duration::from_secs(30);
pub const DESKTOP_USER_AGENT: &str =
    "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/124.0 Safari/537.36";
/// Longest text node kept outside interactive elements, in characters.
pub const TEXT_LIMIT: usize = 120;
pub const ELLIPSIS: &str = "…";

/// Elements whose presence and attributes pruning must never change.
pub const INTERACTIVE_TAGS: &[&str] = &["a", "button", "input", "select", "textarea", "form", "label"];
/// Elements whose visible text is part of their identity; text below them is never shortened.
const TEXT_PROTECTED_TAGS: &[&str] = &["a", "button", "input", "select", "textarea", "label"];
const REMOVED_TAGS: &[&str] = &["script", "style", "noscript", "svg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnapshotSource {
    Live,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSnapshot {
    pub url: String,
    pub fetched_at: DateTime<Utc>,
    pub http_status: u16,
    pub raw_html: String,
    pub pruned_html: String,
    pub source: SnapshotSource,
}

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("fetching {url} failed ({})", status.map_or_else(|| reason.clone(), |s| format!("HTTP {s}")))]
    Fetch {
        url: String,
        status: Option<u16>,
        reason: String,
    },
    #[error("{url} is not HTML (content-type {content_type})")]
    NonHtmlContent { url: String, content_type: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid URL '{0}'")]
    InvalidUrl(String),
    #[error("snapshot store: {0}")]
    Store(String),
    #[error("no offline snapshot for {0}")]
    NoSnapshot(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CrawlError + '_ {
    move |source| CrawlError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What pruning had to do to meet the budget.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub html: String,
    pub truncated_texts: usize,
    pub hollowed: usize,
    pub removed_shells: usize,
    /// The serialized page was cut at the budget as a last resort.
    pub hard_truncated: bool,
}

pub fn prune(raw_html: &str, budget: usize) -> String {
    prune_report(raw_html, budget).html
}

fn tag(dom: &Dom, id: NodeId) -> Option<&str> {
    match dom.kind(id) {
        NodeKind::Element { tag, .. } => Some(tag),
        _ => None,
    }
}

fn has_ancestor_in(dom: &Dom, id: NodeId, tags: &[&str]) -> bool {
    let mut cur = dom.parent(id);
    while let Some(p) = cur {
        if tag(dom, p).is_some_and(|t| tags.contains(&t)) {
            return true;
        }
        cur = dom.parent(p);
    }
    false
}

/// Removes script/style/noscript/svg and comments, and shortens long
/// text outside interactive elements.
fn clean(dom: &Dom, truncated: &mut usize) -> Dom {
    let mut b = DomBuilder::new();
    fn walk(dom: &Dom, id: NodeId, protected: bool, b: &mut DomBuilder, truncated: &mut usize) {
        for &c in dom.children(id) {
            match dom.kind(c) {
                NodeKind::Element { tag, attrs } => {
                    if REMOVED_TAGS.contains(&tag.as_str()) {
                        continue;
                    }
                    b.open(tag, attrs.iter().map(|(k, v)| (k.as_str(), v.as_str())));
                    walk(dom, c, protected || TEXT_PROTECTED_TAGS.contains(&tag.as_str()), b, truncated);
                    b.close();
                }
                NodeKind::Text(t) => {
                    if !protected && t.chars().count() > TEXT_LIMIT {
                        *truncated += 1;
                        let mut s: String = t.chars().take(TEXT_LIMIT).collect();
                        s.push_str(ELLIPSIS);
                        b.text(&s);
                    } else {
                        b.text(t);
                    }
                }
                NodeKind::Comment(_) | NodeKind::Document => {}
            }
        }
    }
    walk(dom, NodeId(0), false, &mut b, truncated);
    b.finish()
}

fn tag_cost(tag: &str, attrs: &[(String, String)]) -> usize {
    let mut s = String::new();
    for (k, v) in attrs {
        s.push(' ');
        s.push_str(k);
        s.push_str("=\"");
        escape_attr(v, &mut s);
        s.push('"');
    }
    let close = if is_void(tag) { 0 } else { tag.len() + 3 };
    tag.len() + 2 + s.chars().count() + close
}

fn shell_attrs(attrs: &[(String, String)]) -> Vec<(String, String)> {
    attrs.iter().filter(|(k, _)| k == "id").cloned().collect()
}

fn text_cost(dom: &Dom, id: NodeId, text: &str) -> usize {
    let raw = dom
        .parent(id)
        .and_then(|p| tag(dom, p))
        .is_some_and(|t| RAW_TEXT_ELEMENTS.contains(&t));
    if raw {
        text.chars().count()
    } else {
        let mut s = String::new();
        escape_text(text, &mut s);
        s.chars().count()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Fate {
    Keep,
    Hollow,
    Remove,
}

/// Prunes a page and reports which fallbacks were needed. A pure function
/// of its inputs.
pub fn prune_report(raw_html: &str, budget: usize) -> PruneReport {
    let mut report = PruneReport::default();
    let dom = clean(&parse_html(raw_html), &mut report.truncated_texts);
    let n = dom.len();

    // Serialized length of every subtree, in characters.
    let mut len = vec![0usize; n];
    for i in (1..n).rev() {
        let id = NodeId(i);
        let own = match dom.kind(id) {
            NodeKind::Element { tag, attrs } => tag_cost(tag, attrs),
            NodeKind::Text(t) => text_cost(&dom, id, t),
            _ => 0,
        };
        len[i] += own;
        if let Some(p) = dom.parent(id) {
            len[p.0] += len[i];
        }
    }
    let mut total: usize = dom.children(NodeId(0)).iter().map(|c| len[c.0]).sum();

    let mut fate = vec![Fate::Keep; n];
    if total > budget {
        // Candidates: non-interactive elements with no interactive element
        // above or below them.
        let mut interactive_below = vec![false; n];
        for i in (1..n).rev() {
            let id = NodeId(i);
            let here = tag(&dom, id).is_some_and(|t| INTERACTIVE_TAGS.contains(&t));
            if here {
                interactive_below[i] = true;
            }
            if interactive_below[i] {
                if let Some(p) = dom.parent(id) {
                    interactive_below[p.0] = true;
                }
            }
        }
        let mut depth = vec![0usize; n];
        for i in 1..n {
            depth[i] = dom.parent(NodeId(i)).map_or(0, |p| depth[p.0] + 1);
        }
        let mut candidates: Vec<usize> = (1..n)
            .filter(|&i| {
                let id = NodeId(i);
                tag(&dom, id).is_some()
                    && !interactive_below[i]
                    && !has_ancestor_in(&dom, id, INTERACTIVE_TAGS)
            })
            .collect();
        candidates.sort_by(|&a, &b| depth[b].cmp(&depth[a]).then(b.cmp(&a)));

        let shrink = |len: &mut Vec<usize>, node: usize, delta: usize| {
            let mut cur = Some(NodeId(node));
            while let Some(c) = cur {
                len[c.0] -= delta;
                cur = dom.parent(c);
            }
        };

        for &c in &candidates {
            if total <= budget {
                break;
            }
            let NodeKind::Element { tag, attrs } = dom.kind(NodeId(c)) else { continue };
            let shell = tag_cost(tag, &shell_attrs(attrs));
            let delta = len[c] - shell;
            if delta == 0 {
                continue;
            }
            shrink(&mut len, c, delta);
            total -= delta;
            fate[c] = Fate::Hollow;
            report.hollowed += 1;
        }
        for &c in &candidates {
            if total <= budget {
                break;
            }
            if fate[c] == Fate::Remove || is_inside_fate(&dom, &fate, c) {
                continue;
            }
            let delta = len[c];
            shrink(&mut len, c, delta);
            total -= delta;
            fate[c] = Fate::Remove;
            report.removed_shells += 1;
        }
    }

    let mut b = DomBuilder::new();
    fn emit(dom: &Dom, id: NodeId, fate: &[Fate], b: &mut DomBuilder) {
        for &c in dom.children(id) {
            match (dom.kind(c), fate[c.0]) {
                (_, Fate::Remove) => {}
                (NodeKind::Element { tag, attrs }, f) => {
                    if f == Fate::Hollow {
                        b.open(tag, shell_attrs(attrs));
                    } else {
                        b.open(tag, attrs.iter().map(|(k, v)| (k.as_str(), v.as_str())));
                        emit(dom, c, fate, b);
                    }
                    b.close();
                }
                (NodeKind::Text(t), _) => {
                    b.text(t);
                }
                _ => {}
            }
        }
    }
    emit(&dom, NodeId(0), &fate, &mut b);
    let mut html = b.finish().to_html();
    debug_assert_eq!(html.chars().count(), total);

    if total > budget {
        log::warn!("page still has {total} characters of interactive markup; cutting at {budget}");
        html = html.chars().take(budget).collect();
        report.hard_truncated = true;
    }
    report.html = html;
    report
}

/// True when an ancestor of `node` is already hollowed or removed, so the
/// node itself is no longer serialized.
fn is_inside_fate(dom: &Dom, fate: &[Fate], node: usize) -> bool {
    let mut cur = dom.parent(NodeId(node));
    while let Some(p) = cur {
        if fate[p.0] != Fate::Keep {
            return true;
        }
        cur = dom.parent(p);
    }
    false
}

/// Identity of an interactive element as pruning must preserve it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InteractiveSignature {
    pub tag: String,
    pub id: Option<String>,
    pub name: Option<String>,
    pub kind: Option<String>,
    pub href: Option<String>,
    pub class: Option<String>,
    pub text: String,
}

/// Signatures of every rendered interactive element, in document order.
/// Elements under svg or noscript are not rendered and are skipped, and a
/// form's text is left out because it is the text of its whole body.
pub fn interactive_signatures(html: &str) -> Vec<InteractiveSignature> {
    let dom = parse_html(html);
    let mut out = Vec::new();
    for el in dom.elements() {
        let t = el.tag().unwrap_or_default();
        if !INTERACTIVE_TAGS.contains(&t) || has_ancestor_in(&dom, el.id(), REMOVED_TAGS) {
            continue;
        }
        let text = if t == "form" { String::new() } else { visible_text(&dom, el.id()) };
        let attr = |k: &str| el.attr(k).map(str::to_string);
        out.push(InteractiveSignature {
            tag: t.to_string(),
            id: attr("id"),
            name: attr("name"),
            kind: attr("type"),
            href: attr("href"),
            class: attr("class"),
            text,
        });
    }
    out
}

fn visible_text(dom: &Dom, id: NodeId) -> String {
    let mut s = String::new();
    let mut skip_until = 0;
    for d in dom.subtree(id) {
        if d.0 < skip_until {
            continue;
        }
        match dom.kind(d) {
            NodeKind::Element { tag, .. } if REMOVED_TAGS.contains(&tag.as_str()) => {
                skip_until = dom.subtree_end(d);
            }
            NodeKind::Text(t) => s.push_str(t),
            _ => {}
        }
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn check_url(url: &str) -> Result<(), CrawlError> {
    match url::Url::parse(url) {
        Ok(u) if u.scheme() == "http" || u.scheme() == "https" => Ok(()),
        _ => Err(CrawlError::InvalidUrl(url.to_string())),
    }
}

/// Builds a file-sourced snapshot; `fetched_at` is the file's modification time.
pub fn load_snapshot_from_file(path: &Path, url: &str, budget: usize) -> Result<PageSnapshot, CrawlError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let raw_html = String::from_utf8(bytes).map_err(|e| CrawlError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    if raw_html.trim().is_empty() {
        log::warn!("{} is empty; using an empty page for {url}", path.display());
    }
    let fetched_at = fs::metadata(path)
        .and_then(|m| m.modified())
        .map(DateTime::<Utc>::from)
        .unwrap_or_else(|_| Utc::now());
    let pruned_html = prune(&raw_html, budget);
    Ok(PageSnapshot {
        url: url.to_string(),
        fetched_at,
        http_status: 200,
        raw_html,
        pruned_html,
        source: SnapshotSource::File,
    })
}

#[derive(Debug, Clone)]
pub struct CrawlerConfig {
    pub timeout: Duration,
    pub user_agent: String,
    pub budget: usize,
}

impl Default for CrawlerConfig {
    fn default() -> Self {
        CrawlerConfig {
            timeout: DEFAULT_FETCH_TIMEOUT,
            user_agent: DESKTOP_USER_AGENT.to_string(),
            budget: DEFAULT_PAGE_BUDGET,
        }
    }
}

/// Static HTTP fetcher. No cookies, no script execution.
pub struct Crawler {
    client: reqwest::blocking::Client,
    config: CrawlerConfig,
}

impl Crawler {
    pub fn new(config: CrawlerConfig) -> Result<Self, CrawlError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .user_agent(config.user_agent.clone())
            .build()
            .map_err(|e| CrawlError::Fetch {
                url: String::new(),
                status: None,
                reason: e.to_string(),
            })?;
        Ok(Crawler { client, config })
    }

    pub fn config(&self) -> &CrawlerConfig {
        &self.config
    }

    pub fn fetch(&self, url: &str) -> Result<PageSnapshot, CrawlError> {
        check_url(url)?;
        let transport = |e: reqwest::Error| CrawlError::Fetch {
            url: url.to_string(),
            status: None,
            reason: e.to_string(),
        };
        let response = self.client.get(url).send().map_err(transport)?;
        let status = response.status();
        if !status.is_success() {
            return Err(CrawlError::Fetch {
                url: url.to_string(),
                status: Some(status.as_u16()),
                reason: status.to_string(),
            });
        }
        if let Some(ct) = response.headers().get(reqwest::header::CONTENT_TYPE) {
            let ct = ct.to_str().unwrap_or_default().to_ascii_lowercase();
            if !ct.contains("html") {
                return Err(CrawlError::NonHtmlContent {
                    url: url.to_string(),
                    content_type: ct,
                });
            }
        }
        let raw_html = response.text().map_err(transport)?;
        let pruned_html = prune(&raw_html, self.config.budget);
        Ok(PageSnapshot {
            url: url.to_string(),
            fetched_at: Utc::now(),
            http_status: status.as_u16(),
            raw_html,
            pruned_html,
            source: SnapshotSource::Live,
        })
    }
}

/// Directory of `<sha256(url)>.json` snapshots, optionally with a
/// `pages.json` manifest mapping URLs to HTML files in the same directory.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    dir: PathBuf,
}

pub const MANIFEST_NAME: &str = "pages.json";

pub fn url_key(url: &str) -> String {
    hex::encode(Sha256::digest(url.as_bytes()))
}

impl SnapshotStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SnapshotStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, url: &str) -> PathBuf {
        self.dir.join(format!("{}.json", url_key(url)))
    }

    pub fn save(&self, snapshot: &PageSnapshot) -> Result<PathBuf, CrawlError> {
        let path = self.path_for(&snapshot.url);
        let json = serde_json::to_string_pretty(snapshot).map_err(|e| CrawlError::Store(e.to_string()))?;
        write_atomic(&path, json.as_bytes()).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn load(&self, url: &str) -> Result<Option<PageSnapshot>, CrawlError> {
        let path = self.path_for(url);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let snap: PageSnapshot =
            serde_json::from_str(&text).map_err(|e| CrawlError::Store(format!("{}: {e}", path.display())))?;
        Ok(Some(snap))
    }

    pub fn manifest(&self) -> Result<BTreeMap<String, PathBuf>, CrawlError> {
        let path = self.dir.join(MANIFEST_NAME);
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let raw: BTreeMap<String, String> =
            serde_json::from_str(&text).map_err(|e| CrawlError::Store(format!("{}: {e}", path.display())))?;
        Ok(raw.into_iter().map(|(u, f)| (u, self.dir.join(f))).collect())
    }

    /// Offline lookup: a stored snapshot first, then the manifest. Never writes.
    pub fn offline(&self, url: &str, budget: usize) -> Result<PageSnapshot, CrawlError> {
        if let Some(s) = self.load(url)? {
            return Ok(s);
        }
        let manifest = self.manifest()?;
        let trimmed = url.trim_end_matches('/');
        let file = manifest
            .iter()
            .find(|(u, _)| u.trim_end_matches('/') == trimmed)
            .map(|(_, f)| f)
            .ok_or_else(|| CrawlError::NoSnapshot(url.to_string()))?;
        load_snapshot_from_file(file, url, budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selector::{evaluate, parse_xpath};

    #[test]
    fn drops_scripts_keeps_interactive() {
        let script = "x".repeat(1_000_000);
        let html = format!(
            "<html><head><script>{script}</script><style>p{{}}</style></head><body>\
             <!-- note --><form id=\"f\"><input name=\"q\" type=\"text\"><button type=\"submit\">Go</button></form>\
             <noscript>enable js</noscript><svg><path d=\"M0\"/></svg></body></html>"
        );
        let pruned = prune(&html, DEFAULT_PAGE_BUDGET);
        assert!(!pruned.contains("script"));
        assert!(!pruned.contains("<style"));
        assert!(!pruned.contains("<!--"));
        assert!(!pruned.contains("svg"));
        assert!(!pruned.contains("noscript"));
        assert_eq!(interactive_signatures(&html), interactive_signatures(&pruned));
        assert!(pruned.contains("<input name=\"q\" type=\"text\">"));
    }

    #[test]
    fn small_page_is_raw_minus_scripts() {
        let raw = "<html><head><title>t</title><script>var a;</script></head><body><p class=\"x\">hi</p></body></html>";
        let expected = "<html><head><title>t</title></head><body><p class=\"x\">hi</p></body></html>";
        assert_eq!(prune(raw, DEFAULT_PAGE_BUDGET), expected);
    }

    #[test]
    fn long_text_gets_ellipsis_except_in_links() {
        let long = "w".repeat(300);
        let raw = format!("<p>{long}</p><a href=\"/x\">{long}</a>");
        let pruned = prune(&raw, DEFAULT_PAGE_BUDGET);
        assert!(pruned.contains(&format!("<p>{}{ELLIPSIS}</p>", "w".repeat(120))));
        assert!(pruned.contains(&format!(">{long}</a>")));
    }

    #[test]
    fn hollowing_keeps_positions() {
        let filler: String = (0..200).map(|i| format!("<p>paragraph {i} with some words</p>")).collect();
        let raw = format!(
            "<div id=\"header\"><div>{filler}</div><div><ul><li><a href=\"/login\">Signup / Login</a></li></ul></div></div>"
        );
        let report = prune_report(&raw, 500);
        assert!(report.hollowed > 0);
        assert!(!report.hard_truncated);
        assert!(report.html.chars().count() <= 500);
        let dom = parse_html(&report.html);
        let hits = evaluate(&parse_xpath("//*[@id='header']/div[2]/ul/li[1]/a").unwrap(), &dom);
        assert_eq!(hits.len(), 1);
        assert_eq!(interactive_signatures(&raw), interactive_signatures(&report.html));
    }

    #[test]
    fn shells_removed_when_hollowing_is_not_enough() {
        let filler: String = (0..400).map(|_| "<span></span>").collect();
        let raw = format!("{filler}<a href=\"/a\">A</a>");
        let report = prune_report(&raw, 120);
        assert!(report.removed_shells > 0);
        assert!(report.html.chars().count() <= 120, "{}", report.html.chars().count());
        assert_eq!(interactive_signatures(&raw), interactive_signatures(&report.html));
    }

    #[test]
    fn last_resort_cut() {
        let links: String = (0..50).map(|i| format!("<a href=\"/{i}\">link {i}</a>")).collect();
        let report = prune_report(&links, 100);
        assert!(report.hard_truncated);
        assert_eq!(report.html.chars().count(), 100);
    }

    #[test]
    fn pruning_is_deterministic() {
        let raw = "<div><p>a</p><p>b</p></div><button>x</button>";
        assert_eq!(prune_report(raw, 40), prune_report(raw, 40));
    }

    #[test]
    fn file_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("login.html");
        fs::write(&p, "<form><input name='email'></form>").unwrap();
        let s = load_snapshot_from_file(&p, "https://a.test/login", DEFAULT_PAGE_BUDGET).unwrap();
        assert_eq!(s.source, SnapshotSource::File);
        assert_eq!(s.http_status, 200);
        assert!(s.pruned_html.contains("name=\"email\""));

        let empty = dir.path().join("empty.html");
        fs::write(&empty, "").unwrap();
        let s = load_snapshot_from_file(&empty, "https://a.test/", DEFAULT_PAGE_BUDGET).unwrap();
        assert_eq!(s.pruned_html, "");

        let missing = load_snapshot_from_file(&dir.path().join("nope.html"), "https://a.test/", 10);
        assert!(matches!(missing, Err(CrawlError::Io { .. })));
    }

    #[test]
    fn store_round_trip_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let store = SnapshotStore::new(dir.path());
        let page = dir.path().join("home.html");
        fs::write(&page, "<a href='/login'>Signup / Login</a>").unwrap();
        fs::write(dir.path().join(MANIFEST_NAME), r#"{"https://a.test": "home.html"}"#).unwrap();
        let snap = store.offline("https://a.test/", DEFAULT_PAGE_BUDGET).unwrap();
        assert!(snap.pruned_html.contains("Signup / Login"));
        assert!(!store.path_for("https://a.test/").exists());
        let path = store.save(&snap).unwrap();
        assert_eq!(path.file_name().unwrap().to_str().unwrap(), format!("{}.json", url_key("https://a.test/")));
        assert_eq!(store.load("https://a.test/").unwrap().unwrap(), snap);
        assert!(matches!(store.offline("https://b.test/", 10), Err(CrawlError::NoSnapshot(_))));
    }
}
