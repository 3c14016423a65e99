//! Fixture paths and a scripted model for the CLI tests.

#![allow(dead_code)]

pub mod pages;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use genia_core::gateway::{ChatProvider, ChatRequest, GatewayError};

pub const GOLDEN_ID: &str = "login-user-with-incorrect-email-and-password";
pub const HOME_URL: &str = "http://automationexercise.com";
pub const LOGIN_URL: &str = "https://automationexercise.com/login";

pub fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

pub fn golden_path(rel: &str) -> PathBuf {
    golden().join(rel)
}

pub fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Answers by the first rule whose needles all occur in the request.
pub struct ScriptedProvider {
    rules: Vec<(Vec<String>, String)>,
    pub calls: AtomicUsize,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<(Vec<String>, String)>) -> Self {
        ScriptedProvider {
            rules,
            calls: AtomicUsize::new(0),
        }
    }

    /// The model answers behind the golden transcripts, keyed on the prompt
    /// persona and, for page prompts, the module URL.
    pub fn golden() -> Self {
        let response = |name: &str| read(&golden_path(&format!("responses/{name}")));
        let url = |u: &str| format!("\"url\": \"{u}\"");
        let rule = |needles: &[&str], name: &str| (needles.iter().map(|s| s.to_string()).collect(), response(name));
        ScriptedProvider::new(vec![
            rule(&["highly skilled software test automation engineer"], "modularize.txt"),
            rule(&["test automation manager", &url(HOME_URL)], "extract-home.txt"),
            rule(&["test automation manager", &url(LOGIN_URL)], "extract-login.txt"),
            rule(&["senior E2E test engineer", &url(HOME_URL)], "refine-home.txt"),
            rule(&["senior E2E test engineer", &url(LOGIN_URL)], "refine-login.txt"),
            rule(&["experienced test automation engineer"], "generate.txt"),
        ])
    }
}

impl ChatProvider for ScriptedProvider {
    fn send(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text: String = request.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        self.rules
            .iter()
            .find(|(needles, _)| needles.iter().all(|n| text.contains(n.as_str())))
            .map(|(_, r)| r.clone())
            .ok_or_else(|| GatewayError::Provider {
                status: None,
                body: "no scripted answer".into(),
            })
    }
}

/// Global flags for an offline replay over the golden fixtures.
pub fn replay_flags() -> Vec<String> {
    vec![
        "--provider".into(),
        "replay".into(),
        "--transcripts".into(),
        golden_path("transcripts").display().to_string(),
        "--snapshot-dir".into(),
        golden_path("snapshots").display().to_string(),
        "--offline".into(),
    ]
}

pub fn genia(args: &[String]) -> u8 {
    let mut all = vec!["genia".to_string()];
    all.extend(args.iter().cloned());
    genia_cli::main_with_args(all)
}

/// Relative path to contents, for every file under `dir`.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}
