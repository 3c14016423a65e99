//! Stage functions shared by `run` and the per-stage subcommands, so that a
//! full run and a chain of stage commands write the same bytes.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use genia_core::crawler::{CrawlError, Crawler, PageSnapshot, SnapshotStore};
use genia_core::extractor::{extract_elements, refine_elements, ExtractError, ValidationReport};
use genia_core::fsutil::write_atomic;
use genia_core::gateway::{ChatProvider, Gateway, GatewayError, HttpProvider, Transcript, TranscriptMode};
use genia_core::model::{parse_specification, serialize_specification, TestScenario, TestSpecification};
use genia_core::modularizer::{baseline_modularize_with, modularize, ModularizeError};
use genia_core::scenario::{parse_scenario, slugify};
use genia_core::scriptgen::{error_count, generate_script, lint, GeneratedScript, LintFinding, RobotScript, ScriptError, Whitelist};

use crate::config::Config;

pub const EXIT_STAGE: u8 = 1;
pub const EXIT_LINT: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;

pub const LEVEL1_SUFFIX: &str = ".level1.spec.json";
pub const EXTRACTED_SUFFIX: &str = ".extracted.spec.json";
pub const SPEC_SUFFIX: &str = ".spec.json";
pub const VALIDATION_SUFFIX: &str = ".validation.csv";
pub const ROBOT_SUFFIX: &str = ".robot";
pub const LINT_SUFFIX: &str = ".lint.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
    pub code: u8,
}

impl StageError {
    pub fn new(stage: &'static str, message: impl fmt::Display) -> Self {
        StageError {
            stage,
            message: message.to_string(),
            code: EXIT_STAGE,
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        StageError {
            stage: "config",
            message: message.to_string(),
            code: EXIT_CONFIG,
        }
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

pub struct Context {
    pub config: Config,
    pub mode: TranscriptMode,
    pub gateway: Gateway,
    pub whitelist: Whitelist,
    /// Transcript directory; each case's own directory when unset.
    pub transcripts_dir: Option<PathBuf>,
    /// Snapshot directory; `<case dir>/snapshots` when unset.
    pub snapshot_dir: Option<PathBuf>,
    pub offline: bool,
    pub baseline: bool,
}

impl Context {
    /// Replay never needs a provider; live and record build one from the
    /// config and `GENIA_API_KEY`.
    pub fn from_config(config: Config, mode: TranscriptMode) -> Result<Self, StageError> {
        let provider: Option<Arc<dyn ChatProvider>> = match mode {
            TranscriptMode::Replay => None,
            _ => {
                let http = HttpProvider::from_env(
                    &config.provider.base_url,
                    config.provider_timeout(),
                    config.retry_policy(),
                )
                .map_err(StageError::config)?;
                Some(Arc::new(http))
            }
        };
        Self::with_provider(config, mode, provider)
    }

    pub fn with_provider(
        config: Config,
        mode: TranscriptMode,
        provider: Option<Arc<dyn ChatProvider>>,
    ) -> Result<Self, StageError> {
        let prompts = config.prompts().map_err(StageError::config)?;
        let whitelist = config.whitelist().map_err(StageError::config)?;
        let gateway = Gateway::new(provider, config.gateway_settings(), prompts);
        Ok(Context {
            config,
            mode,
            gateway,
            whitelist,
            transcripts_dir: None,
            snapshot_dir: None,
            offline: false,
            baseline: false,
        })
    }

    pub fn transcript_path(&self, case_dir: &Path, id: &str, stage: &str) -> PathBuf {
        self.transcripts_dir
            .as_deref()
            .unwrap_or(case_dir)
            .join(format!("{id}.{stage}.transcript.json"))
    }

    /// Runs `f` with the stage's transcript. Record mode saves it afterwards,
    /// also when the stage failed.
    fn with_transcript<T>(
        &self,
        stage: &'static str,
        case_dir: &Path,
        id: &str,
        f: impl FnOnce(&Transcript) -> Result<T, StageError>,
    ) -> Result<T, StageError> {
        let path = self.transcript_path(case_dir, id, stage);
        let transcript = Transcript::open(self.mode, &path).map_err(|e| StageError::new(stage, e))?;
        let result = f(&transcript);
        if self.mode == TranscriptMode::Record {
            transcript.save(&path).map_err(|e| StageError::new(stage, e))?;
        }
        result
    }

    pub fn store_for(&self, case_dir: &Path) -> SnapshotStore {
        SnapshotStore::new(self.snapshot_dir.clone().unwrap_or_else(|| case_dir.join("snapshots")))
    }

    /// Offline: stored snapshot or manifest entry only. Otherwise a stored
    /// snapshot wins and a fetched one is saved.
    pub fn snapshot(&self, store: &SnapshotStore, url: &str) -> Result<PageSnapshot, StageError> {
        let crawl = |e: CrawlError| StageError::new("crawl", e);
        let budget = self.config.budgets.page_chars;
        if self.offline {
            return store.offline(url, budget).map_err(crawl);
        }
        if let Ok(s) = store.offline(url, budget) {
            return Ok(s);
        }
        let crawler = Crawler::new(self.config.crawler_config()).map_err(crawl)?;
        let snapshot = crawler.fetch(url).map_err(crawl)?;
        store.save(&snapshot).map_err(crawl)?;
        Ok(snapshot)
    }

    /// Snapshots for every distinct module URL, in module order.
    pub fn snapshots(&self, spec: &TestSpecification, store: &SnapshotStore) -> Result<Vec<PageSnapshot>, StageError> {
        let mut cache: HashMap<&str, PageSnapshot> = HashMap::new();
        let mut out = Vec::with_capacity(spec.modules.len());
        for m in &spec.modules {
            let s = match cache.get(m.url.as_str()) {
                Some(s) => s.clone(),
                None => {
                    let s = self.snapshot(store, &m.url)?;
                    cache.insert(&m.url, s.clone());
                    s
                }
            };
            out.push(s);
        }
        Ok(out)
    }

    pub fn modularize_stage(&self, scenario: &TestScenario, id: &str, dir: &Path) -> Result<TestSpecification, StageError> {
        let spec = if self.baseline {
            let outcome = baseline_modularize_with(scenario, &self.config.baseline_options());
            for w in &outcome.warnings {
                log::warn!("{id}: modularize: {w}");
            }
            outcome.spec
        } else {
            self.with_transcript("modularize", dir, id, |t| {
                modularize(scenario, &self.gateway, t).map_err(|e| {
                    if let Some(raw) = e.raw_response() {
                        save_raw(dir, id, "modularize", raw);
                    }
                    match e {
                        ModularizeError::Gateway(g) => gateway_error("modularize", g),
                        other => StageError::new("modularize", other),
                    }
                })
            })?
        };
        write_spec(&dir.join(format!("{id}{LEVEL1_SUFFIX}")), &spec, "modularize")?;
        Ok(spec)
    }

    pub fn extract_stage(
        &self,
        spec: &TestSpecification,
        snapshots: &[PageSnapshot],
        id: &str,
        dir: &Path,
    ) -> Result<TestSpecification, StageError> {
        let mut out = spec.clone();
        self.with_transcript("extract", dir, id, |t| {
            for (m, s) in out.modules.iter_mut().zip(snapshots) {
                *m = extract_elements(m, s, &self.gateway, t).map_err(|e| extract_error("extract", dir, id, e))?;
            }
            Ok(())
        })?;
        write_spec(&dir.join(format!("{id}{EXTRACTED_SUFFIX}")), &out, "extract")?;
        Ok(out)
    }

    pub fn refine_stage(
        &self,
        spec: &TestSpecification,
        snapshots: &[PageSnapshot],
        id: &str,
        dir: &Path,
    ) -> Result<(TestSpecification, ValidationReport), StageError> {
        let mut out = spec.clone();
        let mut report = ValidationReport::default();
        self.with_transcript("refine", dir, id, |t| {
            for (i, (m, s)) in out.modules.iter_mut().zip(snapshots).enumerate() {
                let outcome = refine_elements(m, s, &self.gateway, t).map_err(|e| extract_error("refine", dir, id, e))?;
                for w in &outcome.warnings {
                    log::warn!("{id}: refine: module {i}: {w}");
                }
                for r in &outcome.report.rejected {
                    log::warn!("{id}: refine: dropped {} ({})", r.expression, r.reason);
                }
                *m = outcome.module;
                report.extend_module(i, outcome.report);
            }
            Ok(())
        })?;
        write_spec(&dir.join(format!("{id}{SPEC_SUFFIX}")), &out, "refine")?;
        write_file(&dir.join(format!("{id}{VALIDATION_SUFFIX}")), &report.to_csv(), "refine")?;
        Ok((out, report))
    }

    pub fn generate_stage(&self, spec: &TestSpecification, id: &str, dir: &Path) -> Result<GeneratedScript, StageError> {
        let script = self.with_transcript("generate", dir, id, |t| {
            generate_script(spec, &self.gateway, t).map_err(|e| match e {
                ScriptError::Gateway(g) => gateway_error("generate", g),
                ScriptError::LlmOutputInvalid { ref raw } | ScriptError::ScriptInvalid { ref raw, .. } => {
                    save_raw(dir, id, "generate", raw);
                    StageError::new("generate", e)
                }
            })
        })?;
        write_file(&dir.join(format!("{id}{ROBOT_SUFFIX}")), &script.text, "generate")?;
        Ok(script)
    }

    pub fn lint_stage(
        &self,
        script: &RobotScript,
        spec: Option<&TestSpecification>,
        id: &str,
        dir: Option<&Path>,
    ) -> Result<Vec<LintFinding>, StageError> {
        let findings = lint(script, spec, &self.whitelist);
        if let Some(dir) = dir {
            write_file(&dir.join(format!("{id}{LINT_SUFFIX}")), &findings_json(&findings), "lint")?;
        }
        Ok(findings)
    }

    /// The whole pipeline for one scenario file, under `<out_root>/<case-id>/`.
    pub fn run_case(&self, scenario_path: &Path, out_root: &Path) -> Result<CaseOutcome, StageError> {
        let scenario = read_scenario(scenario_path)?;
        let id = slugify(&scenario.title);
        let dir = out_root.join(&id);
        fs::create_dir_all(&dir).map_err(|e| StageError::new("run", format!("{}: {e}", dir.display())))?;
        let level1 = self.modularize_stage(&scenario, &id, &dir)?;
        let store = self.store_for(&dir);
        let snapshots = self.snapshots(&level1, &store)?;
        let extracted = self.extract_stage(&level1, &snapshots, &id, &dir)?;
        let (spec, _) = self.refine_stage(&extracted, &snapshots, &id, &dir)?;
        let script = self.generate_stage(&spec, &id, &dir)?;
        let findings = self.lint_stage(&script.script, Some(&spec), &id, Some(&dir))?;
        Ok(CaseOutcome { id, dir, findings })
    }
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub id: String,
    pub dir: PathBuf,
    pub findings: Vec<LintFinding>,
}

impl CaseOutcome {
    pub fn exit_code(&self) -> u8 {
        if error_count(&self.findings) > 0 {
            EXIT_LINT
        } else {
            0
        }
    }
}

fn gateway_error(stage: &'static str, e: GatewayError) -> StageError {
    match e {
        GatewayError::NoApiKey | GatewayError::NoProvider | GatewayError::Template(_) | GatewayError::MissingSlot(_) => {
            StageError {
                code: EXIT_CONFIG,
                ..StageError::new(stage, e)
            }
        }
        other => StageError::new(stage, other),
    }
}

fn extract_error(stage: &'static str, dir: &Path, id: &str, e: ExtractError) -> StageError {
    match e {
        ExtractError::Gateway(g) => gateway_error(stage, g),
        ExtractError::LlmOutputInvalid { ref raw, .. } => {
            save_raw(dir, id, stage, raw);
            StageError::new(stage, e)
        }
        other => StageError::new(stage, other),
    }
}

/// Keeps an unusable model answer next to the artifacts for inspection.
fn save_raw(dir: &Path, id: &str, stage: &str, raw: &str) {
    let path = dir.join(format!("{id}.{stage}.raw.txt"));
    if let Err(e) = write_atomic(&path, raw.as_bytes()) {
        log::warn!("could not save {}: {e}", path.display());
    }
}

pub fn write_file(path: &Path, text: &str, stage: &'static str) -> Result<(), StageError> {
    write_atomic(path, text.as_bytes()).map_err(|e| StageError::new(stage, format!("{}: {e}", path.display())))
}

pub fn write_spec(path: &Path, spec: &TestSpecification, stage: &'static str) -> Result<(), StageError> {
    let mut text = serialize_specification(spec);
    text.push('\n');
    write_file(path, &text, stage)
}

pub fn findings_json(findings: &[LintFinding]) -> String {
    let mut text = serde_json::to_string_pretty(findings).expect("findings serialize");
    text.push('\n');
    text
}

pub fn read_text(path: &Path, stage: &'static str) -> Result<String, StageError> {
    fs::read_to_string(path).map_err(|e| StageError::new(stage, format!("{}: {e}", path.display())))
}

pub fn read_scenario(path: &Path) -> Result<TestScenario, StageError> {
    let text = read_text(path, "modularize")?;
    parse_scenario(&text).map_err(|e| StageError::new("modularize", format!("{}: {e}", path.display())))
}

pub fn read_spec(path: &Path, stage: &'static str) -> Result<TestSpecification, StageError> {
    let text = read_text(path, stage)?;
    parse_specification(&text).map_err(|e| StageError::new(stage, format!("{}: {e}", path.display())))
}

/// Case id of a stage input: its file name minus the artifact suffix, or
/// the slugified test case name when the name has no known suffix.
pub fn case_id_from_path(path: &Path, spec: Option<&TestSpecification>) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    for suffix in [LEVEL1_SUFFIX, EXTRACTED_SUFFIX, SPEC_SUFFIX, ROBOT_SUFFIX] {
        if let Some(stem) = name.strip_suffix(suffix).filter(|s| !s.is_empty()) {
            return stem.to_string();
        }
    }
    match spec {
        Some(s) => slugify(&s.test_case),
        None => slugify(name.split('.').next().unwrap_or("")),
    }
}
