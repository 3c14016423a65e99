//! Command-line surface. Every subcommand maps onto the stage functions in
//! [`crate::pipeline`]; exit codes are 0, 1 (stage), 2 (lint), 3 (config).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use genia_core::crawler::Crawler;
use genia_core::gateway::TranscriptMode;
use genia_core::metrics::{aggregate, ingest_counts, render_report, ReportFormat};
use genia_core::scenario::slugify;
use genia_core::scriptgen::{error_count, parse_robot};
use genia_core::selector::{classify, evaluate, parse_html, parse_xpath};

use crate::config::Config;
use crate::pipeline::{
    case_id_from_path, read_scenario, read_spec, read_text, write_file, CaseOutcome, Context, StageError,
    EXIT_CONFIG, EXIT_LINT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderMode {
    Live,
    Record,
    Replay,
}

impl From<ProviderMode> for TranscriptMode {
    fn from(m: ProviderMode) -> Self {
        match m {
            ProviderMode::Live => TranscriptMode::Live,
            ProviderMode::Record => TranscriptMode::Record,
            ProviderMode::Replay => TranscriptMode::Replay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Md,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "genia", version, about = "Turns natural-language E2E scenarios into Robot Framework scripts")]
pub struct Cli {
    /// JSON config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where model answers come from.
    #[arg(long, global = true, value_enum, default_value = "live")]
    pub provider: ProviderMode,
    /// Directory holding `<case>.<stage>.transcript.json` files.
    #[arg(long, global = true)]
    pub transcripts: Option<PathBuf>,
    /// Directory of stored page snapshots and an optional `pages.json` manifest.
    #[arg(long, global = true)]
    pub snapshot_dir: Option<PathBuf>,
    /// Never fetch pages; use stored snapshots only.
    #[arg(long, global = true)]
    pub offline: bool,
    /// Build Level 1 with the rule-based modularizer instead of the model.
    #[arg(long, global = true)]
    pub baseline_modularizer: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline for one or more scenario files.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Scenario files processed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Scenario file to Level-1 specification.
    Modularize {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fetch (or with --offline, check) a snapshot for every module URL.
    Crawl {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Level-1 specification to Level-2 specification.
    Extract {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Level-2 specification to the refined specification and validation report.
    Refine {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refined specification to a Robot Framework script.
    Emit {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Static checks on a Robot Framework script.
    Lint {
        script: PathBuf,
        /// Specification the script was generated from, for locator checks.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Directory for the `<case>.lint.json` report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an XPath against an HTML file.
    XpathEval { html: PathBuf, expr: String },
    /// Aggregate annotated per-case counts into the results table.
    Evaluate {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: FormatArg,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<Config, StageError> {
    match path {
        Some(p) => Config::load(p).map_err(StageError::config),
        None => Ok(Config::default()),
    }
}

/// Stages that never call the model get a provider-less context, so they
/// run without `GENIA_API_KEY`.
fn context(cli: &Cli, needs_model: bool) -> Result<Context, StageError> {
    let config = load_config(cli.config.as_deref())?;
    let mut ctx = if needs_model {
        Context::from_config(config, cli.provider.into())?
    } else {
        Context::with_provider(config, TranscriptMode::Replay, None)?
    };
    ctx.transcripts_dir = cli.transcripts.clone();
    ctx.snapshot_dir = cli.snapshot_dir.clone();
    ctx.offline = cli.offline;
    ctx.baseline = cli.baseline_modularizer;
    Ok(ctx)
}

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn execute(cli: &Cli) -> Result<u8, StageError> {
    match &cli.command {
        Command::Run { scenarios, out, jobs } => {
            let ctx = context(cli, true)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads((*jobs).max(1))
                .build()
                .map_err(StageError::config)?;
            let results: Vec<Result<CaseOutcome, StageError>> =
                pool.install(|| scenarios.par_iter().map(|s| ctx.run_case(s, out)).collect());
            let mut code = 0;
            for (path, r) in scenarios.iter().zip(results) {
                let c = match r {
                    Ok(outcome) => {
                        report_findings(&outcome);
                        println!("{}: {}", outcome.id, outcome.dir.display());
                        outcome.exit_code()
                    }
                    Err(e) => {
                        eprintln!("error: {}: {e}", path.display());
                        e.code
                    }
                };
                code = code.max(c);
            }
            Ok(code)
        }
        Command::Modularize { scenario, out } => {
            let ctx = context(cli, !cli.baseline_modularizer)?;
            let sc = read_scenario(scenario)?;
            let id = slugify(&sc.title);
            ctx.modularize_stage(&sc, &id, out)?;
            Ok(0)
        }
        Command::Crawl { spec, out } => {
            let ctx = context(cli, false)?;
            let s = read_spec(spec, "crawl")?;
            let dir = out.clone().unwrap_or_else(|| parent_of(spec));
            let store = ctx.store_for(&dir);
            if ctx.offline {
                for snap in ctx.snapshots(&s, &store)? {
                    println!("{}: {} characters after pruning", snap.url, snap.pruned_html.chars().count());
                }
            } else {
                let crawler = Crawler::new(ctx.config.crawler_config()).map_err(|e| StageError::new("crawl", e))?;
                for m in &s.modules {
                    let snap = crawler.fetch(&m.url).map_err(|e| StageError::new("crawl", e))?;
                    let path = store.save(&snap).map_err(|e| StageError::new("crawl", e))?;
                    println!("{}: {}", snap.url, path.display());
                }
            }
            Ok(0)
        }
        Command::Extract { spec, out } => {
            let ctx = context(cli, true)?;
            let s = read_spec(spec, "extract")?;
            let id = case_id_from_path(spec, Some(&s));
            let dir = out.clone().unwrap_or_else(|| parent_of(spec));
            let snaps = ctx.snapshots(&s, &ctx.store_for(&dir))?;
            ctx.extract_stage(&s, &snaps, &id, &dir)?;
            Ok(0)
        }
        Command::Refine { spec, out } => {
            let ctx = context(cli, true)?;
            let s = read_spec(spec, "refine")?;
            let id = case_id_from_path(spec, Some(&s));
            let dir = out.clone().unwrap_or_else(|| parent_of(spec));
            let snaps = ctx.snapshots(&s, &ctx.store_for(&dir))?;
            ctx.refine_stage(&s, &snaps, &id, &dir)?;
            Ok(0)
        }
        Command::Emit { spec, out } => {
            let ctx = context(cli, true)?;
            let s = read_spec(spec, "generate")?;
            let id = case_id_from_path(spec, Some(&s));
            let dir = out.clone().unwrap_or_else(|| parent_of(spec));
            ctx.generate_stage(&s, &id, &dir)?;
            Ok(0)
        }
        Command::Lint { script, spec, out } => {
            let ctx = context(cli, false)?;
            let text = read_text(script, "lint")?;
            let parsed = parse_robot(&text).map_err(|e| StageError::new("lint", format!("{}: {e}", script.display())))?;
            let spec = spec.as_deref().map(|p| read_spec(p, "lint")).transpose()?;
            let id = case_id_from_path(script, spec.as_ref());
            let findings = ctx.lint_stage(&parsed, spec.as_ref(), &id, out.as_deref())?;
            for f in &findings {
                println!("{}: {f}", script.display());
            }
            Ok(if error_count(&findings) > 0 { EXIT_LINT } else { 0 })
        }
        Command::XpathEval { html, expr } => {
            let text = read_text(html, "xpath-eval")?;
            let parsed = parse_xpath(expr).map_err(|e| StageError::new("xpath-eval", e))?;
            let dom = parse_html(&text);
            let matches = evaluate(&parsed, &dom);
            println!("{} match(es), {}", matches.len(), classify(&parsed, &dom));
            for m in matches {
                println!("{}", m.outer_html());
            }
            Ok(0)
        }
        Command::Evaluate { counts, format, out } => {
            let stage = "evaluate";
            let cases = ingest_counts(counts).map_err(|e| StageError::new(stage, e))?;
            let report = aggregate(&cases).map_err(|e| StageError::new(stage, e))?;
            let fmt = match format {
                FormatArg::Md => ReportFormat::Markdown,
                FormatArg::Csv => ReportFormat::Csv,
            };
            let text = render_report(&report, fmt);
            match out {
                Some(p) => write_file(p, &text, stage)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn report_findings(outcome: &CaseOutcome) {
    for f in &outcome.findings {
        eprintln!("{}: {f}", outcome.id);
    }
}
