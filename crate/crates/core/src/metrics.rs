//! Evaluation metrics over annotated per-case counts, and the aggregate
//! results table.
//!
//! Percentages are rounded half-up to integers per case. The General row
//! sums the counts and takes the half-up rounded mean of the per-case
//! integers; standard deviations (n-1) are over the same integers.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{field} is 0, so the metrics that divide by it are undefined")]
    DivisionByZeroDenominator { field: &'static str },
    #[error("at least two values are needed for a sample standard deviation")]
    InsufficientData,
    #[error("no cases to aggregate")]
    NoCases,
    #[error("CSV line {line}: {reason}")]
    CsvError { line: u64, reason: String },
    #[error("case {case_id}: {rule}")]
    InvariantViolation { case_id: String, rule: String },
}

/// Annotated counts for one test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub case_id: String,
    /// Elements expected, generated, correct.
    pub e: u64,
    pub g: u64,
    pub c: u64,
    /// Script lines and modified lines.
    pub loc: u64,
    pub ml: u64,
    /// Steps expected, generated, correct.
    pub es: u64,
    pub gs: u64,
    pub cs: u64,
}

impl CaseCounts {
    pub fn check(&self) -> Result<(), MetricsError> {
        let violation = |rule: &str| MetricsError::InvariantViolation {
            case_id: self.case_id.clone(),
            rule: rule.to_string(),
        };
        if self.c > self.g {
            return Err(violation("C must not exceed G"));
        }
        if self.cs > self.gs {
            return Err(violation("CS must not exceed GS"));
        }
        if self.ml > self.loc {
            return Err(violation("ML must not exceed LOC"));
        }
        Ok(())
    }
}

/// Integer percentages of one case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub element_coverage: u64,
    pub element_precision: u64,
    pub element_recall: u64,
    pub modification_rate: u64,
    pub step_coverage: u64,
    pub exec_precision: u64,
    pub exec_recall: u64,
}

impl CaseMetrics {
    /// Values in results-table column order: G/E, C/G, C/E, MR, GS/ES, CS/GS, CS/ES.
    pub fn columns(&self) -> [u64; 7] {
        [
            self.element_coverage,
            self.element_precision,
            self.element_recall,
            self.modification_rate,
            self.step_coverage,
            self.exec_precision,
            self.exec_recall,
        ]
    }

    fn from_columns(c: [u64; 7]) -> Self {
        CaseMetrics {
            element_coverage: c[0],
            element_precision: c[1],
            element_recall: c[2],
            modification_rate: c[3],
            step_coverage: c[4],
            exec_precision: c[5],
            exec_recall: c[6],
        }
    }
}

pub const PERCENT_COLUMNS: [&str; 7] = ["G/E", "C/G", "C/E", "MR", "GS/ES", "CS/GS", "CS/ES"];

/// `round_half_up(100 * num / den)` computed exactly.
pub fn percent(num: u64, den: u64, field: &'static str) -> Result<u64, MetricsError> {
    if den == 0 {
        return Err(MetricsError::DivisionByZeroDenominator { field });
    }
    let (num, den) = (num as u128, den as u128);
    Ok(((200 * num + den) / (2 * den)) as u64)
}

/// Half-up rounded arithmetic mean of integers.
pub fn mean_half_up(values: &[u64]) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as u128;
    let sum: u128 = values.iter().map(|&v| v as u128).sum();
    Some(((2 * sum + n) / (2 * n)) as u64)
}

pub fn compute_case(counts: &CaseCounts) -> Result<CaseMetrics, MetricsError> {
    counts.check()?;
    Ok(CaseMetrics {
        element_coverage: percent(counts.g, counts.e, "E")?,
        element_precision: percent(counts.c, counts.g, "G")?,
        element_recall: percent(counts.c, counts.e, "E")?,
        modification_rate: percent(counts.ml, counts.loc, "LOC")?,
        step_coverage: percent(counts.gs, counts.es, "ES")?,
        exec_precision: percent(counts.cs, counts.gs, "GS")?,
        exec_recall: percent(counts.cs, counts.es, "ES")?,
    })
}

/// Sample standard deviation (n-1 denominator).
pub fn sample_sd(values: &[f64]) -> Result<f64, MetricsError> {
    if values.len() < 2 {
        return Err(MetricsError::InsufficientData);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.iter().all(|v| *v == values[0]) {
        return Ok(0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRow {
    pub counts: CaseCounts,
    pub metrics: CaseMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub rows: Vec<CaseRow>,
    /// Column sums; `case_id` is "General".
    pub general_counts: CaseCounts,
    pub general: CaseMetrics,
    /// Sample SDs of the percentage columns, when there are two or more cases.
    pub sd: Option<[f64; 7]>,
}

pub fn aggregate(cases: &[CaseCounts]) -> Result<AggregateReport, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::NoCases);
    }
    let rows = cases
        .iter()
        .map(|c| {
            Ok(CaseRow {
                counts: c.clone(),
                metrics: compute_case(c)?,
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let sum = |f: fn(&CaseCounts) -> u64| cases.iter().map(f).sum::<u64>();
    let general_counts = CaseCounts {
        case_id: "General".into(),
        e: sum(|c| c.e),
        g: sum(|c| c.g),
        c: sum(|c| c.c),
        loc: sum(|c| c.loc),
        ml: sum(|c| c.ml),
        es: sum(|c| c.es),
        gs: sum(|c| c.gs),
        cs: sum(|c| c.cs),
    };
    let column = |k: usize| rows.iter().map(|r| r.metrics.columns()[k]).collect::<Vec<_>>();
    let mut means = [0u64; 7];
    for (k, m) in means.iter_mut().enumerate() {
        *m = mean_half_up(&column(k)).expect("non-empty");
    }
    let sd = if rows.len() >= 2 {
        let mut sds = [0f64; 7];
        for (k, s) in sds.iter_mut().enumerate() {
            let values: Vec<f64> = column(k).into_iter().map(|v| v as f64).collect();
            *s = sample_sd(&values)?;
        }
        Some(sds)
    } else {
        None
    };
    Ok(AggregateReport {
        rows,
        general_counts,
        general: CaseMetrics::from_columns(means),
        sd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format '{other}' (csv, md)")),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 15] = [
    "E", "G", "C", "G/E", "C/G", "C/E", "LOC", "M", "MR", "ES", "GS", "CS", "GS/ES", "CS/GS", "CS/ES",
];

fn cells(counts: &CaseCounts, m: &CaseMetrics, pct: &str) -> Vec<String> {
    let p = |v: u64| format!("{v}{pct}");
    vec![
        counts.e.to_string(),
        counts.g.to_string(),
        counts.c.to_string(),
        p(m.element_coverage),
        p(m.element_precision),
        p(m.element_recall),
        counts.loc.to_string(),
        counts.ml.to_string(),
        p(m.modification_rate),
        counts.es.to_string(),
        counts.gs.to_string(),
        counts.cs.to_string(),
        p(m.step_coverage),
        p(m.exec_precision),
        p(m.exec_recall),
    ]
}

/// Positions of the percentage columns within [`REPORT_COLUMNS`].
const PERCENT_POSITIONS: [usize; 7] = [3, 4, 5, 8, 12, 13, 14];

fn sd_cells(sd: &[f64; 7]) -> Vec<String> {
    let mut out = vec![String::new(); REPORT_COLUMNS.len()];
    for (k, &pos) in PERCENT_POSITIONS.iter().enumerate() {
        out[pos] = format!("{:.2}", sd[k]);
    }
    out
}

pub fn render_report(report: &AggregateReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let header: Vec<&str> = std::iter::once("case_id").chain(REPORT_COLUMNS).collect();
            w.write_record(&header).expect("in-memory write");
            for r in &report.rows {
                let mut rec = vec![r.counts.case_id.clone()];
                rec.extend(cells(&r.counts, &r.metrics, ""));
                w.write_record(&rec).expect("in-memory write");
            }
            let mut rec = vec!["General".to_string()];
            rec.extend(cells(&report.general_counts, &report.general, ""));
            w.write_record(&rec).expect("in-memory write");
            if let Some(sd) = &report.sd {
                let mut rec = vec!["SD".to_string()];
                rec.extend(sd_cells(sd));
                w.write_record(&rec).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
        }
        ReportFormat::Markdown => {
            let mut s = String::new();
            let row = |s: &mut String, cells: &[String]| {
                let _ = writeln!(s, "| {} |", cells.join(" | "));
            };
            let header: Vec<String> = std::iter::once("Case").chain(REPORT_COLUMNS).map(String::from).collect();
            row(&mut s, &header);
            let rule: Vec<String> = std::iter::once("---".to_string())
                .chain(REPORT_COLUMNS.iter().map(|_| "---:".to_string()))
                .collect();
            row(&mut s, &rule);
            for r in &report.rows {
                let mut c = vec![r.counts.case_id.clone()];
                c.extend(cells(&r.counts, &r.metrics, "%"));
                row(&mut s, &c);
            }
            let mut c = vec!["**General**".to_string()];
            c.extend(cells(&report.general_counts, &report.general, "%"));
            row(&mut s, &c);
            if let Some(sd) = &report.sd {
                s.push_str("\nSample standard deviation of the per-case percentages:\n\n");
                row(&mut s, &PERCENT_COLUMNS.map(String::from));
                row(&mut s, &PERCENT_COLUMNS.map(|_| "---:".to_string()));
                row(&mut s, &sd.map(|v| format!("{v:.2}")));
            }
            s
        }
    }
}

fn column_index(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
}

/// Reads `case_id,E,G,C,LOC,ML,ES,GS,CS` rows (columns matched by header
/// name; `TC` and `M` are accepted aliases). Summary rows named General or
/// SD are skipped, so rendered CSV reports read back as their cases.
pub fn ingest_counts_str(text: &str) -> Result<Vec<CaseCounts>, MetricsError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| MetricsError::CsvError {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let spec: [(&str, &[&str]); 9] = [
        ("case_id", &["case_id", "case", "tc"]),
        ("E", &["E"]),
        ("G", &["G"]),
        ("C", &["C"]),
        ("LOC", &["LOC"]),
        ("ML", &["ML", "M"]),
        ("ES", &["ES"]),
        ("GS", &["GS"]),
        ("CS", &["CS"]),
    ];
    let mut idx = [0usize; 9];
    for (k, (name, aliases)) in spec.iter().enumerate() {
        idx[k] = column_index(&headers, aliases).ok_or_else(|| MetricsError::CsvError {
            line: 1,
            reason: format!("missing column {name}"),
        })?;
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MetricsError::CsvError {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |k: usize| -> Result<&str, MetricsError> {
            record.get(idx[k]).map(str::trim).ok_or_else(|| MetricsError::CsvError {
                line,
                reason: format!("missing value for {}", spec[k].0),
            })
        };
        let case_id = get(0)?.to_string();
        if case_id.is_empty() {
            if record.iter().all(|c| c.trim().is_empty()) {
                continue;
            }
            return Err(MetricsError::CsvError {
                line,
                reason: "empty case_id".into(),
            });
        }
        let plain = case_id.trim_matches('*');
        if plain.eq_ignore_ascii_case("general") || plain.eq_ignore_ascii_case("sd") {
            continue;
        }
        let num = |k: usize| -> Result<u64, MetricsError> {
            let v = get(k)?;
            v.parse::<u64>().map_err(|_| MetricsError::CsvError {
                line,
                reason: format!("{} value '{v}' is not a non-negative integer", spec[k].0),
            })
        };
        let counts = CaseCounts {
            case_id,
            e: num(1)?,
            g: num(2)?,
            c: num(3)?,
            loc: num(4)?,
            ml: num(5)?,
            es: num(6)?,
            gs: num(7)?,
            cs: num(8)?,
        };
        counts.check()?;
        out.push(counts);
    }
    Ok(out)
}

pub fn ingest_counts(path: &Path) -> Result<Vec<CaseCounts>, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricsError::CsvError {
        line: 0,
        reason: format!("{}: {e}", path.display()),
    })?;
    ingest_counts_str(&text)
}
