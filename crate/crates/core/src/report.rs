//! Report tables rendered as CSV and plain text.
//!
//! Rendering is a pure function of [`ScoreReport`]; equal reports give
//! byte-identical files. Fractions use 7 decimals, the total rareness and
//! API shares 2.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::registry::ApiAdoptionRow;
use crate::scoring::{CorpusStats, CriterionStats, RepositoryScore};

pub const REPOSITORY_HEADER: &str = "rdr,items,avfixed,avrelative,chrono,geo,lic,ret";
pub const CRITERION_HEADER: &str = "criterion,q_size,rareness,weight";
pub const API_HEADER: &str = "api,absolute,relative_percent";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryRow {
    pub name: String,
    pub score: RepositoryScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub run_id: String,
    pub execution_date: String,
    /// |D|
    pub d_size: u64,
    /// Kept in table order, see [`sort_repository_rows`].
    pub repositories: Vec<RepositoryRow>,
    /// Absent for an empty corpus.
    pub stats: Option<CorpusStats>,
    /// Repositories harvested without any record of interest.
    pub excluded_repositories: Vec<String>,
    /// Records counted only through a literal `image/*` format.
    pub wildcard_annotated: u64,
    pub api_adoption: Vec<ApiAdoptionRow>,
    pub registry_size: u64,
    /// True when every harvest ran to completion.
    pub complete: bool,
    pub warnings: Vec<String>,
}

/// Largest repositories first; ties by name.
pub fn sort_repository_rows(rows: &mut [RepositoryRow]) {
    rows.sort_by(|a, b| {
        b.score
            .items_of_interest
            .cmp(&a.score.items_of_interest)
            .then_with(|| a.name.cmp(&b.name))
    });
}

/// Criteria by |Q_i| descending, ties in canonical criterion order.
pub fn criterion_display_order(stats: &CorpusStats) -> Vec<CriterionStats> {
    let mut v: Vec<CriterionStats> = stats.criteria.to_vec();
    v.sort_by(|a, b| match b.q_size.cmp(&a.q_size) {
        Ordering::Equal => a.criterion.cmp(&b.criterion),
        o => o,
    });
    v
}

/// Quotes a CSV field when it contains a delimiter, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn push_warnings(out: &mut String, warnings: &[String]) {
    for w in warnings {
        let one_line: String = w.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect();
        let _ = writeln!(out, "# warning: {one_line}");
    }
}

pub fn render_repository_csv(report: &ScoreReport) -> String {
    let mut out = String::new();
    out.push_str(REPOSITORY_HEADER);
    out.push('\n');
    for row in &report.repositories {
        let s = &row.score;
        let _ = writeln!(
            out,
            "{},{},{:.7},{:.7},{},{},{},{}",
            csv_field(&row.name),
            s.items_of_interest,
            s.avfixed,
            s.avrelative,
            s.met.chrono,
            s.met.geo,
            s.met.lic,
            s.met.ret
        );
    }
    let _ = writeln!(out, "# n = {}", report.d_size);
    push_warnings(&mut out, &report.warnings);
    out
}

pub fn render_criterion_csv(report: &ScoreReport) -> String {
    let mut out = String::new();
    out.push_str(CRITERION_HEADER);
    out.push('\n');
    match &report.stats {
        Some(stats) => {
            for c in criterion_display_order(stats) {
                let _ = writeln!(
                    out,
                    "{},{},{:.7},{:.7}",
                    c.criterion.name(),
                    c.q_size,
                    c.rareness,
                    c.weight
                );
            }
            let _ = writeln!(
                out,
                "# n = {} ; total_rareness = {:.2}",
                stats.totals.d_size, stats.totals.total_rareness
            );
        }
        None => {
            let _ = writeln!(out, "# n = 0");
        }
    }
    push_warnings(&mut out, &report.warnings);
    out
}

pub fn render_api_csv(rows: &[ApiAdoptionRow], registry_size: u64) -> String {
    let mut out = String::new();
    out.push_str(API_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{:.2}", csv_field(&r.api), r.absolute, r.relative_percent);
    }
    let _ = writeln!(out, "# n = {registry_size}");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// Met by running the assessment at all.
    CoveredByExecution,
    GeoChrono,
    Ret,
    Lic,
    NotCovered,
}

impl Coverage {
    pub fn label(self) -> &'static str {
        match self {
            Coverage::CoveredByExecution => "covered-by-execution",
            Coverage::GeoChrono => "Q_geo, Q_chrono",
            Coverage::Ret => "Q_ret",
            Coverage::Lic => "Q_lic",
            Coverage::NotCovered => "not-covered",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FairPrinciple {
    pub id: &'static str,
    pub statement: &'static str,
    pub coverage: Coverage,
}

const fn fp(id: &'static str, statement: &'static str, coverage: Coverage) -> FairPrinciple {
    FairPrinciple { id, statement, coverage }
}

/// How the four criteria and the harvest itself map onto the 15 FAIR
/// principles.
pub const FAIR_COVERAGE: [FairPrinciple; 15] = [
    fp("F1", "(meta)data are assigned a globally unique and persistent identifier", Coverage::CoveredByExecution),
    fp("F2", "data are described with rich metadata", Coverage::GeoChrono),
    fp("F3", "metadata clearly and explicitly include the identifier of the data it describes", Coverage::CoveredByExecution),
    fp("F4", "(meta)data are registered or indexed in a searchable resource", Coverage::CoveredByExecution),
    fp("A1", "(meta)data are retrievable by their identifier using a standardized communications protocol", Coverage::Ret),
    fp("A1.1", "the protocol is open, free, and universally implementable", Coverage::Ret),
    fp("A1.2", "the protocol allows for an authentication and authorization procedure, where necessary", Coverage::Ret),
    fp("A2", "metadata are accessible, even when the data are no longer available", Coverage::NotCovered),
    fp("I1", "(meta)data use a formal, accessible, shared, and broadly applicable language for knowledge representation", Coverage::CoveredByExecution),
    fp("I2", "(meta)data use vocabularies that follow FAIR principles", Coverage::NotCovered),
    fp("I3", "(meta)data include qualified references to other (meta)data", Coverage::NotCovered),
    fp("R1", "(meta)data are richly described with a plurality of accurate and relevant attributes", Coverage::GeoChrono),
    fp("R1.1", "(meta)data are released with a clear and accessible data usage license", Coverage::Lic),
    fp("R1.2", "(meta)data are associated with detailed provenance", Coverage::NotCovered),
    fp("R1.3", "(meta)data meet domain-relevant community standards", Coverage::NotCovered),
];

pub fn render_fair_coverage() -> String {
    let width = FAIR_COVERAGE.iter().map(|p| p.id.len()).max().unwrap_or(0);
    let mut out = String::from("FAIR principle coverage\n");
    let covered = FAIR_COVERAGE.iter().filter(|p| p.coverage != Coverage::NotCovered).count();
    for p in &FAIR_COVERAGE {
        let _ = writeln!(out, "{:<width$}  {:<22}  {}", p.id, p.coverage.label(), p.statement);
    }
    let _ = writeln!(out, "# covered: {covered} of {}", FAIR_COVERAGE.len());
    out
}
