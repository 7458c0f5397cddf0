//! Writes the report files of a run.

use std::io;
use std::path::Path;

use serde::Serialize;

use fairprobe_core::report::{
    criterion_display_order, render_api_csv, render_criterion_csv, render_fair_coverage, render_repository_csv,
    ScoreReport, FAIR_COVERAGE,
};

use crate::pipeline::write_atomic;

pub const REPOSITORIES_CSV: &str = "repositories.csv";
pub const CRITERIA_CSV: &str = "criteria.csv";
pub const APIS_CSV: &str = "apis.csv";
pub const FAIR_COVERAGE_TXT: &str = "fair_coverage.txt";
pub const REPORT_JSON: &str = "report.json";

fn run_line(report: &ScoreReport) -> String {
    format!("# run = {} ; executed = {}\n", report.run_id, report.execution_date)
}

/// One-line account of what the tables cover.
pub fn summary(report: &ScoreReport) -> String {
    if report.stats.is_none() {
        return "no records of interest were harvested: no repository offered Datacite image records, \
                so the score tables are empty"
            .to_string();
    }
    let mut s = format!(
        "{} records of interest from {} repositories",
        report.d_size,
        report.repositories.len()
    );
    if !report.excluded_repositories.is_empty() {
        s.push_str(&format!(
            "; excluded for lack of records of interest: {}",
            report.excluded_repositories.join(", ")
        ));
    }
    if !report.complete {
        s.push_str("; INCOMPLETE, see warnings");
    }
    s
}

pub fn repositories_csv(report: &ScoreReport) -> String {
    let mut s = render_repository_csv(report);
    s.push_str(&format!("# summary: {}\n", summary(report)));
    s.push_str(&run_line(report));
    s
}

pub fn criteria_csv(report: &ScoreReport) -> String {
    render_criterion_csv(report) + &run_line(report)
}

pub fn apis_csv(report: &ScoreReport) -> String {
    render_api_csv(&report.api_adoption, report.registry_size) + &run_line(report)
}

pub fn fair_coverage_txt(report: &ScoreReport) -> String {
    render_fair_coverage() + &run_line(report)
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    run_id: &'a str,
    execution_date: &'a str,
    complete: bool,
    summary: String,
    warnings: &'a [String],
    d_size: u64,
    wildcard_annotated: u64,
    repositories: &'a [fairprobe_core::report::RepositoryRow],
    excluded_repositories: &'a [String],
    criteria: Vec<fairprobe_core::CriterionStats>,
    total_rareness: Option<f64>,
    uniform_weights: Option<bool>,
    apis: &'a [fairprobe_core::registry::ApiAdoptionRow],
    registry_size: u64,
    fair_coverage: Vec<FairRow>,
}

#[derive(Serialize)]
struct FairRow {
    principle: &'static str,
    coverage: &'static str,
}

pub fn report_json(report: &ScoreReport) -> String {
    let doc = ReportDocument {
        run_id: &report.run_id,
        execution_date: &report.execution_date,
        complete: report.complete,
        summary: summary(report),
        warnings: &report.warnings,
        d_size: report.d_size,
        wildcard_annotated: report.wildcard_annotated,
        repositories: &report.repositories,
        excluded_repositories: &report.excluded_repositories,
        criteria: report.stats.as_ref().map(criterion_display_order).unwrap_or_default(),
        total_rareness: report.stats.as_ref().map(|s| s.totals.total_rareness),
        uniform_weights: report.stats.as_ref().map(|s| s.totals.uniform_fallback),
        apis: &report.api_adoption,
        registry_size: report.registry_size,
        fair_coverage: FAIR_COVERAGE
            .iter()
            .map(|p| FairRow { principle: p.id, coverage: p.coverage.label() })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(dir: &Path, report: &ScoreReport) -> io::Result<()> {
    write_atomic(&dir.join(REPOSITORIES_CSV), repositories_csv(report).as_bytes())?;
    write_atomic(&dir.join(CRITERIA_CSV), criteria_csv(report).as_bytes())?;
    write_atomic(&dir.join(APIS_CSV), apis_csv(report).as_bytes())?;
    write_atomic(&dir.join(FAIR_COVERAGE_TXT), fair_coverage_txt(report).as_bytes())?;
    write_atomic(&dir.join(REPORT_JSON), report_json(report).as_bytes())?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(())
}
