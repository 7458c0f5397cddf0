//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use fairprobe::config::Config;
use fairprobe::mockrdr::{
    ExpectedScores, MockRecord, MockRepository, MockServer, ResolverRoute, ScenarioScript, ScriptedResponse, Truth,
};
use fairprobe_core::report::ScoreReport;
use fairprobe::probe::{FailureReason, ProbeOutcome, ProbePolicy, ProbeTrace, Prober};

pub struct ProbeCase {
    pub name: &'static str,
    pub doi: &'static str,
    pub formats: Vec<String>,
    pub hops: Vec<ScriptedResponse>,
    pub expected: ProbeOutcome,
}

fn reply(status: u16, content_type: Option<&str>) -> ScriptedResponse {
    ScriptedResponse { status, content_type: content_type.map(str::to_string), ..ScriptedResponse::default() }
}

fn redirect(status: u16, to: &str) -> ScriptedResponse {
    ScriptedResponse { status, location: Some(to.to_string()), ..ScriptedResponse::default() }
}

fn with_link(mut r: ScriptedResponse, link: &str) -> ScriptedResponse {
    r.link = Some(link.to_string());
    r
}

/// The probe decision table: one case per behaviour the probe must get right.
pub fn probe_cases() -> Vec<ProbeCase> {
    use FailureReason::*;
    use ProbeOutcome::*;
    let f = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    vec![
        ProbeCase {
            name: "client negotiation",
            doi: "10.5555/client",
            formats: f(&["image/jpeg"]),
            hops: vec![redirect(302, "{hop:1}"), reply(200, Some("image/jpeg"))],
            expected: ClientNegotiated,
        },
        ProbeCase {
            name: "redirect chain of five",
            doi: "10.5555/chain",
            formats: f(&[]),
            hops: vec![
                redirect(301, "{hop:1}"),
                redirect(302, "{hop:2}"),
                redirect(303, "{hop:3}"),
                redirect(307, "{hop:4}"),
                redirect(308, "{hop:5}"),
                reply(200, Some("image/png")),
            ],
            expected: ClientNegotiated,
        },
        ProbeCase {
            name: "redirect loop",
            doi: "10.5555/loop",
            formats: f(&["image/png"]),
            hops: vec![redirect(302, "{hop:1}"), redirect(302, "{hop:0}")],
            expected: Failed(RedirectLimit),
        },
        ProbeCase {
            name: "landing page without Link",
            doi: "10.5555/landing",
            formats: f(&["image/jpeg"]),
            hops: vec![redirect(302, "{hop:1}"), reply(200, Some("text/html; charset=utf-8"))],
            expected: Failed(NoImageContentType),
        },
        ProbeCase {
            name: "Link with matching type",
            doi: "10.5555/link-match",
            formats: f(&["image/tiff"]),
            hops: vec![
                with_link(reply(200, Some("text/html")), "<{hop:1}>; rel=\"item\"; type=\"image/tiff\""),
                reply(200, Some("image/tiff")),
            ],
            expected: LinkNegotiated,
        },
        ProbeCase {
            name: "Link with non-matching type",
            doi: "10.5555/link-miss",
            formats: f(&["image/tiff"]),
            hops: vec![
                with_link(reply(200, Some("text/html")), "<{hop:1}>; rel=\"item\"; type=\"image/png\""),
                reply(200, Some("image/png")),
            ],
            expected: Failed(NoLinkMatch),
        },
        ProbeCase {
            name: "timeout",
            doi: "10.5555/slow",
            formats: f(&["image/jpeg"]),
            hops: vec![ScriptedResponse { stall_ms: 1500, ..reply(200, Some("image/jpeg")) }],
            expected: Failed(Timeout),
        },
        ProbeCase {
            name: "404",
            doi: "10.5555/missing",
            formats: f(&["image/jpeg"]),
            hops: vec![reply(404, Some("text/html"))],
            expected: Failed(Non200),
        },
        ProbeCase {
            name: "parameterized image content type",
            doi: "10.5555/params",
            formats: f(&["image/jpeg"]),
            hops: vec![reply(200, Some("image/jpeg;charset=binary"))],
            expected: ClientNegotiated,
        },
        ProbeCase {
            name: "server requiring Accept header",
            doi: "10.5555/accept",
            formats: f(&["image/jpeg"]),
            hops: vec![ScriptedResponse { require_accept: Some("image/*".into()), ..reply(200, Some("image/jpeg")) }],
            expected: ClientNegotiated,
        },
    ]
}

pub fn probe_policy() -> ProbePolicy {
    ProbePolicy {
        request_timeout: Duration::from_millis(500),
        per_host_delay: Duration::ZERO,
        ..ProbePolicy::default()
    }
}

/// Serves every case at once and probes each; returns (case, trace).
pub fn run_probe_cases() -> Vec<(ProbeCase, ProbeTrace)> {
    let cases = probe_cases();
    let routes: BTreeMap<String, ResolverRoute> = cases
        .iter()
        .map(|c| (c.doi.to_string(), ResolverRoute { hops: c.hops.clone(), retrievable: c.expected.is_success() }))
        .collect();
    let server = MockServer::serve(ScenarioScript { resolver_routes: routes, ..Default::default() }).unwrap();
    let prober = Prober::new(probe_policy(), &server.resolver_base());
    cases
        .into_iter()
        .map(|c| {
            let trace = prober.probe(c.doi, &c.formats);
            (c, trace)
        })
        .collect()
}

/// Configuration pointing every network access at `server`, without
/// politeness delays.
pub fn mock_config(server: &MockServer, out: &Path) -> Config {
    Config {
        out: out.to_path_buf(),
        registry_url: Some(server.registry_url()),
        doi_resolver: server.resolver_base(),
        timeout: 2.0,
        retries: 1,
        politeness_delay_ms: 0,
        per_host_delay_ms: 0,
        workers_registry: 2,
        workers_harvest: 3,
        workers_select: 4,
        workers_probe: 8,
        ..Config::default()
    }
}

pub fn retrievable_route() -> ResolverRoute {
    ResolverRoute { hops: vec![redirect(302, "{hop:1}"), reply(200, Some("image/jpeg"))], retrievable: true }
}

pub fn landing_route() -> ResolverRoute {
    ResolverRoute { hops: vec![reply(200, Some("text/html"))], retrievable: false }
}

/// A repository of `n` records. `truth(i)` fixes record i; image records
/// are annotated `image/jpeg`.
pub fn repository(id: &str, page_size: usize, n: usize, truth: impl Fn(usize) -> Truth) -> MockRepository {
    let records = (0..n)
        .map(|i| {
            let t = truth(i);
            MockRecord {
                oai_identifier: format!("oai:{id}:{i}"),
                doi: format!("10.5555/{id}.{i}"),
                formats: if t.image { vec!["image/jpeg".into()] } else { vec!["text/csv".into()] },
                truth: t,
                ..MockRecord::default()
            }
        })
        .collect();
    MockRepository {
        id: id.into(),
        name: format!("Repository {id}"),
        prefixes: vec!["oai_dc".into(), "datacite".into()],
        page_size,
        records,
        faults: Vec::new(),
    }
}

/// Routes every record DOI: those with `retrievable(doi)` get a working
/// route, the rest a landing page.
pub fn route_all(script: &mut ScenarioScript, retrievable: impl Fn(&str) -> bool) {
    let dois: Vec<String> = script.repositories.iter().flat_map(|r| r.records.iter().map(|x| x.doi.clone())).collect();
    for doi in dois {
        let route = if retrievable(&doi) { retrievable_route() } else { landing_route() };
        script.resolver_routes.insert(doi, route);
    }
}

/// Compares a report with the oracle: counts exactly, fractions to `tol`.
pub fn compare_with_oracle(report: &ScoreReport, expected: &ExpectedScores, tol: f64) -> Result<(), String> {
    let close = |a: f64, b: f64| (a - b).abs() <= tol;
    if report.d_size != expected.d_size {
        return Err(format!("|D| {} != {}", report.d_size, expected.d_size));
    }
    if report.repositories.len() != expected.repositories.len() {
        return Err(format!("{} rows, oracle has {}", report.repositories.len(), expected.repositories.len()));
    }
    for e in &expected.repositories {
        let row = report
            .repositories
            .iter()
            .find(|r| r.score.repository == e.id)
            .ok_or_else(|| format!("no row for {}", e.id))?;
        let s = &row.score;
        let met = [s.met.chrono, s.met.geo, s.met.lic, s.met.ret];
        if row.name != e.name || s.items_of_interest != e.items || met != e.met {
            return Err(format!("{}: got {} items {met:?}, oracle {} items {:?}", e.id, s.items_of_interest, e.items, e.met));
        }
        if !close(s.avfixed, e.avfixed) || !close(s.avrelative, e.avrelative) {
            return Err(format!(
                "{}: avfixed {} / {}, avrelative {} / {}",
                e.id, s.avfixed, e.avfixed, s.avrelative, e.avrelative
            ));
        }
    }
    let stats = report.stats.as_ref().ok_or("report has no corpus statistics")?;
    for (i, c) in stats.criteria.iter().enumerate() {
        if c.q_size != expected.q_sizes[i] || !close(c.rareness, expected.rareness[i]) || !close(c.weight, expected.weights[i]) {
            return Err(format!(
                "{}: q {} rareness {} weight {}, oracle {} {} {}",
                c.criterion.name(),
                c.q_size,
                c.rareness,
                c.weight,
                expected.q_sizes[i],
                expected.rareness[i],
                expected.weights[i]
            ));
        }
    }
    if !close(stats.totals.total_rareness, expected.total_rareness) {
        return Err(format!("total rareness {} != {}", stats.totals.total_rareness, expected.total_rareness));
    }
    Ok(())
}

pub fn fixture_path(rel: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn load_scenario(name: &str) -> ScenarioScript {
    let text = std::fs::read_to_string(fixture_path(&format!("scenarios/{name}"))).unwrap();
    ScenarioScript::from_json(&text).unwrap()
}

#[derive(serde::Deserialize)]
struct FixtureExpectation {
    doi: String,
    of_interest: bool,
    wildcard: bool,
    chrono: bool,
    geo: bool,
    geo_coordinates_only: bool,
    lic: bool,
}

/// Parses every Datacite fixture, checks the hand-derived expectations,
/// and round-trips each record through canonical XML. Returns the number
/// of fixtures checked.
pub fn check_datacite_fixtures() -> Result<usize, String> {
    use fairprobe::datacite::{is_of_interest, is_wildcard_annotated, parse_record, to_canonical_xml};
    use fairprobe_core::assessor::{f_chrono, f_geo, f_lic, GeoPolicy};

    let expected: BTreeMap<String, FixtureExpectation> =
        serde_json::from_str(&std::fs::read_to_string(fixture_path("datacite/expected.json")).unwrap())
            .map_err(|e| e.to_string())?;
    let mut files: Vec<_> = std::fs::read_dir(fixture_path("datacite"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    files.sort();
    if files.len() != expected.len() {
        return Err(format!("{} fixtures but {} expectations", files.len(), expected.len()));
    }
    for path in &files {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let exp = expected.get(&name).ok_or(format!("{name}: no expectation"))?;
        let text = std::fs::read_to_string(path).unwrap();
        let rec = parse_record(&text).map_err(|e| format!("{name}: {e}"))?;
        let relaxed = GeoPolicy { require_coordinates: false };
        let strict = GeoPolicy { require_coordinates: true };
        let got = (
            rec.doi.as_str(),
            is_of_interest(&rec),
            is_wildcard_annotated(&rec),
            f_chrono(&rec),
            f_geo(&rec, relaxed),
            f_geo(&rec, strict),
            f_lic(&rec),
        );
        let want = (
            exp.doi.as_str(),
            exp.of_interest,
            exp.wildcard,
            exp.chrono,
            exp.geo,
            exp.geo_coordinates_only,
            exp.lic,
        );
        if got != want {
            return Err(format!("{name}: got {got:?}, expected {want:?}"));
        }
        let canonical = to_canonical_xml(&rec);
        let again = parse_record(&canonical).map_err(|e| format!("{name} canonical: {e}"))?;
        if again != rec {
            return Err(format!("{name}: canonical form does not parse back to the same record"));
        }
        if to_canonical_xml(&again) != canonical {
            return Err(format!("{name}: canonical form is not stable"));
        }
    }
    Ok(files.len())
}
