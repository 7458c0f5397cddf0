mod common;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use fairprobe::mockrdr::{expected_scores, random_scenario, Fault, GenOptions, MockServer, OracleOptions, ScenarioScript, Truth};
use fairprobe::pipeline::{run_all, ParsedItem, PipelineError, Run, StepStatus, MANIFEST_FILE};
use fairprobe::store::Stage;
use fairprobe_core::assessor::AssessmentResult;
use fairprobe_core::oaipmh::RawRecord;

use common::{compare_with_oracle, mock_config, repository, route_all};

fn truth_cycle(i: usize) -> Truth {
    Truth { image: i % 5 != 4, chrono: i.is_multiple_of(3), geo: i % 4 == 1, lic: i.is_multiple_of(2) }
}

fn two_repos() -> ScenarioScript {
    let mut s = ScenarioScript {
        repositories: vec![repository("alpha", 7, 20, truth_cycle), repository("beta", 10, 15, truth_cycle)],
        ..Default::default()
    };
    route_all(&mut s, |doi| doi.ends_with('1') || doi.ends_with('2'));
    s
}

fn sorted_lines(path: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_to_string(path).unwrap_or_default().lines().map(str::to_string).collect();
    v.sort();
    v
}

#[test]
fn step_three_writes_one_partition_per_repository() {
    let server = MockServer::serve(two_repos()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut run = Run::create(mock_config(&server, dir.path())).unwrap();
    for s in 1..=3 {
        run.run_step(s, false).unwrap();
    }
    assert_eq!(run.status(3), StepStatus::Complete);
    let store = run.store();
    let alpha: Vec<RawRecord> = store.read(Stage::Raw, "alpha").unwrap();
    let beta: Vec<RawRecord> = store.read(Stage::Raw, "beta").unwrap();
    assert_eq!((alpha.len(), beta.len()), (20, 15));
    let h = run.manifest.step(3).repositories["alpha"].harvest.unwrap();
    assert_eq!((h.pages, h.completed), (3, true));
    let reread = Run::open(dir.path(), &run.manifest.run_id).unwrap();
    assert_eq!(reread.manifest, run.manifest);
}

#[test]
fn steps_are_gated_on_their_predecessor() {
    let server = MockServer::serve(two_repos()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut run = Run::create(mock_config(&server, dir.path())).unwrap();
    let err = run.run_step(4, false).unwrap_err();
    assert!(matches!(err, PipelineError::PredecessorIncomplete { step: 4, status: StepStatus::Pending }), "{err}");
    assert!(matches!(run.run_step(2, true), Err(PipelineError::PredecessorIncomplete { .. })));
    assert!(matches!(run.run_step(6, true), Err(PipelineError::NoSuchStep(6))));
    assert_eq!(run.status(4), StepStatus::Pending);
}

#[test]
fn partial_predecessor_needs_the_override() {
    let mut script = two_repos();
    script.repositories[1].faults.push(Fault::ServerError { page: 1, times: 10 });
    let server = MockServer::serve(script).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut run = Run::create(mock_config(&server, dir.path())).unwrap();
    for s in 1..=3 {
        run.run_step(s, false).unwrap();
    }
    assert_eq!(run.status(3), StepStatus::Partial);
    let beta = &run.manifest.step(3).repositories["beta"];
    assert!(beta.failure.as_deref().unwrap().starts_with("endpoint-unresponsive"));
    assert!(matches!(run.run_step(4, false), Err(PipelineError::PredecessorIncomplete { status: StepStatus::Partial, .. })));
    run.run_step(4, true).unwrap();
    assert_eq!(run.status(4), StepStatus::Complete);
}

#[test]
fn end_to_end_matches_the_oracle() {
    let opts = GenOptions { repositories: (3, 3), records: (20, 20), hosts: 2 };
    let script = random_scenario(7, &opts);
    let total: usize = script.repositories.iter().map(|r| r.records.len()).sum();
    assert_eq!(total, 60);
    let expected = expected_scores(&script, OracleOptions::default()).unwrap();
    let server = MockServer::serve(script).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_all(mock_config(&server, dir.path())).unwrap();
    compare_with_oracle(&outcome.report, &expected, 1e-12).unwrap();
    assert!(outcome.report.complete);
    assert!(outcome.report.warnings.is_empty(), "{:?}", outcome.report.warnings);
    for f in ["repositories.csv", "criteria.csv", "apis.csv", "fair_coverage.txt", "report.json", MANIFEST_FILE] {
        assert!(outcome.run_dir.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(outcome.run_dir.join("repositories.csv")).unwrap();
    let run_id = outcome.run_dir.file_name().unwrap().to_str().unwrap();
    assert!(csv.contains(&format!("# run = {run_id} ; executed = ")));
}

#[test]
fn rerunning_steps_is_idempotent() {
    let server = MockServer::serve(two_repos()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_all(mock_config(&server, dir.path())).unwrap();
    let run_id = outcome.run_dir.file_name().unwrap().to_str().unwrap().to_string();
    let snapshot = |run: &Run| -> Vec<Vec<String>> {
        let store = run.store();
        let mut out = Vec::new();
        for repo in ["alpha", "beta"] {
            for stage in [Stage::Raw, Stage::Parsed, Stage::Assessed] {
                out.push(sorted_lines(&store.path(stage, repo)));
            }
        }
        out
    };
    let mut run = Run::open(dir.path(), &run_id).unwrap();
    let before = snapshot(&run);
    let csv_before = fs::read(outcome.run_dir.join("repositories.csv")).unwrap();
    for s in 3..=5 {
        run.run_step(s, false).unwrap();
    }
    let report = run.report().unwrap();
    assert_eq!(snapshot(&run), before);
    assert_eq!(report.repositories, outcome.report.repositories);
    assert_eq!(report.stats, outcome.report.stats);
    assert_eq!(fs::read(outcome.run_dir.join("repositories.csv")).unwrap(), csv_before);
}

#[test]
fn catalogue_is_referentially_intact() {
    let server = MockServer::serve(random_scenario(11, &GenOptions { repositories: (4, 4), records: (10, 80), hosts: 2 }))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_all(mock_config(&server, dir.path())).unwrap();
    let run = Run::open(dir.path(), outcome.run_dir.file_name().unwrap().to_str().unwrap()).unwrap();
    let store = run.store();
    for repo in run.manifest.step(3).repositories.keys() {
        let raw: HashSet<String> =
            store.read::<RawRecord>(Stage::Raw, repo).unwrap().into_iter().map(|r| r.oai_identifier).collect();
        let parsed: Vec<ParsedItem> = store.read(Stage::Parsed, repo).unwrap();
        let parsed_dois: HashSet<String> = parsed.iter().map(|p| p.record.doi.clone()).collect();
        for p in &parsed {
            assert!(raw.contains(&p.record.oai_identifier), "{repo}: {} not in raw", p.record.oai_identifier);
        }
        let assessed: Vec<AssessmentResult> = store.read(Stage::Assessed, repo).unwrap();
        assert_eq!(assessed.len(), parsed.len());
        for a in &assessed {
            assert!(parsed_dois.contains(&a.doi), "{repo}: {} not in parsed", a.doi);
            assert_eq!(&a.repository, repo);
        }
    }
}

#[test]
fn worker_pools_stay_within_their_bounds() {
    let server = MockServer::serve(random_scenario(5, &GenOptions { repositories: (6, 6), records: (30, 200), hosts: 3 }))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = mock_config(&server, dir.path());
    cfg.workers_harvest = 2;
    cfg.workers_select = 3;
    cfg.workers_probe = 5;
    let outcome = run_all(cfg).unwrap();
    let run = Run::open(dir.path(), outcome.run_dir.file_name().unwrap().to_str().unwrap()).unwrap();
    let m = &run.manifest;
    assert!((1..=2).contains(&m.step(2).max_workers_observed));
    assert!((1..=2).contains(&m.step(3).max_workers_observed));
    assert!((1..=3).contains(&m.step(4).max_workers_observed));
    assert!((1..=5).contains(&m.step(5).max_workers_observed));
}

#[test]
fn landscape_without_datacite_gives_empty_tables() {
    let mut script = two_repos();
    for r in &mut script.repositories {
        r.prefixes = vec!["oai_dc".into()];
    }
    let server = MockServer::serve(script).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_all(mock_config(&server, dir.path())).unwrap();
    let r = &outcome.report;
    assert_eq!(r.d_size, 0);
    assert!(r.repositories.is_empty() && r.stats.is_none());
    let csv = fs::read_to_string(outcome.run_dir.join("repositories.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("rdr,items,avfixed,avrelative,chrono,geo,lic,ret"));
    assert_eq!(lines.next(), Some("# n = 0"));
    assert!(csv.contains("# summary: no records of interest"));
    let criteria = fs::read_to_string(outcome.run_dir.join("criteria.csv")).unwrap();
    assert!(criteria.starts_with("criterion,q_size,rareness,weight\n# n = 0\n"));
}

#[test]
fn truncated_harvest_is_flagged_and_scored_over_what_was_read() {
    let mut script = two_repos();
    script.repositories[0].page_size = 4;
    let oracle = expected_scores(&script, OracleOptions { max_pages: Some(2), ..Default::default() }).unwrap();
    assert_eq!(oracle.truncated, vec!["alpha".to_string()]);
    let server = MockServer::serve(script).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = mock_config(&server, dir.path());
    cfg.max_pages = Some(2);
    let outcome = run_all(cfg).unwrap();
    let r = &outcome.report;
    assert!(!r.complete);
    assert!(r.warnings.iter().any(|w| w.starts_with("INCOMPLETE harvest of alpha")), "{:?}", r.warnings);
    compare_with_oracle(r, &oracle, 1e-12).unwrap();
    let csv = fs::read_to_string(outcome.run_dir.join("repositories.csv")).unwrap();
    assert!(csv.contains("# warning: INCOMPLETE harvest of alpha"));
}

#[test]
fn registry_only_repositories_count_in_the_api_table() {
    let mut script = two_repos();
    script.registry_only.push(fairprobe::mockrdr::script::RegistryEntry {
        id: "gamma".into(),
        name: "Gamma".into(),
        apis: vec![("REST".into(), "https://gamma.example/api".into())],
    });
    script.registry_only.push(fairprobe::mockrdr::script::RegistryEntry { id: "delta".into(), name: "Delta".into(), apis: vec![] });
    let server = MockServer::serve(script).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_all(mock_config(&server, dir.path())).unwrap();
    let apis = fs::read_to_string(outcome.run_dir.join("apis.csv")).unwrap();
    assert!(apis.starts_with("api,absolute,relative_percent\nOAI-PMH,2,50.00\nREST,1,25.00\nnone,1,25.00\n# n = 4\n"), "{apis}");
}

/// Runs steps 1 and 2 in process, step 3 in a child process that is
/// killed once the small repository is recorded as harvested, then
/// resumes step 3.
#[test]
fn killed_harvest_resumes_with_unfinished_repositories_only() {
    let mut script = ScenarioScript {
        repositories: vec![repository("small", 10, 5, truth_cycle), repository("large", 2, 60, truth_cycle)],
        ..Default::default()
    };
    route_all(&mut script, |_| true);
    let server = MockServer::serve(script).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = mock_config(&server, dir.path());
    cfg.workers_harvest = 2;
    cfg.politeness_delay_ms = 100;
    let mut run = Run::create(cfg).unwrap();
    run.run_step(1, false).unwrap();
    run.run_step(2, false).unwrap();
    let run_id = run.manifest.run_id.clone();
    server.clear_log();

    let mut child = Command::new(env!("CARGO_BIN_EXE_fairprobe"))
        .args(["step", "3", "--run-id", &run_id, "--out"])
        .arg(dir.path())
        .env("FAIRPROBE_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        let m = Run::open(dir.path(), &run_id).unwrap().manifest;
        if m.step(3).repositories.get("small").map(|s| s.status) == Some(StepStatus::Complete) {
            break;
        }
        assert!(Instant::now() < deadline, "small repository never finished");
        assert!(child.try_wait().unwrap().is_none(), "child finished before it could be killed");
        std::thread::sleep(Duration::from_millis(20));
    }
    std::thread::sleep(Duration::from_millis(250));
    child.kill().unwrap();
    child.wait().unwrap();

    let mut run = Run::open(dir.path(), &run_id).unwrap();
    assert_eq!(run.status(3), StepStatus::Partial);
    assert!(!run.manifest.step(3).repositories.contains_key("large"));
    let partial: Vec<RawRecord> = run.store().read(Stage::Raw, "large").unwrap();
    assert!(partial.len() < 60, "large finished before the kill");
    let small_before = fs::read(run.store().path(Stage::Raw, "small")).unwrap();

    server.clear_log();
    run.run_step(3, false).unwrap();
    assert_eq!(run.status(3), StepStatus::Complete);
    let targets: BTreeSet<String> = server.request_log().into_iter().map(|r| r.target).collect();
    assert!(targets.iter().all(|t| !t.contains("/oai/small")), "small was harvested again");
    assert!(targets.iter().any(|t| t.contains("/oai/large")));
    assert_eq!(fs::read(run.store().path(Stage::Raw, "small")).unwrap(), small_before);
    let large: Vec<RawRecord> = run.store().read(Stage::Raw, "large").unwrap();
    let ids: HashSet<&str> = large.iter().map(|r| r.oai_identifier.as_str()).collect();
    assert_eq!((large.len(), ids.len()), (60, 60));
    for s in 4..=5 {
        run.run_step(s, false).unwrap();
    }
    let expected = expected_scores(server.script(), OracleOptions::default()).unwrap();
    compare_with_oracle(&run.report().unwrap(), &expected, 1e-12).unwrap();
}
