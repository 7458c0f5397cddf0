//! The five-step run: registry, provider selection, harvest, selection and
//! metadata assessment, retrievability probing. Steps talk to each other
//! only through files under `{out}/{run_id}/`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use fairprobe_core::assessor::{assess_metadata, AssessmentResult};
use fairprobe_core::datacite::DataciteRecord;
use fairprobe_core::oaipmh::{HarvestSummary, RawRecord};
use fairprobe_core::registry::{ApiKind, RepositoryDescriptor};
use fairprobe_core::report::{sort_repository_rows, RepositoryRow, ScoreReport};
use fairprobe_core::schedule::lpt_bins;
use fairprobe_core::scoring::{compute_stats, score_repository, ScoringError};

use crate::config::{Config, ConfigError};
use crate::datacite::{is_of_interest, is_wildcard_annotated, parse_harvested};
use crate::http::Http;
use crate::oaipmh::{select_datacite_prefix, OaiClient};
use crate::pool;
use crate::probe::Prober;
use crate::registry::{self, api_adoption_stats, filter_by_api, RegistryError};
use crate::store::{CatalogueStore, Stage};

pub const SCHEMA_VERSION: u32 = 1;
pub const STEPS: u8 = 5;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPOS_FILE: &str = "registry/repos.ndjson";
pub const PROVIDERS_FILE: &str = "providers.ndjson";

pub fn step_name(step: u8) -> &'static str {
    match step {
        1 => "registry",
        2 => "providers",
        3 => "harvest",
        4 => "select",
        5 => "probe",
        _ => "?",
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    #[default]
    Pending,
    Partial,
    Complete,
}

impl std::fmt::Display for StepStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepStatus::Pending => "pending",
            StepStatus::Partial => "partial",
            StepStatus::Complete => "complete",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepoStatus {
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default)]
    pub counters: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harvest: Option<HarvestSummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u8,
    pub name: String,
    pub status: StepStatus,
    pub started_at: Option<String>,
    pub finished_at: Option<String>,
    #[serde(default)]
    pub repositories: BTreeMap<String, RepoStatus>,
    #[serde(default)]
    pub max_workers_observed: usize,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub execution_date: String,
    pub config: Config,
    pub steps: Vec<StepRecord>,
    #[serde(default)]
    pub reported_at: Option<String>,
}

impl RunManifest {
    pub fn step(&self, step: u8) -> &StepRecord {
        &self.steps[step as usize - 1]
    }

    fn step_mut(&mut self, step: u8) -> &mut StepRecord {
        &mut self.steps[step as usize - 1]
    }
}

/// One OAI-PMH provider as decided in step 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provider {
    pub registry_id: String,
    pub name: String,
    pub endpoint: Option<String>,
    /// Selected Datacite metadata prefix, if any.
    pub prefix: Option<String>,
    pub size_estimate: u64,
    pub failure: Option<String>,
}

/// A selected record of interest with its metadata predicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedItem {
    pub record: DataciteRecord,
    pub assessment: AssessmentResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeTiming {
    pub doi: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("step {step} needs step {} complete but it is {status}", step - 1)]
    PredecessorIncomplete { step: u8, status: StepStatus },
    #[error("no step {0}; steps are 1 to 5")]
    NoSuchStep(u8),
    #[error("run {0} not found")]
    NoSuchRun(String),
    #[error("no runs under {0}")]
    NoRuns(PathBuf),
    #[error("manifest {0}: {1}")]
    Manifest(PathBuf, String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("storage: {0}")]
    Storage(#[from] io::Error),
    #[error("{0}: {1}")]
    BadArtifact(PathBuf, String),
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// `YYYYMMDDTHHMMSS.mmmZ-xxxx`: sorts by start time, unique per start.
pub fn new_run_id() -> String {
    let t = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    format!("{t}-{:04x}", rand::thread_rng().gen::<u16>())
}

/// Writes via a temporary file and rename so readers never see half a file.
pub fn write_atomic(path: &Path, data: &[u8]) -> io::Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, data)?;
    fs::rename(&tmp, path)
}

fn to_ndjson<T: Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for i in items {
        s.push_str(&serde_json::to_string(i).expect("serializable"));
        s.push('\n');
    }
    s
}

/// Latest run id under `out`, by name.
pub fn latest_run(out: &Path) -> Result<String, PipelineError> {
    let mut ids: Vec<String> = match fs::read_dir(out) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join(MANIFEST_FILE).is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect(),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    ids.sort();
    ids.pop().ok_or_else(|| PipelineError::NoRuns(out.to_path_buf()))
}

pub struct Run {
    dir: PathBuf,
    pub manifest: RunManifest,
}

impl Run {
    /// Starts a new run under `config.out`.
    pub fn create(config: Config) -> Result<Run, PipelineError> {
        config.validate()?;
        let run_id = new_run_id();
        let dir = config.out.join(&run_id);
        fs::create_dir_all(&dir)?;
        let steps = (1..=STEPS)
            .map(|s| StepRecord { step: s, name: step_name(s).into(), ..Default::default() })
            .collect();
        let run = Run {
            dir,
            manifest: RunManifest {
                schema_version: SCHEMA_VERSION,
                run_id,
                execution_date: now(),
                config,
                steps,
                reported_at: None,
            },
        };
        run.save()?;
        Ok(run)
    }

    pub fn open(out: &Path, run_id: &str) -> Result<Run, PipelineError> {
        let dir = out.join(run_id);
        let path = dir.join(MANIFEST_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(PipelineError::NoSuchRun(run_id.into())),
            Err(e) => return Err(e.into()),
        };
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| PipelineError::Manifest(path.clone(), e.to_string()))?;
        if manifest.schema_version != SCHEMA_VERSION || manifest.steps.len() != STEPS as usize {
            return Err(PipelineError::Manifest(path, format!("unsupported schema {}", manifest.schema_version)));
        }
        Ok(Run { dir, manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &Config {
        &self.manifest.config
    }

    /// Replaces the configuration snapshot, e.g. after command-line overrides.
    pub fn set_config(&mut self, config: Config) -> Result<(), PipelineError> {
        config.validate()?;
        self.manifest.config = config;
        self.save()
    }

    pub fn store(&self) -> CatalogueStore {
        CatalogueStore::new(&self.dir)
    }

    pub fn save(&self) -> Result<(), PipelineError> {
        save_manifest(&self.dir, &self.manifest)?;
        Ok(())
    }

    pub fn status(&self, step: u8) -> StepStatus {
        self.manifest.step(step).status
    }

    /// Runs one step after checking its predecessor. `allow_partial`
    /// accepts a partial predecessor.
    pub fn run_step(&mut self, step: u8, allow_partial: bool) -> Result<(), PipelineError> {
        if !(1..=STEPS).contains(&step) {
            return Err(PipelineError::NoSuchStep(step));
        }
        if step > 1 {
            let prev = self.status(step - 1);
            let ok = prev == StepStatus::Complete || (prev == StepStatus::Partial && allow_partial);
            if !ok {
                return Err(PipelineError::PredecessorIncomplete { step, status: prev });
            }
        }
        let resume = self.status(step) == StepStatus::Partial;
        for later in step + 1..=STEPS {
            let rec = self.manifest.step_mut(later);
            *rec = StepRecord { step: later, name: step_name(later).into(), ..Default::default() };
        }
        self.manifest.reported_at = None;
        {
            let rec = self.manifest.step_mut(step);
            rec.status = StepStatus::Partial;
            rec.started_at = Some(now());
            rec.finished_at = None;
            rec.notes.clear();
            if !resume {
                rec.repositories.clear();
                rec.max_workers_observed = 0;
            }
        }
        self.save()?;
        log::info!("step {step} ({}) {}", step_name(step), if resume { "resuming" } else { "starting" });
        let status = match step {
            1 => self.step_registry()?,
            2 => self.step_providers()?,
            3 => self.step_harvest(resume)?,
            4 => self.step_select()?,
            _ => self.step_probe(resume)?,
        };
        let rec = self.manifest.step_mut(step);
        rec.status = status;
        rec.finished_at = Some(now());
        self.save()?;
        log::info!("step {step} ({}) {status}", step_name(step));
        Ok(())
    }

    fn read_repos(&self) -> Result<Vec<RepositoryDescriptor>, PipelineError> {
        let path = self.dir.join(REPOS_FILE);
        let text = fs::read_to_string(&path)?;
        registry::from_ndjson(&text).map_err(|e| PipelineError::BadArtifact(path, e.to_string()))
    }

    pub fn read_providers(&self) -> Result<Vec<Provider>, PipelineError> {
        let path = self.dir.join(PROVIDERS_FILE);
        let text = fs::read_to_string(&path)?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| PipelineError::BadArtifact(path.clone(), e.to_string())))
            .collect()
    }

    fn step_registry(&mut self) -> Result<StepStatus, PipelineError> {
        let cfg = self.manifest.config.clone();
        let http = Http::new(cfg.timeout());
        let listing = registry::fetch_repository_list(
            &http,
            cfg.registry_url.as_deref(),
            cfg.seed_file.as_deref(),
            cfg.allow_seed_fallback,
            cfg.workers_registry,
        )?;
        write_atomic(&self.dir.join(REPOS_FILE), registry::to_ndjson(&listing.descriptors).as_bytes())?;
        let rec = self.manifest.step_mut(1);
        rec.notes.push(format!("source: {}", serde_json::to_string(&listing.source).expect("serializable")));
        rec.notes.push(format!("repositories: {}", listing.descriptors.len()));
        for w in &listing.warnings {
            rec.notes.push(format!("entry {} skipped: {}", w.index, w.reason));
        }
        Ok(StepStatus::Complete)
    }

    fn step_providers(&mut self) -> Result<StepStatus, PipelineError> {
        let cfg = self.manifest.config.clone();
        let repos = filter_by_api(&self.read_repos()?, &ApiKind::OaiPmh);
        let http = Http::new(cfg.timeout());
        let policy = cfg.harvest_policy();
        let (providers, max) = pool::run(repos, cfg.workers_harvest, |repo| {
            let mut p = Provider {
                registry_id: repo.registry_id.clone(),
                name: repo.name.clone(),
                endpoint: None,
                prefix: None,
                size_estimate: 0,
                failure: None,
            };
            for ep in repo.endpoints_of(&ApiKind::OaiPmh) {
                let mut client = OaiClient::new(&http, &ep.url, policy.clone());
                match client.list_metadata_formats() {
                    Ok(formats) => {
                        p.endpoint = Some(ep.url.clone());
                        p.failure = None;
                        p.prefix = select_datacite_prefix(&formats).map(str::to_string);
                        if let Some(prefix) = &p.prefix {
                            match client.first_page(prefix) {
                                Ok(page) => {
                                    p.size_estimate = page.complete_list_size.unwrap_or(page.records.len() as u64)
                                }
                                Err(e) => log::warn!("{}: no size estimate: {e}", repo.registry_id),
                            }
                        }
                        break;
                    }
                    Err(e) => {
                        log::warn!("{} ({}): {e}", repo.registry_id, ep.url);
                        p.failure = Some(e.token());
                    }
                }
            }
            p
        });
        write_atomic(&self.dir.join(PROVIDERS_FILE), to_ndjson(&providers).as_bytes())?;
        let rec = self.manifest.step_mut(2);
        rec.max_workers_observed = max;
        let mut with_datacite = 0;
        for p in &providers {
            let mut st = RepoStatus { status: StepStatus::Complete, failure: p.failure.clone(), ..Default::default() };
            st.counters.insert("size_estimate".into(), p.size_estimate);
            st.counters.insert("datacite".into(), p.prefix.is_some() as u64);
            with_datacite += p.prefix.is_some() as usize;
            rec.repositories.insert(p.registry_id.clone(), st);
        }
        rec.notes.push(format!("oai providers: {}, offering datacite: {with_datacite}", providers.len()));
        Ok(StepStatus::Complete)
    }

    fn step_harvest(&mut self, resume: bool) -> Result<StepStatus, PipelineError> {
        let cfg = self.manifest.config.clone();
        let providers: Vec<Provider> = self.read_providers()?.into_iter().filter(|p| p.prefix.is_some()).collect();
        let todo: Vec<Provider> = providers
            .iter()
            .filter(|p| {
                !resume
                    || self.manifest.step(3).repositories.get(&p.registry_id).map(|s| s.status)
                        != Some(StepStatus::Complete)
            })
            .cloned()
            .collect();
        if resume {
            let skipped = providers.len() - todo.len();
            self.manifest.step_mut(3).notes.push(format!("resumed; {skipped} repositories already harvested"));
        }
        let sizes: Vec<u64> = todo.iter().map(|p| p.size_estimate).collect();
        let bins: Vec<Vec<Provider>> = lpt_bins(&sizes, cfg.workers_harvest)
            .into_iter()
            .map(|b| b.into_iter().map(|i| todo[i].clone()).collect())
            .collect();
        let http = Http::new(cfg.timeout());
        let policy = cfg.harvest_policy();
        let store = self.store();
        let dir = self.dir.clone();
        let shared = Mutex::new(self.manifest.clone());
        let (results, max) = pool::run_bins(bins, |p: Provider| -> io::Result<()> {
            let appender = store.create(Stage::Raw, &p.registry_id)?;
            let endpoint = p.endpoint.clone().unwrap_or_default();
            let prefix = p.prefix.clone().unwrap_or_default();
            let mut client = OaiClient::new(&http, &endpoint, policy.clone());
            let harvest = client.harvest_records(&prefix, |r: RawRecord| appender.append(&r));
            appender.sync()?;
            let s = harvest.summary;
            let mut st = RepoStatus {
                status: if s.completed { StepStatus::Complete } else { StepStatus::Partial },
                failure: harvest.failure.clone(),
                harvest: Some(s),
                ..Default::default()
            };
            st.counters.insert("pages".into(), s.pages as u64);
            st.counters.insert("records".into(), s.records);
            st.counters.insert("deleted".into(), s.deleted);
            if let Some(f) = &harvest.failure {
                log::warn!("{}: harvest incomplete: {f}", p.registry_id);
            }
            let mut m = shared.lock().unwrap_or_else(|e| e.into_inner());
            m.step_mut(3).repositories.insert(p.registry_id.clone(), st);
            save_manifest(&dir, &m)
        });
        self.manifest = shared.into_inner().unwrap_or_else(|e| e.into_inner());
        let rec = self.manifest.step_mut(3);
        rec.max_workers_observed = rec.max_workers_observed.max(max);
        for r in results {
            r?;
        }
        let all_done = rec.repositories.values().all(|s| s.status == StepStatus::Complete);
        Ok(if all_done { StepStatus::Complete } else { StepStatus::Partial })
    }

    /// Repositories with a raw partition, in id order.
    fn harvested(&self) -> Vec<String> {
        self.manifest.step(3).repositories.keys().cloned().collect()
    }

    fn step_select(&mut self) -> Result<StepStatus, PipelineError> {
        let cfg = self.manifest.config.clone();
        let geo = cfg.geo_policy();
        let store = self.store();
        let mut max_seen = 0;
        for repo in self.harvested() {
            let raw: Vec<RawRecord> = store.read(Stage::Raw, &repo)?;
            let n_raw = raw.len() as u64;
            let live: Vec<RawRecord> = raw.into_iter().filter(|r| !r.deleted).collect();
            let deleted = n_raw - live.len() as u64;
            let (parsed, max) = pool::run(live, cfg.workers_select, |r| {
                parse_harvested(&r.payload, &repo, &r.oai_identifier).map_err(|e| (r.oai_identifier.clone(), e))
            });
            max_seen = max_seen.max(max);
            let out = store.create(Stage::Parsed, &repo)?;
            let mut counters = BTreeMap::new();
            let mut bump = |k: &str| *counters.entry(k.to_string()).or_insert(0u64) += 1;
            let mut seen = HashSet::new();
            for p in parsed {
                let record = match p {
                    Ok(r) => r,
                    Err((id, e)) => {
                        log::debug!("{repo} {id}: {e}");
                        bump(&format!("error:{}", e.token()));
                        continue;
                    }
                };
                if !is_of_interest(&record) {
                    bump("not_of_interest");
                    continue;
                }
                if !seen.insert(record.doi.clone()) {
                    bump("duplicate_doi");
                    continue;
                }
                bump("items");
                if is_wildcard_annotated(&record) {
                    bump("wildcard");
                }
                let assessment = assess_metadata(&record, geo);
                out.append(&ParsedItem { record, assessment })?;
            }
            out.sync()?;
            counters.insert("raw".into(), n_raw);
            counters.insert("deleted".into(), deleted);
            counters.entry("items".into()).or_insert(0);
            self.manifest
                .step_mut(4)
                .repositories
                .insert(repo.clone(), RepoStatus { status: StepStatus::Complete, counters, ..Default::default() });
        }
        self.manifest.step_mut(4).max_workers_observed = max_seen;
        Ok(StepStatus::Complete)
    }

    fn step_probe(&mut self, resume: bool) -> Result<StepStatus, PipelineError> {
        let cfg = self.manifest.config.clone();
        let store = self.store();
        let prober = Prober::new(cfg.probe_policy(), &cfg.doi_resolver);
        let repos = self.harvested();
        let mut jobs: Vec<(usize, ParsedItem)> = Vec::new();
        let mut appenders = Vec::new();
        let mut already = 0u64;
        for (i, repo) in repos.iter().enumerate() {
            let done: HashSet<String> = if resume {
                store.read::<AssessmentResult>(Stage::Assessed, repo)?.into_iter().map(|a| a.doi).collect()
            } else {
                HashSet::new()
            };
            already += done.len() as u64;
            let items: Vec<ParsedItem> = store.read(Stage::Parsed, repo)?;
            jobs.extend(items.into_iter().filter(|it| !done.contains(&it.record.doi)).map(|it| (i, it)));
            let open = |stage| if resume { store.reopen(stage, repo) } else { store.create(stage, repo) };
            appenders.push((open(Stage::Assessed)?, open(Stage::Timings)?));
        }
        if resume {
            self.manifest.step_mut(5).notes.push(format!("resumed; {already} items already probed"));
        }
        let (results, max) = pool::run(jobs, cfg.workers_probe, |(i, item)| -> io::Result<()> {
            let mut trace = prober.probe(&item.record.doi, &item.record.formats);
            let timing = ProbeTiming { doi: item.record.doi.clone(), elapsed_ms: trace.elapsed_ms };
            trace.elapsed_ms = 0;
            let mut a = item.assessment;
            a.ret = trace.outcome.is_success();
            a.probe_trace = Some(trace);
            appenders[i].0.append(&a)?;
            appenders[i].1.append(&timing)
        });
        for (a, t) in &appenders {
            a.sync()?;
            t.sync()?;
        }
        drop(appenders);
        for r in results {
            r?;
        }
        let rec_max = &mut self.manifest.step_mut(5).max_workers_observed;
        *rec_max = (*rec_max).max(max);
        for repo in &repos {
            let assessed: Vec<AssessmentResult> = store.read(Stage::Assessed, repo)?;
            let mut counters = BTreeMap::new();
            counters.insert("items".to_string(), assessed.len() as u64);
            counters.insert("ret".to_string(), assessed.iter().filter(|a| a.ret).count() as u64);
            for a in &assessed {
                if let Some(t) = &a.probe_trace {
                    let key = match t.outcome {
                        fairprobe_core::ProbeOutcome::ClientNegotiated => "outcome:client".to_string(),
                        fairprobe_core::ProbeOutcome::LinkNegotiated => "outcome:link".to_string(),
                        fairprobe_core::ProbeOutcome::Failed(r) => format!("outcome:{}", r.token()),
                    };
                    *counters.entry(key).or_insert(0) += 1;
                }
            }
            self.manifest
                .step_mut(5)
                .repositories
                .insert(repo.clone(), RepoStatus { status: StepStatus::Complete, counters, ..Default::default() });
        }
        Ok(StepStatus::Complete)
    }

    /// Scores the assessed catalogue.
    pub fn build_report(&self) -> Result<ScoreReport, PipelineError> {
        let store = self.store();
        let descriptors = self.read_repos().unwrap_or_default();
        let names: BTreeMap<&str, &str> =
            descriptors.iter().map(|d| (d.registry_id.as_str(), d.name.as_str())).collect();
        let mut per_repo: Vec<(String, Vec<AssessmentResult>)> = Vec::new();
        let mut wildcard = 0u64;
        for repo in self.harvested() {
            let assessed: Vec<AssessmentResult> = store.read(Stage::Assessed, &repo)?;
            let parsed: Vec<ParsedItem> = store.read(Stage::Parsed, &repo)?;
            wildcard += parsed.iter().filter(|p| is_wildcard_annotated(&p.record)).count() as u64;
            per_repo.push((repo, assessed));
        }
        let mut warnings = Vec::new();
        let mut complete = true;
        for s in 1..=STEPS {
            let st = self.status(s);
            if st != StepStatus::Complete {
                complete = false;
                warnings.push(format!("step {s} ({}) is {st}", step_name(s)));
            }
        }
        for (repo, st) in &self.manifest.step(3).repositories {
            if st.status != StepStatus::Complete {
                complete = false;
                let why = match (&st.harvest, &st.failure) {
                    (Some(h), _) if h.truncated => format!("cut after {} pages by max_pages", h.pages),
                    (_, Some(f)) => f.clone(),
                    _ => "unfinished".to_string(),
                };
                warnings.push(format!("INCOMPLETE harvest of {repo} ({why}); scores cover a partial corpus"));
            }
        }
        let all = per_repo.iter().flat_map(|(_, a)| a.iter().map(|x| x.predicates()));
        let (stats, d_size) = match compute_stats(all) {
            Ok(s) => {
                let d = s.totals.d_size;
                (Some(s), d)
            }
            Err(ScoringError::EmptyCorpus) => (None, 0),
            Err(e) => return Err(PipelineError::BadArtifact(self.dir.join("catalogue"), e.to_string())),
        };
        let mut rows = Vec::new();
        let mut excluded = Vec::new();
        for (repo, assessed) in &per_repo {
            let name = names.get(repo.as_str()).copied().unwrap_or(repo).to_string();
            match &stats {
                Some(stats) if !assessed.is_empty() => {
                    let score = score_repository(repo, assessed.iter().map(|a| a.predicates()), stats)
                        .expect("non-empty repository");
                    rows.push(RepositoryRow { name, score });
                }
                _ => excluded.push(name),
            }
        }
        sort_repository_rows(&mut rows);
        Ok(ScoreReport {
            run_id: self.manifest.run_id.clone(),
            execution_date: self.manifest.execution_date.clone(),
            d_size,
            repositories: rows,
            stats,
            excluded_repositories: excluded,
            wildcard_annotated: wildcard,
            api_adoption: api_adoption_stats(&descriptors),
            registry_size: descriptors.len() as u64,
            complete,
            warnings,
        })
    }

    /// Scores the catalogue and writes the report files.
    pub fn report(&mut self) -> Result<ScoreReport, PipelineError> {
        let report = self.build_report()?;
        crate::report::write_report(&self.dir, &report)?;
        self.manifest.reported_at = Some(now());
        self.save()?;
        Ok(report)
    }
}

fn save_manifest(dir: &Path, m: &RunManifest) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
}

/// Result of [`run_all`].
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub report: ScoreReport,
}

/// Runs steps 1 to 5 and the report in a new run. A partial step does not
/// stop the chain; its gaps are reported as warnings.
pub fn run_all(config: Config) -> Result<RunOutcome, PipelineError> {
    let mut run = Run::create(config)?;
    for step in 1..=STEPS {
        run.run_step(step, true)?;
    }
    let report = run.report()?;
    Ok(RunOutcome { run_dir: run.dir, report })
}
