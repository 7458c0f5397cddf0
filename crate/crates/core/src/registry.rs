//! Repository registry entries, API filtering and API adoption statistics.
//!
//! Also hosts the offline seed-file grammar, one repository per line:
//!
//! ```text
//! # comment
//! registry_id|name|KIND=url;KIND=url|tag;tag
//! ```
//!
//! The API and tag fields may be empty or omitted. `KIND` is one of
//! `OAI-PMH`, `REST`, `SOAP`, `SPARQL` (case-insensitive) or any other token.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum ApiKind {
    OaiPmh,
    Rest,
    Soap,
    Sparql,
    Other(String),
}

impl ApiKind {
    pub fn parse(token: &str) -> ApiKind {
        let t = token.trim();
        if t.eq_ignore_ascii_case("OAI-PMH") || t.eq_ignore_ascii_case("OAI") {
            ApiKind::OaiPmh
        } else if t.eq_ignore_ascii_case("REST") {
            ApiKind::Rest
        } else if t.eq_ignore_ascii_case("SOAP") {
            ApiKind::Soap
        } else if t.eq_ignore_ascii_case("SPARQL") {
            ApiKind::Sparql
        } else {
            ApiKind::Other(t.to_string())
        }
    }

    pub fn label(&self) -> &str {
        match self {
            ApiKind::OaiPmh => "OAI-PMH",
            ApiKind::Rest => "REST",
            ApiKind::Soap => "SOAP",
            ApiKind::Sparql => "SPARQL",
            ApiKind::Other(s) => s,
        }
    }
}

impl fmt::Display for ApiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl From<ApiKind> for String {
    fn from(k: ApiKind) -> String {
        k.label().to_string()
    }
}

impl From<String> for ApiKind {
    fn from(s: String) -> ApiKind {
        ApiKind::parse(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEndpoint {
    pub kind: ApiKind,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DataciteSupport {
    #[default]
    Unknown,
    Supported {
        prefix: String,
    },
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryDescriptor {
    pub registry_id: String,
    pub name: String,
    #[serde(default)]
    pub api_endpoints: Vec<ApiEndpoint>,
    /// Certification and policy tags, carried verbatim.
    #[serde(default)]
    pub quality_info: Vec<String>,
    #[serde(default)]
    pub datacite_support: DataciteSupport,
}

impl RepositoryDescriptor {
    pub fn has_api(&self, kind: &ApiKind) -> bool {
        self.api_endpoints.iter().any(|e| &e.kind == kind)
    }

    pub fn endpoints_of<'a>(&'a self, kind: &'a ApiKind) -> impl Iterator<Item = &'a ApiEndpoint> {
        self.api_endpoints.iter().filter(move |e| &e.kind == kind)
    }
}

/// Absolute `http`/`https` URL with a host.
pub fn is_absolute_http_url(s: &str) -> bool {
    match url::Url::parse(s.trim()) {
        Ok(u) => matches!(u.scheme(), "http" | "https") && u.host().is_some(),
        Err(_) => false,
    }
}

/// Repositories offering at least one endpoint of `kind`, in input order.
/// A registry id seen twice is kept once.
pub fn filter_by_api(repos: &[RepositoryDescriptor], kind: &ApiKind) -> Vec<RepositoryDescriptor> {
    let mut seen = BTreeSet::new();
    repos
        .iter()
        .filter(|r| r.has_api(kind))
        .filter(|r| seen.insert(r.registry_id.clone()))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiAdoptionRow {
    pub api: String,
    pub absolute: u64,
    /// Share of all repositories, in percent.
    pub relative_percent: f64,
}

/// Label of the row counting repositories without any registered API.
pub const NO_API_LABEL: &str = "none";

/// One row per API kind present plus a `none` row; each kind counts the
/// repositories having it, so multi-API repositories appear in several rows.
/// Rows are ordered by count, descending; the `none` row comes last.
pub fn api_adoption_stats(repos: &[RepositoryDescriptor]) -> Vec<ApiAdoptionRow> {
    if repos.is_empty() {
        return Vec::new();
    }
    let total = repos.len() as f64;
    let mut per_kind: BTreeMap<ApiKind, u64> = BTreeMap::new();
    let mut without = 0u64;
    for repo in repos {
        let kinds: BTreeSet<&ApiKind> = repo.api_endpoints.iter().map(|e| &e.kind).collect();
        if kinds.is_empty() {
            without += 1;
        }
        for k in kinds {
            *per_kind.entry(k.clone()).or_default() += 1;
        }
    }
    let mut rows: Vec<ApiAdoptionRow> = per_kind
        .into_iter()
        .map(|(k, n)| ApiAdoptionRow {
            api: k.label().to_string(),
            absolute: n,
            relative_percent: n as f64 / total * 100.0,
        })
        .collect();
    rows.sort_by(|a, b| b.absolute.cmp(&a.absolute).then_with(|| a.api.cmp(&b.api)));
    rows.push(ApiAdoptionRow {
        api: NO_API_LABEL.to_string(),
        absolute: without,
        relative_percent: without as f64 / total * 100.0,
    });
    rows
}

/// A registry entry that was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryWarning {
    /// Zero-based index of the entry in the source listing.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedParse {
    pub descriptors: Vec<RepositoryDescriptor>,
    pub warnings: Vec<EntryWarning>,
}

/// Parses a seed file. Blank lines and `#` comments are not entries;
/// malformed entries are reported and skipped.
pub fn parse_seed(text: &str) -> SeedParse {
    let mut out = SeedParse::default();
    let mut ids = BTreeSet::new();
    let entries = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    for (index, line) in entries.enumerate() {
        match parse_seed_line(line) {
            Ok(desc) => {
                if ids.insert(desc.registry_id.clone()) {
                    out.descriptors.push(desc);
                } else {
                    out.warnings.push(EntryWarning {
                        index,
                        reason: format!("duplicate registry id {}", desc.registry_id),
                    });
                }
            }
            Err(reason) => out.warnings.push(EntryWarning { index, reason }),
        }
    }
    out
}

fn parse_seed_line(line: &str) -> Result<RepositoryDescriptor, String> {
    let fields: Vec<&str> = line.split('|').collect();
    if !(2..=4).contains(&fields.len()) {
        return Err(format!("expected 2 to 4 '|'-separated fields, found {}", fields.len()));
    }
    let registry_id = fields[0].trim();
    let name = fields[1].trim();
    if registry_id.is_empty() {
        return Err("empty registry id".into());
    }
    if name.is_empty() {
        return Err("empty name".into());
    }
    let mut api_endpoints = Vec::new();
    if let Some(apis) = fields.get(2) {
        for item in apis.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (kind, url) = item
                .split_once('=')
                .ok_or_else(|| format!("api entry {item:?} lacks '='"))?;
            let url = url.trim();
            if !is_absolute_http_url(url) {
                return Err(format!("api url {url:?} is not an absolute http(s) URL"));
            }
            api_endpoints.push(ApiEndpoint { kind: ApiKind::parse(kind), url: url.to_string() });
        }
    }
    let quality_info = fields
        .get(3)
        .map(|t| {
            t.split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
        .unwrap_or_default();
    Ok(RepositoryDescriptor {
        registry_id: registry_id.to_string(),
        name: name.to_string(),
        api_endpoints,
        quality_info,
        datacite_support: DataciteSupport::Unknown,
    })
}

/// Renders a descriptor back into seed-file syntax.
pub fn to_seed_line(repo: &RepositoryDescriptor) -> String {
    let apis: Vec<String> = repo
        .api_endpoints
        .iter()
        .map(|e| format!("{}={}", e.kind.label(), e.url))
        .collect();
    format!("{}|{}|{}|{}", repo.registry_id, repo.name, apis.join(";"), repo.quality_info.join(";"))
}
