//! Scenario scripts: the scripted landscape the mock serves and the
//! ground truth the oracle reads.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    /// Extra loopback listeners addressable as `{host:N}`, N = 1..=hosts.
    #[serde(default)]
    pub hosts: u16,
    #[serde(default)]
    pub repositories: Vec<MockRepository>,
    /// DOI to resolver script. DOIs without a route get 404.
    #[serde(default)]
    pub resolver_routes: BTreeMap<String, ResolverRoute>,
    /// Registry entries without an OAI-PMH endpoint on the mock.
    #[serde(default)]
    pub registry_only: Vec<RegistryEntry>,
    #[serde(default)]
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// How long a scripted timeout keeps the client waiting.
    pub stall_ms: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing { stall_ms: 3000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRepository {
    pub id: String,
    pub name: String,
    /// Metadata prefixes answered by `ListMetadataFormats`.
    pub prefixes: Vec<String>,
    pub page_size: usize,
    #[serde(default)]
    pub records: Vec<MockRecord>,
    #[serde(default)]
    pub faults: Vec<Fault>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    #[serde(default)]
    pub image: bool,
    #[serde(default)]
    pub chrono: bool,
    #[serde(default)]
    pub geo: bool,
    #[serde(default)]
    pub lic: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRecord {
    pub oai_identifier: String,
    pub doi: String,
    #[serde(default)]
    pub deleted: bool,
    #[serde(default)]
    pub truth: Truth,
    /// Annotated formats. Must hold an `image/` type only if `truth.image`.
    #[serde(default)]
    pub formats: Vec<String>,
    /// Literal metadata payload; generated from `truth` when absent.
    #[serde(default)]
    pub payload: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Fault {
    /// Requests for `page` stall past the client timeout.
    Timeout { page: usize, times: u32 },
    /// Requests for `page` get `503` with `Retry-After`.
    Unavailable { page: usize, times: u32, retry_after: u64 },
    /// Requests for `page` get `500`.
    ServerError { page: usize, times: u32 },
    /// The token handed out with `after_page` is refused with
    /// `badResumptionToken`.
    InvalidateToken { after_page: usize, times: u32 },
    /// Requests for `page` get a truncated XML document.
    Malformed { page: usize, times: u32 },
    /// Requests for `page` get an OAI error with `code`.
    OaiError { page: usize, times: u32, code: String },
    /// `ListMetadataFormats` stalls past the client timeout.
    FormatsTimeout { times: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolverRoute {
    /// Hop 0 answers `/doi/{doi}`, hop N answers `/doi/{doi}/~N`.
    pub hops: Vec<ScriptedResponse>,
    /// Whether the route should make the probe succeed.
    pub retrievable: bool,
}

/// One scripted reply. `location` and `link` may use `{hop:N}` (absolute
/// URL of hop N of the same route) and `{host:N}` (base URL of listener N).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedResponse {
    pub status: u16,
    #[serde(default)]
    pub content_type: Option<String>,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub link: Option<String>,
    /// Reply 406 unless the request's Accept header equals this value.
    #[serde(default)]
    pub require_accept: Option<String>,
    #[serde(default)]
    pub stall_ms: u64,
    #[serde(default)]
    pub body_len: usize,
    /// Listener that hop URLs point to.
    #[serde(default)]
    pub host: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: String,
    pub name: String,
    /// (api type, url) pairs.
    #[serde(default)]
    pub apis: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid script: {0}")]
pub struct InvalidScript(pub String);

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<ScenarioScript, InvalidScript> {
        let s: ScenarioScript = serde_json::from_str(text).map_err(|e| InvalidScript(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), InvalidScript> {
        let bad = |m: String| Err(InvalidScript(m));
        let mut ids = BTreeSet::new();
        for r in &self.repositories {
            if r.id.is_empty() || r.id.contains('/') || !ids.insert(r.id.as_str()) {
                return bad(format!("repository id {:?} empty, contains '/' or repeated", r.id));
            }
            if r.page_size == 0 {
                return bad(format!("{}: page_size must be positive", r.id));
            }
            let pages = r.pages().max(1);
            for f in &r.faults {
                let page = match f {
                    Fault::Timeout { page, .. }
                    | Fault::Unavailable { page, .. }
                    | Fault::ServerError { page, .. }
                    | Fault::Malformed { page, .. }
                    | Fault::OaiError { page, .. } => *page,
                    Fault::InvalidateToken { after_page, .. } => after_page + 1,
                    Fault::FormatsTimeout { .. } => 0,
                };
                if page >= pages {
                    return bad(format!("{}: fault {f:?} references a page beyond {pages}", r.id));
                }
            }
            for rec in &r.records {
                if rec.oai_identifier.is_empty() {
                    return bad(format!("{}: record without oai identifier", r.id));
                }
                let image_format = rec.formats.iter().any(|f| fairprobe_core::media::is_image_media_type(f));
                if image_format && !rec.truth.image {
                    return bad(format!("{}: {} has an image format but is not an image", r.id, rec.oai_identifier));
                }
                if !rec.deleted && rec.payload.is_none() && rec.doi.is_empty() {
                    return bad(format!("{}: {} has no DOI", r.id, rec.oai_identifier));
                }
            }
        }
        for (doi, route) in &self.resolver_routes {
            if route.hops.is_empty() {
                return bad(format!("route {doi} has no hops"));
            }
            for h in &route.hops {
                if h.host > self.hosts {
                    return bad(format!("route {doi} names listener {} of {}", h.host, self.hosts));
                }
            }
        }
        Ok(())
    }
}

impl MockRepository {
    pub fn pages(&self) -> usize {
        self.records.len().div_ceil(self.page_size.max(1))
    }

    /// Whether step 2 should select this repository.
    pub fn offers_datacite(&self) -> bool {
        self.prefixes
            .iter()
            .any(|p| p == "datacite" || p.starts_with("datacite") || p.starts_with("oai_datacite"))
    }
}
