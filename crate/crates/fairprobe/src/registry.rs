//! Repository registry access: a re3data-style HTTP API or a seed file.

use std::path::{Path, PathBuf};

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use fairprobe_core::registry::{
    is_absolute_http_url, parse_seed, ApiEndpoint, ApiKind, DataciteSupport, EntryWarning, RepositoryDescriptor,
};

use crate::http::{BodyMode, Http};
use crate::pool;
use crate::xml::{append_text, attribute, local_name, XmlError};

pub use fairprobe_core::registry::{api_adoption_stats, filter_by_api};

const MAX_REGISTRY_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("registry unreachable: {0}")]
    Unreachable(String),
    #[error("no registry URL and no seed file given")]
    NoSource,
    #[error("cannot read seed file {0}: {1}")]
    Seed(PathBuf, std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "location", rename_all = "snake_case")]
pub enum RegistrySource {
    Network(String),
    Seed(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryListing {
    pub source: RegistrySource,
    /// Sorted by registry id.
    pub descriptors: Vec<RepositoryDescriptor>,
    pub warnings: Vec<EntryWarning>,
}

/// Ids from a `{registry}/repositories` listing, in document order.
pub fn parse_list(xml: &str) -> Result<Vec<String>, XmlError> {
    let mut reader = Reader::from_str(xml);
    let mut ids = Vec::new();
    let mut stack: Vec<String> = Vec::new();
    let mut text = String::new();
    loop {
        match reader.read_event()? {
            Event::Eof => break,
            Event::Start(e) => {
                stack.push(local_name(&e));
                text.clear();
            }
            Event::End(_) => {
                let name = stack.pop().unwrap_or_default();
                if name == "id" && stack.last().map(String::as_str) == Some("repository") {
                    ids.push(text.trim().to_string());
                }
                text.clear();
            }
            other => {
                append_text(&other, &mut text)?;
            }
        }
    }
    if !stack.is_empty() {
        return Err(XmlError("unexpected end of document".into()));
    }
    Ok(ids)
}

/// Maps one repository detail document by local element names. API
/// endpoints whose URL is not absolute http(s) are dropped and reported.
pub fn parse_detail(xml: &str) -> Result<(RepositoryDescriptor, Vec<String>), String> {
    let mut reader = Reader::from_str(xml);
    let mut id = String::new();
    let mut name = String::new();
    let mut apis: Vec<ApiEndpoint> = Vec::new();
    let mut quality: Vec<String> = Vec::new();
    let mut notes = Vec::new();
    let mut text = String::new();
    let mut api_type: Option<String> = None;
    let mut depth = 0usize;
    loop {
        let event = reader.read_event().map_err(|e| XmlError::from(e).to_string())?;
        match event {
            Event::Eof => break,
            Event::Start(e) => {
                depth += 1;
                text.clear();
                if local_name(&e) == "api" {
                    api_type = Some(attribute(&e, "apiType").map_err(|e| e.to_string())?.unwrap_or_default());
                }
            }
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                let t = text.trim().to_string();
                match e.local_name().into_inner() {
                    "re3data.orgIdentifier" if id.is_empty() => id = t,
                    "repositoryName" if name.is_empty() => name = t,
                    "api" => {
                        let kind = ApiKind::parse(api_type.take().as_deref().unwrap_or(""));
                        if is_absolute_http_url(&t) {
                            apis.push(ApiEndpoint { kind, url: t });
                        } else {
                            notes.push(format!("dropped {} endpoint {t:?}: not an absolute http(s) URL", kind.label()));
                        }
                    }
                    tag @ ("certificate" | "qualityManagement" | "policyName") if !t.is_empty() => {
                        quality.push(format!("{tag}={t}"));
                    }
                    _ => {}
                }
                text.clear();
            }
            other => {
                append_text(&other, &mut text).map_err(|e| e.to_string())?;
            }
        }
    }
    if depth != 0 {
        return Err("unexpected end of document".into());
    }
    if id.is_empty() {
        return Err("entry has no identifier".into());
    }
    if name.is_empty() {
        return Err(format!("entry {id} has no name"));
    }
    Ok((
        RepositoryDescriptor {
            registry_id: id,
            name,
            api_endpoints: apis,
            quality_info: quality,
            datacite_support: DataciteSupport::Unknown,
        },
        notes,
    ))
}

fn join(base: &str, tail: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), tail)
}

/// Fetches the listing and every detail document, `workers` at a time.
pub fn fetch_network(http: &Http, registry: &str, workers: usize) -> Result<RegistryListing, RegistryError> {
    let list_url = join(registry, "repositories");
    let resp = http
        .get(&list_url, Some("application/xml"), BodyMode::Text(MAX_REGISTRY_BYTES))
        .map_err(|e| RegistryError::Unreachable(format!("{list_url}: {e}")))?;
    if resp.status != 200 {
        return Err(RegistryError::Unreachable(format!("{list_url}: HTTP {}", resp.status)));
    }
    let ids = parse_list(&resp.body).map_err(|e| RegistryError::Unreachable(format!("{list_url}: {e}")))?;
    let jobs: Vec<(usize, String)> = ids.into_iter().enumerate().collect();
    let (results, _) = pool::run(jobs, workers, |(index, id)| {
        let enc: String = url::form_urlencoded::byte_serialize(id.as_bytes()).collect();
        let url = join(registry, &format!("repository/{enc}"));
        let outcome = match http.get(&url, Some("application/xml"), BodyMode::Text(MAX_REGISTRY_BYTES)) {
            Ok(r) if r.status == 200 => parse_detail(&r.body),
            Ok(r) => Err(format!("{url}: HTTP {}", r.status)),
            Err(e) => Err(format!("{url}: {e}")),
        };
        (index, outcome)
    });
    let mut listing = RegistryListing { source: RegistrySource::Network(registry.to_string()), descriptors: Vec::new(), warnings: Vec::new() };
    let mut seen = std::collections::HashSet::new();
    for (index, outcome) in results {
        match outcome {
            Ok((d, _)) if !seen.insert(d.registry_id.clone()) => listing
                .warnings
                .push(EntryWarning { index, reason: format!("duplicate registry id {}", d.registry_id) }),
            Ok((d, notes)) => {
                listing.warnings.extend(notes.into_iter().map(|reason| EntryWarning { index, reason }));
                listing.descriptors.push(d);
            }
            Err(reason) => listing.warnings.push(EntryWarning { index, reason }),
        }
    }
    finish(&mut listing);
    Ok(listing)
}

pub fn read_seed(path: &Path) -> Result<RegistryListing, RegistryError> {
    let text = std::fs::read_to_string(path).map_err(|e| RegistryError::Seed(path.to_path_buf(), e))?;
    let parsed = parse_seed(&text);
    let mut listing = RegistryListing {
        source: RegistrySource::Seed(path.to_path_buf()),
        descriptors: parsed.descriptors,
        warnings: parsed.warnings,
    };
    finish(&mut listing);
    Ok(listing)
}

fn finish(listing: &mut RegistryListing) {
    listing.descriptors.sort_by(|a, b| a.registry_id.cmp(&b.registry_id));
    for w in &listing.warnings {
        log::warn!("registry entry {}: {}", w.index, w.reason);
    }
}

/// The network source is preferred. The seed file is used when no
/// registry URL is set, or when the registry is unreachable and
/// `allow_seed_fallback` is on.
pub fn fetch_repository_list(
    http: &Http,
    registry: Option<&str>,
    seed: Option<&Path>,
    allow_seed_fallback: bool,
    workers: usize,
) -> Result<RegistryListing, RegistryError> {
    match (registry, seed) {
        (Some(url), seed) => match fetch_network(http, url, workers) {
            Ok(l) => Ok(l),
            Err(e) => match seed {
                Some(path) if allow_seed_fallback => {
                    log::warn!("{e}; falling back to seed file {}", path.display());
                    read_seed(path)
                }
                _ => Err(e),
            },
        },
        (None, Some(path)) => read_seed(path),
        (None, None) => Err(RegistryError::NoSource),
    }
}

/// One JSON descriptor per line.
pub fn to_ndjson(descriptors: &[RepositoryDescriptor]) -> String {
    let mut out = String::new();
    for d in descriptors {
        out.push_str(&serde_json::to_string(d).expect("descriptor serializes"));
        out.push('\n');
    }
    out
}

pub fn from_ndjson(text: &str) -> Result<Vec<RepositoryDescriptor>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detail_document() {
        let xml = r#"<?xml version="1.0"?>
<r3d:re3data xmlns:r3d="http://www.re3data.org/schema/2-2"><r3d:repository>
<r3d:re3data.orgIdentifier>r3d100010134</r3d:re3data.orgIdentifier>
<r3d:repositoryName language="eng">PANGAEA</r3d:repositoryName>
<r3d:additionalName language="eng">Data Publisher for Earth &amp; Environmental Science</r3d:additionalName>
<r3d:api apiType="OAI-PMH">https://ws.pangaea.de/oai/provider</r3d:api>
<r3d:api apiType="REST">https://ws.pangaea.de/es/</r3d:api>
<r3d:api apiType="other">ftp://ftp.pangaea.de</r3d:api>
<r3d:certificate>CoreTrustSeal</r3d:certificate>
<r3d:qualityManagement>yes</r3d:qualityManagement>
</r3d:repository></r3d:re3data>"#;
        let (d, notes) = parse_detail(xml).unwrap();
        assert_eq!(d.registry_id, "r3d100010134");
        assert_eq!(d.name, "PANGAEA");
        assert_eq!(d.api_endpoints.len(), 2);
        assert_eq!(d.api_endpoints[0].kind, ApiKind::OaiPmh);
        assert_eq!(d.quality_info, vec!["certificate=CoreTrustSeal", "qualityManagement=yes"]);
        assert_eq!(notes.len(), 1);
    }

    #[test]
    fn malformed_details() {
        assert!(parse_detail("<repository><repositoryName>x</repositoryName></repository>").is_err());
        assert!(parse_detail("<repository><re3data.orgIdentifier>r</re3data.orgIdentifier></repository>").is_err());
        assert!(parse_detail("<repository><re3data.orgIdentifier>r</re3data.orgIdentifier>").is_err());
    }

    #[test]
    fn listing() {
        let xml = "<list><repository><id>r1</id><name>A</name></repository><repository><id>r2</id></repository></list>";
        assert_eq!(parse_list(xml).unwrap(), vec!["r1", "r2"]);
        assert!(parse_list("<list/>").unwrap().is_empty());
    }

    #[test]
    fn seed_fallback_rules() {
        let dir = tempfile::tempdir().unwrap();
        let seed = dir.path().join("seed.txt");
        std::fs::write(&seed, "b|B|OAI-PMH=https://b.example/oai\na|A||\n# c\nbroken\n").unwrap();
        let http = Http::new(std::time::Duration::from_millis(300));
        let unreachable = Some("http://127.0.0.1:9/api");

        let l = fetch_repository_list(&http, None, Some(&seed), false, 2).unwrap();
        assert_eq!(l.descriptors.iter().map(|d| d.registry_id.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(l.warnings.len(), 1);
        assert_eq!(l.warnings[0].index, 2);

        assert!(matches!(
            fetch_repository_list(&http, unreachable, Some(&seed), false, 2),
            Err(RegistryError::Unreachable(_))
        ));
        let l = fetch_repository_list(&http, unreachable, Some(&seed), true, 2).unwrap();
        assert_eq!(l.source, RegistrySource::Seed(seed.clone()));
        assert!(matches!(fetch_repository_list(&http, None, None, true, 2), Err(RegistryError::NoSource)));
    }

    #[test]
    fn ndjson_round_trip() {
        let d = parse_detail("<repository><re3data.orgIdentifier>r</re3data.orgIdentifier><repositoryName>R</repositoryName></repository>").unwrap().0;
        let text = to_ndjson(&[d.clone(), d.clone()]);
        assert_eq!(from_ndjson(&text).unwrap(), vec![d.clone(), d]);
    }
}
