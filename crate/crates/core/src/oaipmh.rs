//! OAI-PMH data model and metadata-format selection.

use alloc::string::String;
use core::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataFormatInfo {
    pub prefix: String,
    pub schema_url: String,
    pub namespace: String,
}

/// One record as delivered by `ListRecords`. Deleted records have an
/// empty payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub oai_identifier: String,
    pub datestamp: String,
    pub deleted: bool,
    /// Inner XML of the `<metadata>` element.
    pub payload: String,
    pub source_endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestPolicy {
    pub request_timeout: Duration,
    /// Extra attempts after a timeout or transport failure.
    pub retries_after_timeout: u32,
    /// Minimum spacing between consecutive requests to one endpoint.
    pub politeness_delay: Duration,
    pub max_pages: Option<u32>,
    /// How many `503 Retry-After` replies are waited out per request.
    pub flow_control_waits: u32,
}

impl Default for HarvestPolicy {
    fn default() -> Self {
        HarvestPolicy {
            request_timeout: Duration::from_secs(20),
            retries_after_timeout: 1,
            politeness_delay: Duration::from_millis(1000),
            max_pages: None,
            flow_control_waits: 3,
        }
    }
}

impl HarvestPolicy {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.request_timeout.is_zero() {
            return Err("request_timeout must be positive");
        }
        if self.max_pages == Some(0) {
            return Err("max_pages must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestSummary {
    pub pages: u32,
    pub records: u64,
    pub deleted: u64,
    pub completed: bool,
    /// Full-chain restarts after `badResumptionToken`.
    pub restarts: u32,
    /// Set when the chain stopped because `max_pages` was reached.
    pub truncated: bool,
}

/// Picks the Datacite flavour to harvest: exact `datacite` first, then the
/// first prefix starting with `datacite`, then the first starting with
/// `oai_datacite`.
pub fn select_datacite_prefix(formats: &[MetadataFormatInfo]) -> Option<&str> {
    let prefixes = || formats.iter().map(|f| f.prefix.as_str());
    prefixes()
        .find(|p| *p == "datacite")
        .or_else(|| prefixes().find(|p| p.starts_with("datacite")))
        .or_else(|| prefixes().find(|p| p.starts_with("oai_datacite")))
}
