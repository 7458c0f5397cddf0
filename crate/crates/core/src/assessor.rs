//! The three metadata-only quality predicates.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::datacite::DataciteRecord;
use crate::probe::ProbeTrace;
use crate::registry::is_absolute_http_url;
use crate::scoring::Predicates;

/// The `dateType` token that satisfies the chronology criterion.
pub const CREATED_DATE_TYPE: &str = "Created";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeoPolicy {
    /// Only points and boxes count; free-text places are ignored.
    pub require_coordinates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub doi: String,
    pub repository: String,
    pub chrono: bool,
    pub geo: bool,
    pub lic: bool,
    /// Unset until the retrievability probe has run.
    pub ret: bool,
    #[serde(default)]
    pub probe_trace: Option<ProbeTrace>,
}

impl AssessmentResult {
    pub fn predicates(&self) -> Predicates {
        Predicates { chrono: self.chrono, geo: self.geo, lic: self.lic, ret: self.ret }
    }
}

/// Some date is typed exactly `Created` and carries a non-empty value.
pub fn f_chrono(record: &DataciteRecord) -> bool {
    record
        .dates
        .iter()
        .any(|d| d.date_type == CREATED_DATE_TYPE && !d.value.trim().is_empty())
}

/// Some geo location validates.
pub fn f_geo(record: &DataciteRecord, policy: GeoPolicy) -> bool {
    record
        .geo_locations
        .iter()
        .any(|g| g.is_valid(!policy.require_coordinates))
}

/// Some `rightsURI` is an absolute http(s) URL.
pub fn f_lic(record: &DataciteRecord) -> bool {
    record
        .rights
        .iter()
        .filter_map(|r| r.rights_uri.as_deref())
        .any(is_absolute_http_url)
}

/// Evaluates the metadata predicates; `ret` stays false.
pub fn assess_metadata(record: &DataciteRecord, policy: GeoPolicy) -> AssessmentResult {
    AssessmentResult {
        doi: record.doi.clone(),
        repository: record.repository.clone(),
        chrono: f_chrono(record),
        geo: f_geo(record, policy),
        lic: f_lic(record),
        ret: false,
        probe_trace: None,
    }
}
