//! Datacite record model, the image-of-interest test and a canonical
//! kernel-4 XML writer.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::media;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DataciteRecord {
    pub doi: String,
    #[serde(default)]
    pub resource_type_general: Option<String>,
    #[serde(default)]
    pub formats: Vec<String>,
    #[serde(default)]
    pub dates: Vec<DateEntry>,
    #[serde(default)]
    pub geo_locations: Vec<GeoLocation>,
    #[serde(default)]
    pub rights: Vec<RightsEntry>,
    /// Registry id of the repository the record was harvested from.
    #[serde(default)]
    pub repository: String,
    #[serde(default)]
    pub oai_identifier: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateEntry {
    pub value: String,
    /// Verbatim `dateType` attribute; compared case-sensitively.
    pub date_type: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoElement {
    Point,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeoLocation {
    Point { lat: f64, lon: f64 },
    Box { south: f64, west: f64, north: f64, east: f64 },
    Place { text: String },
    /// A point or box whose coordinates did not parse. Never valid.
    Malformed { element: GeoElement, raw: String },
}

fn lat_ok(v: f64) -> bool {
    v.is_finite() && (-90.0..=90.0).contains(&v)
}

fn lon_ok(v: f64) -> bool {
    v.is_finite() && (-180.0..=180.0).contains(&v)
}

impl GeoLocation {
    /// Validity of the location content. Free-text places count only when
    /// `accept_place` is set.
    pub fn is_valid(&self, accept_place: bool) -> bool {
        match *self {
            GeoLocation::Point { lat, lon } => lat_ok(lat) && lon_ok(lon),
            GeoLocation::Box { south, west, north, east } => {
                lat_ok(south) && lat_ok(north) && lon_ok(west) && lon_ok(east) && south <= north
            }
            GeoLocation::Place { ref text } => accept_place && !text.trim().is_empty(),
            GeoLocation::Malformed { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RightsEntry {
    pub text: String,
    #[serde(default)]
    pub rights_uri: Option<String>,
}

/// True when the record describes an image: `resourceTypeGeneral` is
/// `Image` (any case) or some format is an `image/*` media type.
pub fn is_of_interest(record: &DataciteRecord) -> bool {
    record
        .resource_type_general
        .as_deref()
        .is_some_and(|t| t.trim().eq_ignore_ascii_case("image"))
        || record.formats.iter().any(|f| media::is_image_media_type(f))
}

/// Records of interest only because a format literally reads `image/*`.
pub fn is_wildcard_annotated(record: &DataciteRecord) -> bool {
    let typed_image = record
        .resource_type_general
        .as_deref()
        .is_some_and(|t| t.trim().eq_ignore_ascii_case("image"));
    let concrete = record
        .formats
        .iter()
        .any(|f| media::is_image_media_type(f) && !media::is_image_wildcard(f));
    !typed_image && !concrete && record.formats.iter().any(|f| media::is_image_wildcard(f))
}

pub fn escape_xml(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
}

fn element(out: &mut String, name: &str, text: &str) {
    let _ = write!(out, "<{name}>");
    escape_xml(text, out);
    let _ = write!(out, "</{name}>");
}

/// Serializes the modeled fields as a Datacite kernel-4 `<resource>`.
/// `repository` and `oai_identifier` live outside the payload and are not
/// written.
pub fn to_canonical_xml(record: &DataciteRecord) -> String {
    let mut out = String::new();
    out.push_str("<resource xmlns=\"http://datacite.org/schema/kernel-4\">\n");
    out.push_str("  <identifier identifierType=\"DOI\">");
    escape_xml(&record.doi, &mut out);
    out.push_str("</identifier>\n");
    if let Some(t) = record.resource_type_general.as_deref() {
        out.push_str("  <resourceType resourceTypeGeneral=\"");
        escape_xml(t, &mut out);
        out.push_str("\"/>\n");
    }
    if !record.formats.is_empty() {
        out.push_str("  <formats>");
        for f in &record.formats {
            element(&mut out, "format", f);
        }
        out.push_str("</formats>\n");
    }
    if !record.dates.is_empty() {
        out.push_str("  <dates>");
        for d in &record.dates {
            out.push_str("<date dateType=\"");
            escape_xml(&d.date_type, &mut out);
            out.push_str("\">");
            escape_xml(&d.value, &mut out);
            out.push_str("</date>");
        }
        out.push_str("</dates>\n");
    }
    if !record.rights.is_empty() {
        out.push_str("  <rightsList>");
        for r in &record.rights {
            out.push_str("<rights");
            if let Some(uri) = r.rights_uri.as_deref() {
                out.push_str(" rightsURI=\"");
                escape_xml(uri, &mut out);
                out.push('"');
            }
            out.push('>');
            escape_xml(&r.text, &mut out);
            out.push_str("</rights>");
        }
        out.push_str("</rightsList>\n");
    }
    if !record.geo_locations.is_empty() {
        out.push_str("  <geoLocations>\n");
        for g in &record.geo_locations {
            out.push_str("    <geoLocation>");
            match g {
                GeoLocation::Point { lat, lon } => {
                    let _ = write!(
                        out,
                        "<geoLocationPoint><pointLongitude>{lon}</pointLongitude><pointLatitude>{lat}</pointLatitude></geoLocationPoint>"
                    );
                }
                GeoLocation::Box { south, west, north, east } => {
                    let _ = write!(
                        out,
                        "<geoLocationBox><westBoundLongitude>{west}</westBoundLongitude><eastBoundLongitude>{east}</eastBoundLongitude><southBoundLatitude>{south}</southBoundLatitude><northBoundLatitude>{north}</northBoundLatitude></geoLocationBox>"
                    );
                }
                GeoLocation::Place { text } => element(&mut out, "geoLocationPlace", text),
                GeoLocation::Malformed { element: GeoElement::Point, raw } => {
                    element(&mut out, "geoLocationPoint", raw)
                }
                GeoLocation::Malformed { element: GeoElement::Box, raw } => {
                    element(&mut out, "geoLocationBox", raw)
                }
            }
            out.push_str("</geoLocation>\n");
        }
        out.push_str("  </geoLocations>\n");
    }
    out.push_str("</resource>\n");
    out
}
