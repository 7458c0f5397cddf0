//! Datacite XML parsing (kernel 3 and 4).
//!
//! Elements are matched by local name below the first `resource` element,
//! so any namespace prefix and any wrapping (e.g. `oai_datacite/payload`)
//! is accepted. Unknown elements are ignored.

use fairprobe_core::datacite::{DataciteRecord, DateEntry, GeoElement, GeoLocation, RightsEntry};
use quick_xml::events::Event;
use quick_xml::Reader;

use crate::xml::{append_text, attribute, local_name, XmlError};

pub use fairprobe_core::datacite::{is_of_interest, is_wildcard_annotated, to_canonical_xml};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataciteError {
    #[error("record has no identifier")]
    MissingIdentifier,
    #[error("payload holds no Datacite resource element")]
    NotDatacite,
    #[error(transparent)]
    Xml(#[from] XmlError),
}

impl DataciteError {
    pub fn token(&self) -> &'static str {
        match self {
            DataciteError::MissingIdentifier => "missing-identifier",
            DataciteError::NotDatacite => "not-datacite",
            DataciteError::Xml(_) => "xml-malformed",
        }
    }
}

struct Open {
    name: String,
    text: String,
    attr: Option<String>,
}

#[derive(Default)]
struct GeoCapture {
    children: Vec<(String, String)>,
    raw_parts: Vec<String>,
}

/// Parses the metadata payload of one OAI record. `repository` and
/// `oai_identifier` are left empty for the caller to fill in.
pub fn parse_record(payload: &str) -> Result<DataciteRecord, DataciteError> {
    let mut reader = Reader::from_str(payload);
    let mut record = DataciteRecord::default();
    let mut found = false;
    let mut doi: Option<String> = None;
    // Element stack below `resource`; `resource` itself is not on it.
    let mut stack: Vec<Open> = Vec::new();
    let mut geo: Option<GeoCapture> = None;

    loop {
        let event = reader.read_event().map_err(XmlError::from)?;
        match &event {
            Event::Eof => {
                if found {
                    return Err(XmlError("unexpected end of document".into()).into());
                }
                break;
            }
            Event::Start(e) | Event::Empty(e) => {
                let name = local_name(e);
                let is_empty = matches!(event, Event::Empty(_));
                if !found {
                    if name == "resource" {
                        found = true;
                        if is_empty {
                            break;
                        }
                    }
                    continue;
                }
                let attr = match (path_of(&stack).as_slice(), name.as_str()) {
                    ([], "resourceType") => attribute(e, "resourceTypeGeneral")?,
                    (["dates"], "date") => attribute(e, "dateType")?,
                    (["rightsList"], "rights") => attribute(e, "rightsURI")?,
                    _ => None,
                };
                if matches!(path_of(&stack).as_slice(), ["geoLocations", "geoLocation"])
                    && is_geo_element(&name)
                {
                    geo = Some(GeoCapture::default());
                }
                stack.push(Open { name, text: String::new(), attr });
                if is_empty {
                    close(&mut stack, &mut record, &mut doi, &mut geo);
                }
            }
            Event::End(_) => {
                if !found {
                    continue;
                }
                if stack.is_empty() {
                    // end of `resource`
                    break;
                }
                close(&mut stack, &mut record, &mut doi, &mut geo);
            }
            other => {
                if let Some(top) = stack.last_mut() {
                    append_text(other, &mut top.text)?;
                }
            }
        }
    }

    if !found {
        return Err(DataciteError::NotDatacite);
    }
    match doi {
        Some(d) if !d.is_empty() => record.doi = d,
        _ => return Err(DataciteError::MissingIdentifier),
    }
    Ok(record)
}

fn path_of(stack: &[Open]) -> Vec<&str> {
    stack.iter().map(|o| o.name.as_str()).collect()
}

fn is_geo_element(name: &str) -> bool {
    matches!(name, "geoLocationPoint" | "geoLocationBox" | "geoLocationPlace")
}

fn close(
    stack: &mut Vec<Open>,
    record: &mut DataciteRecord,
    doi: &mut Option<String>,
    geo: &mut Option<GeoCapture>,
) {
    let Some(open) = stack.pop() else { return };
    let text = open.text.trim().to_string();
    let parent: Vec<&str> = path_of(stack);
    match (parent.as_slice(), open.name.as_str()) {
        ([], "identifier") => {
            if doi.is_none() {
                *doi = Some(text);
            }
        }
        ([], "resourceType") => {
            record.resource_type_general =
                open.attr.map(|t| t.trim().to_string()).filter(|t| !t.is_empty());
        }
        (["formats"], "format") => record.formats.push(text),
        (["dates"], "date") => record.dates.push(DateEntry {
            value: text,
            date_type: open.attr.unwrap_or_default(),
        }),
        (["rightsList"], "rights") => record.rights.push(RightsEntry {
            text,
            rights_uri: open.attr.map(|u| u.trim().to_string()),
        }),
        (["geoLocations", "geoLocation"], name) if is_geo_element(name) => {
            let mut capture = geo.take().unwrap_or_default();
            if !text.is_empty() {
                capture.raw_parts.insert(0, text.clone());
            }
            record.geo_locations.push(build_geo(name, &text, capture));
        }
        (["geoLocations", "geoLocation", g], child) if is_geo_element(g) => {
            if let Some(capture) = geo.as_mut() {
                if !text.is_empty() {
                    capture.raw_parts.push(text.clone());
                }
                capture.children.push((child.to_string(), text));
            }
        }
        _ => {}
    }
}

fn coord(s: &str) -> Option<f64> {
    let v: f64 = s.trim().replace('\u{2212}', "-").parse().ok()?;
    v.is_finite().then_some(v)
}

fn numbers(text: &str, n: usize) -> Option<Vec<f64>> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != n {
        return None;
    }
    parts.into_iter().map(coord).collect()
}

fn build_geo(name: &str, text: &str, capture: GeoCapture) -> GeoLocation {
    let child = |key: &str| {
        capture
            .children
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| coord(v))
    };
    let raw = || {
        capture
            .raw_parts
            .iter()
            .flat_map(|p| p.split_whitespace())
            .collect::<Vec<_>>()
            .join(" ")
    };
    match name {
        "geoLocationPlace" => GeoLocation::Place { text: text.to_string() },
        "geoLocationPoint" => {
            let parsed = if capture.children.is_empty() {
                numbers(text, 2).map(|v| (v[0], v[1]))
            } else {
                child("pointLatitude").zip(child("pointLongitude"))
            };
            match parsed {
                Some((lat, lon)) => GeoLocation::Point { lat, lon },
                None => GeoLocation::Malformed { element: GeoElement::Point, raw: raw() },
            }
        }
        _ => {
            let parsed = if capture.children.is_empty() {
                numbers(text, 4).map(|v| [v[0], v[1], v[2], v[3]])
            } else {
                match (
                    child("southBoundLatitude"),
                    child("westBoundLongitude"),
                    child("northBoundLatitude"),
                    child("eastBoundLongitude"),
                ) {
                    (Some(s), Some(w), Some(n), Some(e)) => Some([s, w, n, e]),
                    _ => None,
                }
            };
            match parsed {
                Some([south, west, north, east]) => GeoLocation::Box { south, west, north, east },
                None => GeoLocation::Malformed { element: GeoElement::Box, raw: raw() },
            }
        }
    }
}

/// Parses `payload` and stamps the source repository and OAI identifier.
pub fn parse_harvested(
    payload: &str,
    repository: &str,
    oai_identifier: &str,
) -> Result<DataciteRecord, DataciteError> {
    let mut r = parse_record(payload)?;
    r.repository = repository.to_string();
    r.oai_identifier = oai_identifier.to_string();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KERNEL4: &str = r#"<resource xmlns="http://datacite.org/schema/kernel-4">
  <identifier identifierType="DOI">10.25927/000</identifier>
  <resourceType resourceTypeGeneral="Image">Photograph</resourceType>
  <formats><format>image/jpeg</format></formats>
  <dates><date dateType="Created">2017-05-01</date><date dateType="Issued">2018</date></dates>
  <rightsList><rights rightsURI="https://creativecommons.org/licenses/by/4.0/">CC BY 4.0</rights></rightsList>
  <geoLocations><geoLocation>
    <geoLocationPlace>London</geoLocationPlace>
    <geoLocationPoint><pointLongitude>-0.1</pointLongitude><pointLatitude>51.5</pointLatitude></geoLocationPoint>
  </geoLocation></geoLocations>
</resource>"#;

    #[test]
    fn kernel4_point() {
        let r = parse_record(KERNEL4).unwrap();
        assert_eq!(r.doi, "10.25927/000");
        assert_eq!(r.resource_type_general.as_deref(), Some("Image"));
        assert_eq!(r.formats, vec!["image/jpeg"]);
        assert_eq!(r.dates.len(), 2);
        assert_eq!(r.dates[0].date_type, "Created");
        assert_eq!(r.rights[0].rights_uri.as_deref(), Some("https://creativecommons.org/licenses/by/4.0/"));
        assert_eq!(
            r.geo_locations,
            vec![GeoLocation::Place { text: "London".into() }, GeoLocation::Point { lat: 51.5, lon: -0.1 }]
        );
    }

    #[test]
    fn kernel3_text_point_and_box() {
        let xml = r#"<resource xmlns="http://datacite.org/schema/kernel-3">
          <identifier identifierType="DOI">10.1/k3</identifier>
          <geoLocations><geoLocation>
            <geoLocationPoint>51.5 −0.1</geoLocationPoint>
            <geoLocationBox>40 -10 50 5</geoLocationBox>
          </geoLocation></geoLocations></resource>"#;
        let r = parse_record(xml).unwrap();
        assert_eq!(
            r.geo_locations,
            vec![
                GeoLocation::Point { lat: 51.5, lon: -0.1 },
                GeoLocation::Box { south: 40.0, west: -10.0, north: 50.0, east: 5.0 }
            ]
        );
    }

    #[test]
    fn minimal_record() {
        let r = parse_record(r#"<resource><identifier identifierType="DOI">10.1/min</identifier></resource>"#).unwrap();
        assert_eq!(r.doi, "10.1/min");
        assert!(r.dates.is_empty() && r.geo_locations.is_empty() && r.rights.is_empty() && r.formats.is_empty());
        assert_eq!(r.resource_type_general, None);
    }

    #[test]
    fn prefixed_and_wrapped() {
        let xml = r#"<oai_datacite xmlns="http://schema.datacite.org/oai/oai-1.0/"><payload>
          <dc:resource xmlns:dc="http://datacite.org/schema/kernel-3"><dc:identifier identifierType="DOI">10.1/w</dc:identifier>
          <dc:formats><dc:format>image/png</dc:format></dc:formats></dc:resource></payload></oai_datacite>"#;
        let r = parse_record(xml).unwrap();
        assert_eq!(r.doi, "10.1/w");
        assert_eq!(r.formats, vec!["image/png"]);
    }

    #[test]
    fn malformed_geo_is_kept() {
        let xml = r#"<resource><identifier>10.1/g</identifier><geoLocations><geoLocation>
          <geoLocationPoint><pointLongitude>east</pointLongitude><pointLatitude>12</pointLatitude></geoLocationPoint>
          <geoLocationPoint>1 2 3</geoLocationPoint>
          <geoLocationBox><westBoundLongitude>1</westBoundLongitude></geoLocationBox>
          <geoLocationPoint>NaN 4</geoLocationPoint>
          </geoLocation></geoLocations></resource>"#;
        let r = parse_record(xml).unwrap();
        assert_eq!(
            r.geo_locations,
            vec![
                GeoLocation::Malformed { element: GeoElement::Point, raw: "east 12".into() },
                GeoLocation::Malformed { element: GeoElement::Point, raw: "1 2 3".into() },
                GeoLocation::Malformed { element: GeoElement::Box, raw: "1".into() },
                GeoLocation::Malformed { element: GeoElement::Point, raw: "NaN 4".into() },
            ]
        );
    }

    #[test]
    fn unrelated_identifiers_are_ignored() {
        let xml = r#"<resource><alternateIdentifiers><alternateIdentifier>x</alternateIdentifier></alternateIdentifiers>
          <relatedIdentifiers><relatedIdentifier>10.9/other</relatedIdentifier></relatedIdentifiers>
          <identifier identifierType="DOI">10.1/real</identifier></resource>"#;
        assert_eq!(parse_record(xml).unwrap().doi, "10.1/real");
    }

    #[test]
    fn errors() {
        assert_eq!(parse_record("<resource><titles/></resource>"), Err(DataciteError::MissingIdentifier));
        assert_eq!(parse_record("<resource><identifier> </identifier></resource>"), Err(DataciteError::MissingIdentifier));
        assert_eq!(parse_record("<oai_dc:dc><dc:title>x</dc:title></oai_dc:dc>"), Err(DataciteError::NotDatacite));
        assert_eq!(parse_record(""), Err(DataciteError::NotDatacite));
        let e = parse_record("<resource><identifier>10.1/x</identifier></wrong>").unwrap_err();
        assert_eq!(e.token(), "xml-malformed");
        let e = parse_record("<resource><identifier>10.1/x</identifier>").unwrap_err();
        assert_eq!(e.token(), "xml-malformed");
    }

    #[test]
    fn canonical_round_trip() {
        let r = parse_record(KERNEL4).unwrap();
        let again = parse_record(&to_canonical_xml(&r)).unwrap();
        assert_eq!(r, again);
    }
}
