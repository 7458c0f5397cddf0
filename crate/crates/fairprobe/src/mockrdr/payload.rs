//! Datacite payloads rendered from a record's truth flags. The encoding
//! varies with a per-record variant number so scenarios cover kernel 3
//! and 4, points, boxes and places, and the near misses each predicate
//! must reject.

use fairprobe_core::datacite::escape_xml;

use super::script::MockRecord;

const KERNEL4: &str = "http://datacite.org/schema/kernel-4";
const KERNEL3: &str = "http://datacite.org/schema/kernel-3";

fn esc(s: &str) -> String {
    let mut out = String::new();
    escape_xml(s, &mut out);
    out
}

/// Stable variant number derived from the OAI identifier.
pub fn variant_of(oai_identifier: &str) -> u64 {
    // FNV-1a
    oai_identifier
        .bytes()
        .fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

pub fn render(rec: &MockRecord) -> String {
    if let Some(p) = &rec.payload {
        return p.clone();
    }
    let v = variant_of(&rec.oai_identifier);
    let pick = |shift: u32, n: u64| (v >> shift) % n;
    let kernel4 = pick(0, 2) == 0;
    let t = &rec.truth;
    let mut x = String::new();
    x.push_str(&format!(
        "<resource xmlns=\"{}\"><identifier identifierType=\"DOI\">{}</identifier>",
        if kernel4 { KERNEL4 } else { KERNEL3 },
        esc(&rec.doi)
    ));
    x.push_str("<titles><title>Scripted record</title></titles>");

    let has_image_format = rec.formats.iter().any(|f| fairprobe_core::media::is_image_media_type(f));
    let rtg = if t.image && !has_image_format {
        "Image"
    } else if t.image {
        ["Image", "Dataset", ""][pick(4, 3) as usize]
    } else {
        ["Dataset", "Text", ""][pick(4, 3) as usize]
    };
    if !rtg.is_empty() {
        x.push_str(&format!("<resourceType resourceTypeGeneral=\"{rtg}\">scripted</resourceType>"));
    }
    if !rec.formats.is_empty() {
        x.push_str("<formats>");
        for f in &rec.formats {
            x.push_str(&format!("<format>{}</format>", esc(f)));
        }
        x.push_str("</formats>");
    }

    let dates = if t.chrono {
        match pick(8, 3) {
            0 => "<date dateType=\"Created\">2017-05-01</date>",
            1 => "<date dateType=\"Issued\">2018</date><date dateType=\"Created\">2016-11-30T10:00:00Z</date>",
            _ => "<date dateType=\"Created\"> 1998 </date>",
        }
    } else {
        match pick(8, 5) {
            0 => "",
            1 => "<date dateType=\"Issued\">2018</date>",
            2 => "<date dateType=\"created\">2017-05-01</date>",
            3 => "<date dateType=\"Created\">  </date>",
            _ => "<date dateType=\"Collected\">2017-05-01</date>",
        }
    };
    if !dates.is_empty() {
        x.push_str(&format!("<dates>{dates}</dates>"));
    }

    let geo = if t.geo {
        match (pick(12, 3), kernel4) {
            (0, true) => "<geoLocationPoint><pointLongitude>-0.1</pointLongitude><pointLatitude>51.5</pointLatitude></geoLocationPoint>",
            (0, false) => "<geoLocationPoint>51.5 -0.1</geoLocationPoint>",
            (1, true) => "<geoLocationBox><westBoundLongitude>-10</westBoundLongitude><eastBoundLongitude>5</eastBoundLongitude><southBoundLatitude>40</southBoundLatitude><northBoundLatitude>50</northBoundLatitude></geoLocationBox>",
            (1, false) => "<geoLocationBox>40 -10 50 5</geoLocationBox>",
            _ => "<geoLocationPlace>Bremerhaven</geoLocationPlace>",
        }
    } else {
        match pick(12, 5) {
            0 => "",
            1 => "<geoLocationPoint>east of town</geoLocationPoint>",
            2 => "<geoLocationPoint>95.0 10.0</geoLocationPoint>",
            3 => "<geoLocationBox>50 -10 40 5</geoLocationBox>",
            _ => "<geoLocationPlace> </geoLocationPlace>",
        }
    };
    if !geo.is_empty() {
        x.push_str(&format!("<geoLocations><geoLocation>{geo}</geoLocation></geoLocations>"));
    }

    let rights = if t.lic {
        match pick(16, 2) {
            0 => "<rights rightsURI=\"https://creativecommons.org/licenses/by/4.0/\">CC BY 4.0</rights>",
            _ => "<rights>All rights reserved</rights><rights rightsURI=\"http://www.opendatacommons.org/licenses/odbl/1.0/\">ODbL</rights>",
        }
    } else {
        match pick(16, 3) {
            0 => "",
            1 => "<rights>CC BY 4.0</rights>",
            _ => "<rights rightsURI=\"info:eu-repo/semantics/openAccess\">Open access</rights>",
        }
    };
    if !rights.is_empty() {
        x.push_str(&format!("<rightsList>{rights}</rightsList>"));
    }
    x.push_str("</resource>");
    x
}

/// True when the generated payload satisfies the geo predicate only
/// through a free-text place (so it fails under coordinates-only policy).
pub fn geo_is_place_only(rec: &MockRecord) -> bool {
    rec.payload.is_none() && rec.truth.geo && (variant_of(&rec.oai_identifier) >> 12) % 3 == 2
}
