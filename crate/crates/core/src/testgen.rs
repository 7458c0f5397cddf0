//! proptest strategies shared by unit tests.

use alloc::string::String;
use alloc::vec::Vec;

use proptest::prelude::*;

use crate::datacite::{DataciteRecord, DateEntry, GeoElement, GeoLocation, RightsEntry};
use crate::scoring::Predicates;

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 ._:/-]{0,16}".prop_map(|s| String::from(s.trim()))
}

pub fn arb_geo() -> impl Strategy<Value = GeoLocation> {
    prop_oneof![
        (-120.0f64..120.0, -200.0f64..200.0).prop_map(|(lat, lon)| GeoLocation::Point { lat, lon }),
        (-100.0f64..100.0, -190.0f64..190.0, -100.0f64..100.0, -190.0f64..190.0).prop_map(
            |(south, west, north, east)| GeoLocation::Box { south, west, north, east }
        ),
        text().prop_map(|text| GeoLocation::Place { text }),
        ("[a-z]{1,6}( [a-z]{1,6})?", any::<bool>()).prop_map(|(raw, point)| GeoLocation::Malformed {
            element: if point { GeoElement::Point } else { GeoElement::Box },
            raw,
        }),
    ]
}

pub fn arb_date() -> impl Strategy<Value = DateEntry> {
    (
        prop_oneof![Just(String::new()), "[0-9]{4}(-[0-9]{2}-[0-9]{2})?".prop_map(String::from)],
        prop_oneof![
            Just(String::from("Created")),
            Just(String::from("Issued")),
            Just(String::from("created")),
            Just(String::from("Collected")),
        ],
    )
        .prop_map(|(value, date_type)| DateEntry { value, date_type })
}

pub fn arb_rights() -> impl Strategy<Value = RightsEntry> {
    (
        text(),
        proptest::option::of(prop_oneof![
            Just(String::from("https://creativecommons.org/licenses/by/4.0/")),
            Just(String::from("http://example.org/licence")),
            Just(String::from("not a url")),
            Just(String::from("info:eu-repo/semantics/openAccess")),
            Just(String::new()),
        ]),
    )
        .prop_map(|(text, rights_uri)| RightsEntry { text, rights_uri })
}

pub fn arb_record() -> impl Strategy<Value = DataciteRecord> {
    (
        "10\\.[0-9]{4}/[a-z0-9.]{1,12}",
        proptest::option::of(prop_oneof![
            Just(String::from("Image")),
            Just(String::from("Dataset")),
            Just(String::from("Text")),
        ]),
        proptest::collection::vec(
            prop_oneof![
                Just(String::from("image/jpeg")),
                Just(String::from("image/tiff")),
                Just(String::from("text/csv")),
                Just(String::from("application/pdf")),
            ],
            0..3,
        ),
        proptest::collection::vec(arb_date(), 0..3),
        proptest::collection::vec(arb_geo(), 0..3),
        proptest::collection::vec(arb_rights(), 0..3),
        "[a-z0-9]{0,8}",
        "[a-z0-9:.]{0,12}",
    )
        .prop_map(|(doi, rtg, formats, dates, geo, rights, repo, oai)| DataciteRecord {
            doi,
            resource_type_general: rtg,
            formats,
            dates,
            geo_locations: geo,
            rights,
            repository: repo,
            oai_identifier: oai,
        })
}

pub fn arb_predicates() -> impl Strategy<Value = Predicates> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>())
        .prop_map(|(chrono, geo, lic, ret)| Predicates { chrono, geo, lic, ret })
}

pub fn arb_corpus(max: usize) -> impl Strategy<Value = Vec<Predicates>> {
    proptest::collection::vec(arb_predicates(), 1..max)
}
