//! Seeded random scenarios for oracle-equivalence runs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::script::{MockRecord, MockRepository, ResolverRoute, ScenarioScript, ScriptedResponse, Timing, Truth};

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub repositories: (usize, usize),
    pub records: (usize, usize),
    /// Extra listeners that serve redirect targets.
    pub hosts: u16,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { repositories: (2, 10), records: (10, 2000), hosts: 4 }
    }
}

fn hop(status: u16, content_type: Option<&str>, host: u16) -> ScriptedResponse {
    ScriptedResponse {
        status,
        content_type: content_type.map(str::to_string),
        host,
        ..ScriptedResponse::default()
    }
}

fn redirect_to(status: u16, next: usize, host: u16) -> ScriptedResponse {
    ScriptedResponse {
        status,
        location: Some(format!("{{hop:{next}}}")),
        host,
        ..ScriptedResponse::default()
    }
}

/// A random route for a record with the given formats.
fn random_route(rng: &mut ChaCha8Rng, formats: &[String], hosts: u16, p_ret: f64) -> Option<ResolverRoute> {
    let host = |rng: &mut ChaCha8Rng| if hosts == 0 { 0 } else { rng.gen_range(1..=hosts) };
    let concrete: Vec<&String> = formats
        .iter()
        .filter(|f| f.starts_with("image/") && f.as_str() != "image/*")
        .collect();
    if rng.gen_bool(p_ret) {
        let chain = rng.gen_range(0..=3usize);
        let mut hops: Vec<ScriptedResponse> = Vec::new();
        let h = host(rng);
        for i in 0..chain {
            let status = *[301u16, 302, 303, 307, 308].choose(rng).unwrap_or(&302);
            hops.push(redirect_to(status, i + 1, h));
        }
        let use_link = !concrete.is_empty() && rng.gen_bool(0.4);
        if use_link {
            let t = concrete[rng.gen_range(0..concrete.len())].clone();
            let target = chain + 1;
            let mut landing = hop(200, Some("text/html"), h);
            landing.link = Some(format!("<{{hop:{target}}}>; rel=\"alternate\"; type=\"{t}\""));
            hops.push(landing);
            hops.push(hop(200, Some(&t), host(rng)));
        } else {
            let ct = ["image/jpeg", "image/png", "image/tiff; charset=binary", "IMAGE/GIF"][rng.gen_range(0..4)];
            hops.push(hop(200, Some(ct), h));
        }
        return Some(ResolverRoute { hops, retrievable: true });
    }
    let h = host(rng);
    let hops = match rng.gen_range(0..6) {
        0 => return None,
        1 => vec![hop(200, Some("text/html"), h)],
        2 => vec![hop(404, Some("text/html"), h)],
        3 => {
            let mut landing = hop(200, Some("text/html; charset=utf-8"), h);
            landing.link = Some("<{hop:1}>; rel=\"describedby\"; type=\"application/vnd.datacite.datacite+xml\"".into());
            vec![landing, hop(200, Some("application/xml"), h)]
        }
        4 => vec![redirect_to(302, 1, h), hop(500, None, h)],
        _ => {
            let mut landing = hop(200, Some("text/html"), h);
            landing.link = Some("<{hop:1}>; rel=\"alternate\"; type=\"image/jpeg\"".into());
            // the linked target serves something other than what it advertises
            vec![landing, hop(200, Some("text/html"), h)]
        }
    };
    Some(ResolverRoute { hops, retrievable: false })
}

pub fn random_scenario(seed: u64, opts: &GenOptions) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_repos = rng.gen_range(opts.repositories.0..=opts.repositories.1);
    let prefix_sets: [&[&str]; 4] = [
        &["oai_dc", "datacite"],
        &["oai_dc", "oai_datacite"],
        &["datacite4", "oai_datacite3"],
        &["oai_dc"],
    ];
    let mut routes = BTreeMap::new();
    let mut repositories = Vec::new();
    for k in 0..n_repos {
        let prefixes: Vec<String> = prefix_sets[if k == 0 { 0 } else { rng.gen_range(0..prefix_sets.len()) }]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (lo, hi) = (opts.records.0 as f64, opts.records.1 as f64);
        let n = (lo * (hi / lo).powf(rng.gen::<f64>())).round() as usize;
        let n = n.clamp(opts.records.0, opts.records.1);
        let page_size = rng.gen_range(5..=500);
        let (p_img, p_c, p_g, p_l, p_r) = (
            rng.gen_range(0.3..1.0),
            rng.gen::<f64>(),
            rng.gen::<f64>(),
            rng.gen::<f64>(),
            rng.gen::<f64>(),
        );
        let mut records: Vec<MockRecord> = Vec::with_capacity(n);
        for i in 0..n {
            let oai_identifier = format!("oai:repo{k}.example:{i}");
            if i > 0 && rng.gen_bool(0.02) {
                // same DOI as an earlier record, possibly different annotations
                let j = rng.gen_range(0..records.len());
                let base = records[j].clone();
                records.push(MockRecord {
                    oai_identifier,
                    truth: Truth { chrono: rng.gen_bool(p_c), geo: rng.gen_bool(p_g), lic: rng.gen_bool(p_l), ..base.truth },
                    payload: None,
                    deleted: false,
                    ..base
                });
                continue;
            }
            let doi = format!("10.5555/repo{k}.{i}");
            let deleted = rng.gen_bool(0.03);
            let image = rng.gen_bool(p_img);
            let formats: Vec<String> = if image {
                [&[][..], &["image/jpeg"], &["image/tiff", "application/pdf"], &["image/*"]][rng.gen_range(0..4)]
                    .iter()
                    .map(|s: &&str| s.to_string())
                    .collect()
            } else {
                [&[][..], &["text/csv"]][rng.gen_range(0..2)].iter().map(|s: &&str| s.to_string()).collect()
            };
            let truth = Truth { image, chrono: rng.gen_bool(p_c), geo: rng.gen_bool(p_g), lic: rng.gen_bool(p_l) };
            if !deleted && image {
                if let Some(route) = random_route(&mut rng, &formats, opts.hosts, p_r) {
                    routes.insert(doi.clone(), route);
                }
            }
            records.push(MockRecord { oai_identifier, doi, deleted, truth, formats, payload: None });
        }
        repositories.push(MockRepository {
            id: format!("repo{k}"),
            name: format!("Repository {k}"),
            prefixes,
            page_size,
            records,
            faults: Vec::new(),
        });
    }
    ScenarioScript {
        hosts: opts.hosts,
        repositories,
        resolver_routes: routes,
        registry_only: Vec::new(),
        timing: Timing::default(),
    }
}
