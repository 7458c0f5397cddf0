//! Brute-force expected scores computed straight from a script's truth
//! flags, without HTTP, parsing or the scoring module.

use std::collections::HashSet;

use serde::Serialize;

use super::payload::geo_is_place_only;
use super::script::ScenarioScript;

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleOptions {
    pub max_pages: Option<u32>,
    pub geo_require_coordinates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedRepository {
    pub id: String,
    pub name: String,
    pub items: u64,
    /// Met counts in chrono, geo, lic, ret order.
    pub met: [u64; 4],
    pub avfixed: f64,
    pub avrelative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedScores {
    pub d_size: u64,
    /// Repositories with at least one item, sorted by id.
    pub repositories: Vec<ExpectedRepository>,
    pub q_sizes: [u64; 4],
    pub rareness: [f64; 4],
    pub weights: [f64; 4],
    pub total_rareness: f64,
    /// Ids of repositories whose list was cut by `max_pages`.
    pub truncated: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("the scripted landscape holds no records of interest")]
pub struct EmptyCorpus;

/// Items of interest per selected repository, as 0/1 predicate vectors.
pub fn expected_items(script: &ScenarioScript, opts: OracleOptions) -> Vec<(String, String, Vec<[bool; 4]>, bool)> {
    let mut out = Vec::new();
    for repo in &script.repositories {
        if !repo.offers_datacite() {
            continue;
        }
        let reachable = match opts.max_pages {
            Some(m) => (m as usize * repo.page_size).min(repo.records.len()),
            None => repo.records.len(),
        };
        let truncated = reachable < repo.records.len();
        let mut oai_seen = HashSet::new();
        let mut doi_seen = HashSet::new();
        let mut items = Vec::new();
        for rec in &repo.records[..reachable] {
            if !oai_seen.insert(rec.oai_identifier.as_str()) || rec.deleted || !rec.truth.image {
                continue;
            }
            if !doi_seen.insert(rec.doi.as_str()) {
                continue;
            }
            let geo = rec.truth.geo && !(opts.geo_require_coordinates && geo_is_place_only(rec));
            let ret = script.resolver_routes.get(&rec.doi).is_some_and(|r| r.retrievable);
            items.push([rec.truth.chrono, geo, rec.truth.lic, ret]);
        }
        out.push((repo.id.clone(), repo.name.clone(), items, truncated));
    }
    out
}

pub fn expected_scores(script: &ScenarioScript, opts: OracleOptions) -> Result<ExpectedScores, EmptyCorpus> {
    let per_repo = expected_items(script, opts);
    let all: Vec<[bool; 4]> = per_repo.iter().flat_map(|(_, _, items, _)| items.iter().copied()).collect();
    if all.is_empty() {
        return Err(EmptyCorpus);
    }
    let d = all.len() as f64;
    let mut q_sizes = [0u64; 4];
    for item in &all {
        for i in 0..4 {
            if item[i] {
                q_sizes[i] += 1;
            }
        }
    }
    let mut rareness = [0.0; 4];
    for i in 0..4 {
        rareness[i] = 1.0 - q_sizes[i] as f64 / d;
    }
    let total_rareness: f64 = rareness.iter().sum();
    let mut weights = [0.25; 4];
    if total_rareness != 0.0 {
        for i in 0..4 {
            weights[i] = rareness[i] / total_rareness;
        }
    }
    let mut repositories = Vec::new();
    let mut truncated = Vec::new();
    for (id, name, items, cut) in per_repo {
        if cut {
            truncated.push(id.clone());
        }
        if items.is_empty() {
            continue;
        }
        let n = items.len() as f64;
        let mut met = [0u64; 4];
        let mut fixed_sum = 0.0;
        let mut rel_sum = 0.0;
        for item in &items {
            let mut fixed = 0.0;
            let mut rel = 0.0;
            for i in 0..4 {
                if item[i] {
                    met[i] += 1;
                    fixed += 1.0;
                    rel += weights[i];
                }
            }
            fixed_sum += fixed / 4.0;
            rel_sum += rel;
        }
        repositories.push(ExpectedRepository {
            id,
            name,
            items: items.len() as u64,
            met,
            avfixed: fixed_sum / n,
            avrelative: rel_sum / n,
        });
    }
    repositories.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(ExpectedScores { d_size: all.len() as u64, repositories, q_sizes, rareness, weights, total_rareness, truncated })
}
