//! Query pipeline: segmentation, location resolution, matching, ranking.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geo::{distance_meters, GeoPoint};
use crate::query::QueryGroup;
use crate::search::{recalled, ResultEntry, SearchContext, SearchResultPage};
use crate::shop::Catalog;
use crate::sim::{FaultKind, FaultSpec, SimConfig, SimError, SimIndex};
use crate::text::{normalize_for_match, tokenize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub tokens: Vec<String>,
    pub main_part: Option<String>,
}

fn fault_matches(fault: &FaultSpec, query_norm: &str, tokens: &[String], index: &SimIndex) -> bool {
    if let Some(pattern) = &fault.selector.query_pattern {
        return normalize_for_match(pattern) == query_norm;
    }
    if let Some(shop_id) = &fault.selector.shop_id {
        if let Some(shop) = index.shops().iter().find(|s| &s.id == shop_id) {
            let name_tokens = tokenize(&shop.name);
            return tokens.iter().any(|t| name_tokens.contains(t));
        }
    }
    false
}

/// Splits the query and picks the segment carrying the main search
/// intent: the rarest token in the index (unseen tokens count as
/// rarest), ties broken leftmost. A matching `segmentation_main_part`
/// fault overrides the choice.
pub fn segment(query: &str, index: &SimIndex, config: &SimConfig) -> Segmentation {
    let tokens = tokenize(query);
    let main_part = pick_main(&tokens, index);
    let query_norm = normalize_for_match(query);
    let mut seg = Segmentation { tokens, main_part };
    for fault in &config.faults {
        if fault.kind == FaultKind::SegmentationMainPart
            && fault_matches(fault, &query_norm, &seg.tokens, index)
        {
            if let Some(forced) = &fault.main_part {
                let forced = normalize_for_match(forced);
                if seg.tokens.contains(&forced) {
                    seg.main_part = Some(forced);
                }
            }
        }
    }
    seg
}

fn pick_main(tokens: &[String], index: &SimIndex) -> Option<String> {
    tokens
        .iter()
        .enumerate()
        .min_by_key(|(i, t)| (index.doc_freq(t), *i))
        .map(|(_, t)| t.clone())
}

/// Outcome of location-phrase resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationResolution {
    /// Landmark phrase and its coordinates, when the query is read as
    /// geo-constrained.
    pub constraint: Option<(String, GeoPoint)>,
    /// Tokens left for matching after the phrase was consumed.
    pub match_tokens: Vec<String>,
}

/// Finds the longest segment suffix (then prefix) present in the
/// landmark dictionary and turns it into a geo constraint, removing its
/// tokens from matching.
///
/// A dictionary phrase whose tokens all appear in shop names is treated
/// as naming a shop, not a place, and left alone — unless a matching
/// `landmark_misparse` fault forces the location reading.
pub fn resolve_location_phrase(
    segments: &[String],
    index: &SimIndex,
    config: &SimConfig,
    query_norm: &str,
) -> LocationResolution {
    let n = segments.len();
    for k in (1..=n).rev() {
        // suffix first, then prefix, longest first
        let spans: [(usize, usize); 2] = [(n - k, n), (0, k)];
        for (start, end) in spans {
            let phrase = segments[start..end].join(" ");
            let Some(coords) = config.landmarks.get(&phrase) else { continue };
            let names_a_shop = segments[start..end].iter().all(|t| index.is_name_token(t));
            let forced = config.faults.iter().any(|f| {
                f.kind == FaultKind::LandmarkMisparse
                    && fault_matches(f, query_norm, segments, index)
                    && f.phrase.as_deref().map(normalize_for_match).map_or(true, |p| p == phrase)
            });
            if names_a_shop && !forced {
                continue;
            }
            let mut match_tokens = Vec::new();
            match_tokens.extend_from_slice(&segments[..start]);
            match_tokens.extend_from_slice(&segments[end..]);
            return LocationResolution { constraint: Some((phrase, *coords)), match_tokens };
        }
    }
    LocationResolution { constraint: None, match_tokens: segments.to_vec() }
}

const MAIN_PART_WEIGHT: f64 = 2.0;

/// Executes one query against the index.
///
/// Pipeline: normalize, segment, resolve location phrase, gather
/// candidates sharing at least one match token, filter closed and
/// out-of-radius shops, score, rank, truncate to the exposure cap.
/// Fully deterministic: ordering is (score desc, distance asc, id asc).
pub fn search(
    query: &str,
    ctx: &SearchContext,
    index: &SimIndex,
    config: &SimConfig,
) -> SearchResultPage {
    let query_norm = normalize_for_match(query);
    let seg = segment(query, index, config);
    let page = |entries| SearchResultPage { entries, query: query.to_string() };
    if seg.tokens.is_empty() {
        return page(Vec::new());
    }
    let resolution = resolve_location_phrase(&seg.tokens, index, config, &query_norm);
    let effective_loc = resolution.constraint.as_ref().map(|(_, c)| *c).unwrap_or(ctx.location);

    // Recompute the main part if the location phrase consumed it.
    let main = match seg.main_part.filter(|m| resolution.match_tokens.contains(m)) {
        Some(m) => Some(m),
        None => pick_main(&resolution.match_tokens, index),
    };

    // Candidate set: union of postings over the match tokens; a pure
    // location query falls back to everything in radius.
    let mut candidates: Vec<usize> = if resolution.match_tokens.is_empty() {
        if resolution.constraint.is_some() {
            (0..index.len()).collect()
        } else {
            Vec::new()
        }
    } else {
        let mut c: Vec<usize> = resolution
            .match_tokens
            .iter()
            .flat_map(|t| index.postings(t).iter().copied())
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    candidates.retain(|&pos| index.shop(pos).active);
    candidates.retain(|&pos| index.shop(pos).is_open_at(ctx.time_of_day()));

    let total_weight: f64 = resolution
        .match_tokens
        .iter()
        .map(|t| if Some(t) == main.as_ref() { MAIN_PART_WEIGHT } else { 1.0 })
        .sum();

    let mut scored: Vec<(f64, f64, usize)> = Vec::new();
    for pos in candidates {
        let shop = index.shop(pos);
        let dist = distance_meters(shop.location, effective_loc);
        if dist > config.radius_meters {
            continue;
        }
        let mut shop_tokens = tokenize(&shop.name);
        shop_tokens.extend(tokenize(&shop.shop_type));
        let matched_weight: f64 = resolution
            .match_tokens
            .iter()
            .filter(|t| shop_tokens.contains(t))
            .map(|t| if Some(t) == main.as_ref() { MAIN_PART_WEIGHT } else { 1.0 })
            .sum();
        let fraction = if total_weight > 0.0 { matched_weight / total_weight } else { 0.0 };
        let boost = config.static_boosts.get(&shop.id).copied().unwrap_or(0.0);
        let score = config.token_weight * fraction + boost
            - config.distance_weight * (dist / config.radius_meters);
        scored.push((score, dist, pos));
    }

    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.total_cmp(&b.1))
            .then_with(|| index.shop(a.2).id.cmp(&index.shop(b.2).id))
    });

    let cap = match ctx.exposure_cap() {
        0 => config.page_cap,
        c => config.page_cap.min(c),
    };
    scored.truncate(cap);

    page(
        scored
            .into_iter()
            .map(|(score, _, pos)| {
                let shop = index.shop(pos);
                ResultEntry { shop_id: shop.id.clone(), name: shop.name.clone(), score }
            })
            .collect(),
    )
}

/// A planting the detector is expected to flag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedMiss {
    pub shop_id: String,
    pub query_text: String,
}

/// White-box expectation for acceptance tests: a query is an expected
/// finding iff it recalls its target with faults disabled, fails with
/// faults enabled, and some sibling query still recalls the target with
/// faults enabled. Ordered like the detector's findings.
pub fn ground_truth_misses(
    catalog: &Catalog,
    groups: &[QueryGroup],
    base_ctx: &SearchContext,
    config: &SimConfig,
) -> Result<Vec<ExpectedMiss>, SimError> {
    let clean = config.without_faults();
    let index = SimIndex::build(catalog, config)?;
    let mut expected = Vec::new();
    for group in groups {
        if !group.eligible() {
            continue;
        }
        let Some(shop) = catalog.get(&group.target_shop_id) else { continue };
        let ctx = SearchContext { location: shop.location, ..base_ctx.clone() };
        let with_fault: Vec<bool> = group
            .queries
            .iter()
            .map(|q| recalled(&search(&q.text, &ctx, &index, config), shop).0)
            .collect();
        let without_fault: Vec<bool> = group
            .queries
            .iter()
            .map(|q| recalled(&search(&q.text, &ctx, &index, &clean), shop).0)
            .collect();
        let any_sibling = with_fault.iter().any(|&y| y);
        for (i, q) in group.queries.iter().enumerate() {
            if without_fault[i] && !with_fault[i] && any_sibling {
                expected.push(ExpectedMiss {
                    shop_id: group.target_shop_id.clone(),
                    query_text: q.text.clone(),
                });
            }
        }
    }
    expected.sort();
    Ok(expected)
}
