//! Rethink validation of generated queries.
//!
//! Every generated query is re-judged for reasonableness before
//! execution. The judge can be an LLM (mapped here from its free-text
//! reply) or the weaker offline rule check. The policy is cautious:
//! anything not clearly reasonable is dropped.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::query::{QueryGroup, TestQuery};
use crate::shop::Shop;
use crate::text::{normalize_for_match, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Reasonable,
    Unreasonable,
    Unclear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judge {
    Llm,
    Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    /// Dedup key of the judged query.
    pub query_key: String,
    pub verdict: Verdict,
    pub rationale: String,
    pub judge: Judge,
}

/// Maps a judge reply to a verdict by the keyword protocol: the first
/// token, case-insensitive, must be KEEP or DROP; anything else is
/// unclear.
pub fn map_judge_reply(reply: &str) -> Verdict {
    let norm = normalize_for_match(reply);
    let first = norm
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("");
    match first {
        "keep" => Verdict::Reasonable,
        "drop" => Verdict::Unreasonable,
        _ => Verdict::Unclear,
    }
}

/// Offline rule check configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCheck {
    pub max_query_len: usize,
}

impl Default for RuleCheck {
    fn default() -> Self {
        Self { max_query_len: 100 }
    }
}

/// Weaker baseline validator: reasonable iff the query is non-empty,
/// within the length cap, and shares at least one normalized token with
/// the shop name, type, or city. Never returns unclear.
pub fn validate_rule(shop: &Shop, query: &TestQuery, rules: &RuleCheck) -> ValidationVerdict {
    let key = query.dedup_key();
    let verdict_with = |verdict, rationale: &str| ValidationVerdict {
        query_key: key.clone(),
        verdict,
        rationale: rationale.to_string(),
        judge: Judge::Rule,
    };
    if key.is_empty() {
        return verdict_with(Verdict::Unreasonable, "empty query");
    }
    if query.text.chars().count() > rules.max_query_len {
        return verdict_with(Verdict::Unreasonable, "query exceeds length cap");
    }
    let qtokens = tokenize(&query.text);
    let mut shop_tokens = tokenize(&shop.name);
    shop_tokens.extend(tokenize(&shop.shop_type));
    shop_tokens.extend(tokenize(&shop.city));
    if qtokens.iter().any(|t| shop_tokens.contains(t)) {
        verdict_with(Verdict::Reasonable, "shares a token with the shop record")
    } else {
        verdict_with(Verdict::Unreasonable, "no token overlap with the shop record")
    }
}

/// A query removed by filtering, with the verdict that removed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub query: TestQuery,
    pub verdict: Verdict,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterError {
    /// A query in the group has no verdict.
    MissingVerdict(String),
}

impl core::fmt::Display for FilterError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FilterError::MissingVerdict(q) => write!(f, "no verdict for query `{q}`"),
        }
    }
}

/// Keeps only verdict=reasonable queries. Unclear counts as a failure
/// (cautious policy). Every query must be covered by a verdict.
pub fn filter_group(
    group: &QueryGroup,
    verdicts: &[ValidationVerdict],
) -> Result<(QueryGroup, Vec<DropRecord>), FilterError> {
    let mut kept = QueryGroup::new(&group.target_shop_id);
    let mut drops = Vec::new();
    for q in &group.queries {
        let key = q.dedup_key();
        let v = verdicts
            .iter()
            .find(|v| v.query_key == key)
            .ok_or_else(|| FilterError::MissingVerdict(q.text.clone()))?;
        if v.verdict == Verdict::Reasonable {
            kept.queries.push(q.clone());
        } else {
            drops.push(DropRecord {
                query: q.clone(),
                verdict: v.verdict,
                rationale: v.rationale.clone(),
            });
        }
    }
    Ok((kept, drops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::query::{ConceptRelation, Derivation, QuerySource};

    fn shop() -> Shop {
        Shop::new("s1", "Chen's hardware", "hardware store", "Beijing", GeoPoint::new(116.3, 40.0))
    }

    fn query(text: &str) -> TestQuery {
        TestQuery::new(text, "s1", Derivation::Name, ConceptRelation::Unknown, QuerySource::Template)
    }

    #[test]
    fn keep_and_drop_replies_map_by_first_token() {
        assert_eq!(map_judge_reply("KEEP - plausible"), Verdict::Reasonable);
        assert_eq!(map_judge_reply("drop: names a person"), Verdict::Unreasonable);
        assert_eq!(map_judge_reply("  Drop."), Verdict::Unreasonable);
    }

    #[test]
    fn unrelated_prose_maps_to_unclear() {
        assert_eq!(map_judge_reply("I am not sure what you mean."), Verdict::Unclear);
        assert_eq!(map_judge_reply(""), Verdict::Unclear);
    }

    #[test]
    fn rule_check_accepts_token_overlap() {
        let v = validate_rule(&shop(), &query("Chen's"), &RuleCheck::default());
        assert_eq!(v.verdict, Verdict::Reasonable);
    }

    #[test]
    fn rule_check_rejects_gibberish() {
        let v = validate_rule(&shop(), &query("zzzz"), &RuleCheck::default());
        assert_eq!(v.verdict, Verdict::Unreasonable);
    }

    #[test]
    fn rule_check_rejects_overlong_query() {
        let long = "hardware ".repeat(60);
        let v = validate_rule(&shop(), &query(&long), &RuleCheck::default());
        assert_eq!(v.verdict, Verdict::Unreasonable);
        assert!(v.rationale.contains("length"));
    }

    fn verdict_for(q: &TestQuery, verdict: Verdict) -> ValidationVerdict {
        ValidationVerdict {
            query_key: q.dedup_key(),
            verdict,
            rationale: String::new(),
            judge: Judge::Llm,
        }
    }

    #[test]
    fn filter_keeps_only_reasonable_and_audits_drops() {
        let mut group = QueryGroup::new("s1");
        for t in ["Chen's hardware", "Chen's", "a clerk", "tools near Chen"] {
            group.push_deduped(query(t));
        }
        let verdicts = vec![
            verdict_for(&group.queries[0], Verdict::Reasonable),
            verdict_for(&group.queries[1], Verdict::Reasonable),
            verdict_for(&group.queries[2], Verdict::Unclear),
            verdict_for(&group.queries[3], Verdict::Unreasonable),
        ];
        let (kept, drops) = filter_group(&group, &verdicts).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(drops.len(), 2);
        assert!(kept.eligible());
    }

    #[test]
    fn filter_identity_when_all_reasonable() {
        let mut group = QueryGroup::new("s1");
        group.push_deduped(query("Chen's hardware"));
        group.push_deduped(query("Chen's"));
        let verdicts: Vec<_> =
            group.queries.iter().map(|q| verdict_for(q, Verdict::Reasonable)).collect();
        let (kept, drops) = filter_group(&group, &verdicts).unwrap();
        assert_eq!(kept, group);
        assert!(drops.is_empty());
    }

    #[test]
    fn filter_all_dropped_yields_ineligible_group() {
        let mut group = QueryGroup::new("s1");
        group.push_deduped(query("Chen's hardware"));
        group.push_deduped(query("Chen's"));
        let verdicts: Vec<_> =
            group.queries.iter().map(|q| verdict_for(q, Verdict::Unreasonable)).collect();
        let (kept, drops) = filter_group(&group, &verdicts).unwrap();
        assert!(kept.is_empty());
        assert!(!kept.eligible());
        assert_eq!(drops.len(), 2);
    }

    #[test]
    fn missing_verdict_is_a_contract_error() {
        let mut group = QueryGroup::new("s1");
        group.push_deduped(query("Chen's hardware"));
        let err = filter_group(&group, &[]).unwrap_err();
        assert!(matches!(err, FilterError::MissingVerdict(_)));
    }
}
