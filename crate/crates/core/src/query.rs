//! Test queries and query groups.
//!
//! A query group is the unit the oracle works on: all queries in a group
//! target the same shop, and the consistency relation compares their
//! recall outcomes. Queries come either from an LLM completion (parsed
//! here, requested by the gateway in the companion crate) or from the
//! deterministic template generator, which is the offline substitute used
//! by fixtures and the acceptance suite.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::shop::Shop;
use crate::text::{normalize_field, normalize_for_match, tokenize};

/// Which user query-construction step produced a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivation {
    Name,
    ServiceProduct,
    Location,
}

/// Conceptual relation of the query to the target shop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptRelation {
    Equivalent,
    Including,
    Included,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySource {
    Llm,
    Template,
}

/// One generated user query bound to its target shop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestQuery {
    pub text: String,
    pub target_shop_id: String,
    pub derivation: Derivation,
    pub concept_relation: ConceptRelation,
    pub source: QuerySource,
}

impl TestQuery {
    pub fn new(
        text: &str,
        target_shop_id: &str,
        derivation: Derivation,
        concept_relation: ConceptRelation,
        source: QuerySource,
    ) -> Self {
        Self {
            text: normalize_field(text),
            target_shop_id: target_shop_id.to_string(),
            derivation,
            concept_relation,
            source,
        }
    }

    /// Dedup key: case fold + whitespace collapse + NFC.
    pub fn dedup_key(&self) -> String {
        normalize_for_match(&self.text)
    }
}

/// Queries sharing one target shop. Groups with fewer than two queries
/// are ineligible for the oracle and must be flagged, never silently
/// evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub target_shop_id: String,
    pub queries: Vec<TestQuery>,
}

impl QueryGroup {
    pub fn new(target_shop_id: &str) -> Self {
        Self { target_shop_id: target_shop_id.to_string(), queries: Vec::new() }
    }

    /// Appends a query unless an equivalent one (under the dedup key) is
    /// already present. Returns whether the query was kept.
    pub fn push_deduped(&mut self, query: TestQuery) -> bool {
        debug_assert_eq!(query.target_shop_id, self.target_shop_id);
        let key = query.dedup_key();
        if key.is_empty() || self.queries.iter().any(|q| q.dedup_key() == key) {
            return false;
        }
        self.queries.push(query);
        true
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// The oracle needs at least two queries to compare.
    pub fn eligible(&self) -> bool {
        self.queries.len() >= 2
    }
}

/// A query extracted from raw LLM output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuery {
    pub text: String,
    pub derivation: Derivation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseOutputError {
    /// No query could be extracted from the completion.
    EmptyOutput,
}

impl core::fmt::Display for ParseOutputError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "LLM output contained no extractable queries")
    }
}

fn section_label(line: &str) -> Option<Derivation> {
    let l = line.trim().trim_start_matches('[').trim_end_matches(']').trim_end_matches(':');
    match normalize_for_match(l).as_str() {
        "name" | "name based" | "name-based" => Some(Derivation::Name),
        "service" | "services" | "service based" | "services/products"
        | "service_product" | "products" => Some(Derivation::ServiceProduct),
        "location" | "location based" | "location-based" => Some(Derivation::Location),
        _ => None,
    }
}

fn strip_list_markup(line: &str) -> &str {
    let mut s = line.trim();
    // Iterate to a fixpoint so parsing its own output changes nothing,
    // e.g. nested markup like `1. "2) foo"`.
    loop {
        let before = s;
        // leading bullets
        s = s.trim_start_matches(['-', '*', '\u{2022}']).trim_start();
        // leading numbering: digits followed by '.' or ')'
        let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits > 0 {
            let rest = &s[digits..];
            if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
                s = r.trim_start();
            }
        }
        // matching surrounding quote pairs
        const PAIRS: &[(char, char)] = &[
            ('"', '"'),
            ('\'', '\''),
            ('\u{201c}', '\u{201d}'),
            ('\u{2018}', '\u{2019}'),
            ('\u{00ab}', '\u{00bb}'),
        ];
        for &(open, close) in PAIRS {
            if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
                let mut chars = s.chars();
                chars.next();
                chars.next_back();
                s = chars.as_str().trim();
                break;
            }
        }
        if s == before {
            return s;
        }
    }
}

/// Extracts query texts from a completion.
///
/// Accepts numbered or bulleted lists, optionally under `[name]`,
/// `[service]`, `[location]` section labels matching the three
/// generation steps. Strips markup, drops empties, preserves order, and
/// dedups case-insensitively keeping the first occurrence. Unlabeled
/// output maps to the name derivation.
pub fn parse_llm_output(raw: &str) -> Result<Vec<ParsedQuery>, ParseOutputError> {
    let mut out: Vec<ParsedQuery> = Vec::new();
    let mut seen = alloc::collections::BTreeSet::new();
    let mut current = Derivation::Name;
    for line in raw.lines() {
        if let Some(d) = section_label(line) {
            current = d;
            continue;
        }
        let text = normalize_field(strip_list_markup(line));
        if text.is_empty() {
            continue;
        }
        let key = normalize_for_match(&text);
        if seen.insert(key) {
            out.push(ParsedQuery { text, derivation: current });
        }
    }
    if out.is_empty() {
        Err(ParseOutputError::EmptyOutput)
    } else {
        Ok(out)
    }
}

/// Builds a group from parsed LLM queries, tagging source and target.
pub fn group_from_parsed(shop: &Shop, parsed: &[ParsedQuery]) -> QueryGroup {
    let mut group = QueryGroup::new(&shop.id);
    for p in parsed {
        group.push_deduped(TestQuery::new(
            &p.text,
            &shop.id,
            p.derivation,
            ConceptRelation::Unknown,
            QuerySource::Llm,
        ));
    }
    group
}

/// Knobs for the deterministic template generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRules {
    /// Minimum length (chars) for single name-token queries.
    pub min_token_len: usize,
    /// Group size cap; excess queries are truncated preserving derivation
    /// diversity.
    pub max_queries: usize,
    /// Trailing tokens treated as branch designators and removed by the
    /// suffix rule, e.g. "branch".
    pub branch_suffixes: Vec<String>,
    /// Emit the "type + city" location-style query.
    pub include_city_query: bool,
}

impl Default for TemplateRules {
    fn default() -> Self {
        Self {
            min_token_len: 2,
            max_queries: 6,
            branch_suffixes: alloc::vec!["branch".to_string(), "\u{5206}\u{5e97}".to_string()],
            include_city_query: true,
        }
    }
}

fn strip_parenthetical(name: &str) -> String {
    // remove trailing "(...)" groups
    let mut s = name.trim();
    loop {
        let t = s.trim_end();
        if t.ends_with(')') {
            if let Some(open) = t.rfind('(') {
                s = t[..open].trim_end();
                continue;
            }
        }
        break;
    }
    s.to_string()
}

/// Deterministic per-shop query generation, the offline substitute for
/// the LLM path. Rules, in order:
/// (a) full shop name;
/// (b) name with parenthetical/branch suffix removed;
/// (c) each maximal name token of length >= `min_token_len`;
/// (d) shop type verbatim and its head token;
/// (e) "type + city" location-style query.
/// Output is deduped and capped; a pure function of (shop, rules).
pub fn generate_template(shop: &Shop, rules: &TemplateRules) -> QueryGroup {
    let mut group = QueryGroup::new(&shop.id);
    let push = |group: &mut QueryGroup, text: &str, d: Derivation, rel: ConceptRelation| {
        if !text.trim().is_empty() {
            group.push_deduped(TestQuery::new(text, &shop.id, d, rel, QuerySource::Template));
        }
    };

    // (a) full name
    push(&mut group, &shop.name, Derivation::Name, ConceptRelation::Equivalent);

    // (b) parenthetical / branch suffix removed
    let mut base = strip_parenthetical(&shop.name);
    let base_tokens = tokenize(&base);
    if let Some(last) = base_tokens.last() {
        if rules.branch_suffixes.iter().any(|s| normalize_for_match(s) == *last) {
            if let Some(cut) = normalize_for_match(&base).rfind(last.as_str()) {
                base.truncate(cut);
                base = base.trim_end().to_string();
            }
        }
    }
    push(&mut group, &base, Derivation::Name, ConceptRelation::Equivalent);

    // (c) name tokens, original casing recovered from the name where possible
    for token in tokenize(&shop.name) {
        if token.chars().count() >= rules.min_token_len {
            let original = original_casing(&shop.name, &token);
            push(&mut group, &original, Derivation::Name, ConceptRelation::Unknown);
        }
    }

    // (d) shop type and its head token
    push(&mut group, &shop.shop_type, Derivation::ServiceProduct, ConceptRelation::Including);
    if let Some(head) = tokenize(&shop.shop_type).first() {
        let original = original_casing(&shop.shop_type, head);
        push(&mut group, &original, Derivation::ServiceProduct, ConceptRelation::Including);
    }

    // (e) type + city
    if rules.include_city_query && !shop.city.trim().is_empty() {
        let q = alloc::format!("{} {}", shop.shop_type, shop.city);
        push(&mut group, &q, Derivation::Location, ConceptRelation::Including);
    }

    truncate_group(&mut group, rules.max_queries);
    group
}

/// Finds the original-cased span of `token` (a match-normalized token)
/// inside `source`; falls back to the token itself.
fn original_casing(source: &str, token: &str) -> String {
    let norm = normalize_for_match(source);
    if let Some(pos) = norm.find(token) {
        let field = normalize_field(source);
        // normalize_for_match only lowercases normalize_field, and
        // lowercasing can change byte lengths for some scripts; guard.
        if field.len() == norm.len() && field.is_char_boundary(pos) {
            let end = pos + token.len();
            if field.is_char_boundary(end) {
                return field[pos..end].to_string();
            }
        }
    }
    token.to_string()
}

/// Drops excess queries beyond `cap`, removing from the tail of whichever
/// derivation currently has the most entries, so every derivation keeps
/// at least one query when available.
pub fn truncate_group(group: &mut QueryGroup, cap: usize) {
    while group.queries.len() > cap.max(1) {
        let mut counts = [0usize; 3];
        for q in &group.queries {
            counts[q.derivation as usize] += 1;
        }
        let richest = (0..3)
            .max_by_key(|&d| (counts[d], d))
            .expect("non-empty derivation set");
        let idx = group
            .queries
            .iter()
            .rposition(|q| q.derivation as usize == richest)
            .expect("derivation present");
        group.queries.remove(idx);
    }
}
