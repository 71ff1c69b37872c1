//! The consistency oracle.
//!
//! All queries of a group target the same shop, so their recall outcomes
//! should agree. A mixed group flags a potential missed recall for every
//! failing query, with the succeeding queries as witnesses. A group where
//! nothing recalls the target reports nothing: the shop may simply be
//! gone, and flagging it would only manufacture false positives.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::query::{QueryGroup, TestQuery};
use crate::search::SearchContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ConsistentAllTrue,
    SuppressedAllFalse,
    Violation,
    /// Fewer than two queries; never evaluated.
    Ineligible,
    /// Some query was gated or failed to execute; never evaluated.
    Incomplete,
}

/// Per-group oracle outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupVerdict {
    pub target_shop_id: String,
    /// Recall outcome per query, in query order; empty for incomplete
    /// groups.
    pub outcomes: Vec<bool>,
    pub classification: Classification,
}

/// A flagged potential missed recall: one failing query plus the sibling
/// queries that did recall the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissedRecallFinding {
    pub id: String,
    pub target_shop_id: String,
    pub failing_query: TestQuery,
    pub witnesses: Vec<TestQuery>,
    pub context: Option<SearchContext>,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    ArityMismatch { queries: usize, outcomes: usize },
}

impl core::fmt::Display for OracleError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OracleError::ArityMismatch { queries, outcomes } => write!(
                f,
                "group has {queries} queries but {outcomes} outcomes"
            ),
        }
    }
}

fn finding_id(shop_id: &str, query: &TestQuery) -> String {
    alloc::format!("{}:{}", shop_id, query.dedup_key())
}

/// Applies the consistency relation to one complete group.
///
/// Classification is exhaustive over boolean outcome vectors of length
/// >= 2: all true is consistent, all false is suppressed, anything mixed
/// is a violation with one finding per failing query.
pub fn evaluate_group(
    group: &QueryGroup,
    outcomes: &[bool],
    context: Option<&SearchContext>,
    run_id: &str,
) -> Result<(GroupVerdict, Vec<MissedRecallFinding>), OracleError> {
    if outcomes.len() != group.queries.len() {
        return Err(OracleError::ArityMismatch {
            queries: group.queries.len(),
            outcomes: outcomes.len(),
        });
    }
    let classification = if outcomes.len() < 2 {
        Classification::Ineligible
    } else if outcomes.iter().all(|&y| y) {
        Classification::ConsistentAllTrue
    } else if outcomes.iter().all(|&y| !y) {
        Classification::SuppressedAllFalse
    } else {
        Classification::Violation
    };

    let mut findings = Vec::new();
    if classification == Classification::Violation {
        let witnesses: Vec<TestQuery> = group
            .queries
            .iter()
            .zip(outcomes)
            .filter(|(_, &y)| y)
            .map(|(q, _)| q.clone())
            .collect();
        for (q, &y) in group.queries.iter().zip(outcomes) {
            if !y {
                findings.push(MissedRecallFinding {
                    id: finding_id(&group.target_shop_id, q),
                    target_shop_id: group.target_shop_id.clone(),
                    failing_query: q.clone(),
                    witnesses: witnesses.clone(),
                    context: context.cloned(),
                    run_id: run_id.to_string(),
                });
            }
        }
    }

    Ok((
        GroupVerdict {
            target_shop_id: group.target_shop_id.clone(),
            outcomes: outcomes.to_vec(),
            classification,
        },
        findings,
    ))
}

/// Outcomes attached to a group before oracle evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "outcomes")]
pub enum GroupOutcomes {
    /// Every query executed; one boolean per query in order.
    Complete(Vec<bool>),
    /// Some query was gated or failed to execute.
    Incomplete,
}

/// One group ready for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEvaluation {
    pub group: QueryGroup,
    pub outcomes: GroupOutcomes,
    pub context: Option<SearchContext>,
}

/// Run-level tallies emitted next to the verdict list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTallies {
    pub groups: usize,
    pub consistent_all_true: usize,
    pub suppressed_all_false: usize,
    pub violation: usize,
    pub ineligible: usize,
    pub incomplete: usize,
    /// Entry-wise finding count.
    pub finding_entries: usize,
    /// Distinct flagged shops.
    pub finding_shops: usize,
}

/// Evaluates every group and orders the output for reproducibility:
/// verdicts by shop id, findings by (shop id, query text). Per-group
/// contract errors are collected, not fatal.
pub fn evaluate_run(
    items: &[GroupEvaluation],
    run_id: &str,
) -> (Vec<GroupVerdict>, Vec<MissedRecallFinding>, RunTallies, Vec<OracleError>) {
    let mut verdicts = Vec::new();
    let mut findings = Vec::new();
    let mut errors = Vec::new();
    for item in items {
        match &item.outcomes {
            GroupOutcomes::Incomplete => verdicts.push(GroupVerdict {
                target_shop_id: item.group.target_shop_id.clone(),
                outcomes: Vec::new(),
                classification: Classification::Incomplete,
            }),
            GroupOutcomes::Complete(outcomes) => {
                match evaluate_group(&item.group, outcomes, item.context.as_ref(), run_id) {
                    Ok((v, f)) => {
                        verdicts.push(v);
                        findings.extend(f);
                    }
                    Err(e) => errors.push(e),
                }
            }
        }
    }
    verdicts.sort_by(|a, b| a.target_shop_id.cmp(&b.target_shop_id));
    findings.sort_by(|a, b| {
        (a.target_shop_id.as_str(), a.failing_query.text.as_str())
            .cmp(&(b.target_shop_id.as_str(), b.failing_query.text.as_str()))
    });

    let mut tallies = RunTallies { groups: verdicts.len(), ..RunTallies::default() };
    for v in &verdicts {
        match v.classification {
            Classification::ConsistentAllTrue => tallies.consistent_all_true += 1,
            Classification::SuppressedAllFalse => tallies.suppressed_all_false += 1,
            Classification::Violation => tallies.violation += 1,
            Classification::Ineligible => tallies.ineligible += 1,
            Classification::Incomplete => tallies.incomplete += 1,
        }
    }
    tallies.finding_entries = findings.len();
    let mut shops: Vec<&str> = findings.iter().map(|f| f.target_shop_id.as_str()).collect();
    shops.sort_unstable();
    shops.dedup();
    tallies.finding_shops = shops.len();

    (verdicts, findings, tallies, errors)
}
