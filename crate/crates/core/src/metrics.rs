//! Benefit/cost metrics for a detection run.
//!
//! `R_fp = (N_reported - N_confirmed) / N_reported` and
//! `E_tc = N_total / N_confirmed`, both entry-wise. Confirmation is a
//! human step; this module only ingests its labels. Undefined metrics
//! stay explicitly undefined, never 0 or an infinity sentinel.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::oracle::MissedRecallFinding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Confirmed,
    FalsePositive,
    Pending,
}

/// Everything a run accumulated that metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    /// Executed test cases in the round (post-validation, post-gating).
    pub n_total: u64,
    pub findings: Vec<MissedRecallFinding>,
    /// finding id -> confirmation label; absent means pending.
    pub labels: BTreeMap<String, Label>,
}

impl RunLedger {
    pub fn new(n_total: u64, findings: Vec<MissedRecallFinding>) -> Self {
        Self { n_total, findings, labels: BTreeMap::new() }
    }

    pub fn label_of(&self, finding_id: &str) -> Label {
        self.labels.get(finding_id).copied().unwrap_or(Label::Pending)
    }
}

/// A ratio or average that may be undefined for this run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum MetricValue {
    Defined { value: f64 },
    Undefined { reason: String },
}

impl MetricValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Defined { value } => Some(*value),
            MetricValue::Undefined { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n_total: u64,
    pub n_reported_entries: u64,
    pub n_reported_shops: u64,
    pub n_confirmed_entries: u64,
    pub n_confirmed_shops: u64,
    pub pending_entries: u64,
    pub r_fp: MetricValue,
    pub e_tc: MetricValue,
}

fn distinct_shops<'a>(ids: impl Iterator<Item = &'a str>) -> u64 {
    let set: alloc::collections::BTreeSet<&str> = ids.collect();
    set.len() as u64
}

/// Pure aggregation over the ledger. Pending labels count as
/// unconfirmed, which makes pre-confirmation metrics provisional.
pub fn compute_metrics(ledger: &RunLedger) -> RunMetrics {
    let n_reported_entries = ledger.findings.len() as u64;
    let n_reported_shops =
        distinct_shops(ledger.findings.iter().map(|f| f.target_shop_id.as_str()));
    let confirmed: Vec<&MissedRecallFinding> = ledger
        .findings
        .iter()
        .filter(|f| ledger.label_of(&f.id) == Label::Confirmed)
        .collect();
    let n_confirmed_entries = confirmed.len() as u64;
    let n_confirmed_shops =
        distinct_shops(confirmed.iter().map(|f| f.target_shop_id.as_str()));
    let pending_entries = ledger
        .findings
        .iter()
        .filter(|f| ledger.label_of(&f.id) == Label::Pending)
        .count() as u64;

    let r_fp = if n_reported_entries > 0 {
        MetricValue::Defined {
            value: (n_reported_entries - n_confirmed_entries) as f64 / n_reported_entries as f64,
        }
    } else {
        MetricValue::Undefined { reason: "no reported findings".to_string() }
    };
    let e_tc = if n_confirmed_entries > 0 {
        MetricValue::Defined { value: ledger.n_total as f64 / n_confirmed_entries as f64 }
    } else {
        MetricValue::Undefined { reason: "no confirmed findings".to_string() }
    };

    RunMetrics {
        n_total: ledger.n_total,
        n_reported_entries,
        n_reported_shops,
        n_confirmed_entries,
        n_confirmed_shops,
        pending_entries,
        r_fp,
        e_tc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{ConceptRelation, Derivation, QuerySource, TestQuery};

    fn finding(shop: &str, n: usize) -> MissedRecallFinding {
        let q = TestQuery::new(
            &format!("q{n}"),
            shop,
            Derivation::Name,
            ConceptRelation::Unknown,
            QuerySource::Template,
        );
        MissedRecallFinding {
            id: format!("{shop}:q{n}"),
            target_shop_id: shop.to_string(),
            failing_query: q,
            witnesses: Vec::new(),
            context: None,
            run_id: "r".to_string(),
        }
    }

    fn ledger(reported: u64, confirmed: u64, total: u64) -> RunLedger {
        let findings: Vec<_> = (0..reported).map(|i| finding(&format!("s{i}"), i as usize)).collect();
        let mut l = RunLedger::new(total, findings);
        for i in 0..confirmed {
            l.labels.insert(format!("s{i}:q{i}"), Label::Confirmed);
        }
        for i in confirmed..reported {
            l.labels.insert(format!("s{i}:q{i}"), Label::FalsePositive);
        }
        l
    }

    #[test]
    fn gpt35_row_from_the_reference_data() {
        let m = compute_metrics(&ledger(47, 46, 3724));
        let r_fp = m.r_fp.value().unwrap();
        let e_tc = m.e_tc.value().unwrap();
        assert!((r_fp - 1.0 / 47.0).abs() < 1e-12);
        assert!((e_tc - 3724.0 / 46.0).abs() < 1e-12);
        // 3724 / 46 = 80.9565...
        assert!((e_tc - 80.956_521_739).abs() < 1e-6);
    }

    #[test]
    fn small_model_row_is_exact() {
        let m = compute_metrics(&ledger(35, 6, 2607));
        assert!((m.r_fp.value().unwrap() - 29.0 / 35.0).abs() < 1e-12);
        assert_eq!(m.e_tc.value().unwrap(), 434.5);
    }

    #[test]
    fn undefined_metrics_carry_reasons() {
        let m = compute_metrics(&RunLedger::new(100, Vec::new()));
        assert!(matches!(m.r_fp, MetricValue::Undefined { .. }));
        assert!(matches!(m.e_tc, MetricValue::Undefined { .. }));
    }

    #[test]
    fn pending_labels_count_as_unconfirmed() {
        let mut l = ledger(4, 2, 100);
        l.labels.remove("s3:q3");
        let m = compute_metrics(&l);
        assert_eq!(m.n_confirmed_entries, 2);
        assert_eq!(m.pending_entries, 1);
    }

    #[test]
    fn shopwise_counts_never_exceed_entrywise() {
        let mut l = RunLedger::new(10, vec![finding("s1", 0), finding("s1", 1), finding("s2", 2)]);
        l.labels.insert("s1:q0".into(), Label::Confirmed);
        l.labels.insert("s1:q1".into(), Label::Confirmed);
        let m = compute_metrics(&l);
        assert_eq!(m.n_reported_entries, 3);
        assert_eq!(m.n_reported_shops, 2);
        assert_eq!(m.n_confirmed_entries, 2);
        assert_eq!(m.n_confirmed_shops, 1);
        assert!(m.n_reported_shops <= m.n_reported_entries);
        assert!(m.n_confirmed_shops <= m.n_confirmed_entries);
    }
}
