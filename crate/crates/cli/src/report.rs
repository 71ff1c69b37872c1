//! Run reports and confirmation-label ingestion.
//!
//! Reports are deterministic bytes for fixed inputs: stable ordering,
//! ratios and efficiency printed to three decimals. Confirmation is a
//! human step; this module only merges its outcome into the ledger.

use std::collections::BTreeMap;
use std::io::Read;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use recallcheck_core::metrics::{compute_metrics, Label, MetricValue, RunLedger, RunMetrics};
use recallcheck_core::oracle::{MissedRecallFinding, RunTallies};

use crate::pipeline::RunArtifacts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    TextSummary,
}

/// The report document emitted after a run (and again after
/// confirmation ingestion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub config_digest: String,
    pub tallies: RunTallies,
    pub n_executed: u64,
    pub n_generated: u64,
    pub findings: Vec<MissedRecallFinding>,
    pub labels: BTreeMap<String, Label>,
    pub metrics: RunMetrics,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn from_artifacts(artifacts: &RunArtifacts, config_digest: &str) -> Self {
        Self {
            run_id: artifacts.run_id.clone(),
            config_digest: config_digest.to_string(),
            tallies: artifacts.tallies.clone(),
            n_executed: artifacts.n_executed,
            n_generated: artifacts.n_generated,
            findings: artifacts.findings.clone(),
            labels: BTreeMap::new(),
            metrics: artifacts.metrics.clone(),
            warnings: artifacts.warnings.clone(),
        }
    }

    pub fn ledger(&self) -> RunLedger {
        let mut ledger = RunLedger::new(self.n_executed, self.findings.clone());
        ledger.labels = self.labels.clone();
        ledger
    }

    /// Recomputes metrics from the current labels.
    pub fn refresh_metrics(&mut self) {
        self.metrics = compute_metrics(&self.ledger());
    }
}

fn fmt_metric(m: &MetricValue) -> String {
    match m {
        MetricValue::Defined { value } => format!("{value:.3}"),
        MetricValue::Undefined { reason } => format!("undefined ({reason})"),
    }
}

/// Renders the report in the requested format; identical inputs yield
/// identical bytes.
pub fn emit_report(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(report)?;
            out.push('\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record([
                "finding_id",
                "target_shop_id",
                "failing_query",
                "witnesses",
                "label",
            ])?;
            for f in &report.findings {
                let witnesses: Vec<&str> =
                    f.witnesses.iter().map(|w| w.text.as_str()).collect();
                let label = match report.labels.get(&f.id) {
                    Some(Label::Confirmed) => "confirmed",
                    Some(Label::FalsePositive) => "false_positive",
                    _ => "pending",
                };
                writer.write_record([
                    f.id.as_str(),
                    f.target_shop_id.as_str(),
                    f.failing_query.text.as_str(),
                    &witnesses.join("; "),
                    label,
                ])?;
            }
            let bytes = writer.into_inner().context("flushing findings CSV")?;
            Ok(String::from_utf8(bytes)?)
        }
        ReportFormat::TextSummary => {
            let t = &report.tallies;
            let m = &report.metrics;
            let mut out = String::new();
            out += &format!("run {}\n", report.run_id);
            out += &format!("config digest {}\n", report.config_digest);
            out += &format!(
                "groups {} (all-true {}, suppressed {}, violations {}, ineligible {}, incomplete {})\n",
                t.groups,
                t.consistent_all_true,
                t.suppressed_all_false,
                t.violation,
                t.ineligible,
                t.incomplete
            );
            out += &format!(
                "queries executed {} (generated {})\n",
                report.n_executed, report.n_generated
            );
            out += &format!(
                "findings: {} entries over {} shops ({} confirmed, {} pending)\n",
                m.n_reported_entries, m.n_reported_shops, m.n_confirmed_entries, m.pending_entries
            );
            out += &format!("false positive ratio {}\n", fmt_metric(&m.r_fp));
            out += &format!("test case efficiency {}\n", fmt_metric(&m.e_tc));
            for w in &report.warnings {
                out += &format!("warning: {w}\n");
            }
            Ok(out)
        }
    }
}

/// One row of the confirmation CSV: `finding_id,label,annotator,notes`.
#[derive(Debug, Clone, Deserialize)]
struct ConfirmationRow {
    finding_id: String,
    label: String,
    #[serde(default)]
    #[allow(dead_code)]
    annotator: String,
    #[serde(default)]
    #[allow(dead_code)]
    notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmationRowError {
    pub row: usize,
    pub reason: String,
}

/// Merges confirmation labels into the report. Unknown finding ids are
/// row errors; duplicate labels resolve last-writer-wins with a warning.
/// Returns the collected row errors.
pub fn ingest_confirmations(
    report: &mut Report,
    input: impl Read,
) -> Result<Vec<ConfirmationRowError>> {
    let mut reader = csv::Reader::from_reader(input);
    let known: std::collections::BTreeSet<&str> =
        report.findings.iter().map(|f| f.id.as_str()).collect();
    let mut errors = Vec::new();
    for (i, row) in reader.deserialize::<ConfirmationRow>().enumerate() {
        let rownum = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(ConfirmationRowError { row: rownum, reason: format!("bad row: {e}") });
                continue;
            }
        };
        let label = match row.label.trim() {
            "confirmed" => Label::Confirmed,
            "false_positive" => Label::FalsePositive,
            "pending" => Label::Pending,
            other => {
                errors.push(ConfirmationRowError {
                    row: rownum,
                    reason: format!("unknown label `{other}`"),
                });
                continue;
            }
        };
        if !known.contains(row.finding_id.as_str()) {
            errors.push(ConfirmationRowError {
                row: rownum,
                reason: format!("unknown finding id `{}`", row.finding_id),
            });
            continue;
        }
        if let Some(previous) = report.labels.insert(row.finding_id.clone(), label) {
            if previous != label {
                report.warnings.push(format!(
                    "conflicting labels for `{}`: keeping the later one",
                    row.finding_id
                ));
            }
        }
    }
    report.refresh_metrics();
    Ok(errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use recallcheck_core::query::{ConceptRelation, Derivation, QuerySource, TestQuery};

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

    fn report_with(reported: u64, confirmed: u64, total: u64) -> Report {
        let findings: Vec<_> =
            (0..reported).map(|i| finding(&format!("s{i}"), i as usize)).collect();
        let mut labels = BTreeMap::new();
        for i in 0..reported {
            let label = if i < confirmed { Label::Confirmed } else { Label::FalsePositive };
            labels.insert(format!("s{i}:q{i}"), label);
        }
        let mut ledger = RunLedger::new(total, findings.clone());
        ledger.labels = labels.clone();
        Report {
            run_id: "r".into(),
            config_digest: "digest".into(),
            tallies: RunTallies::default(),
            n_executed: total,
            n_generated: total,
            findings,
            labels,
            metrics: compute_metrics(&ledger),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn reference_ledger_summary_prints_three_decimals() {
        let text = emit_report(&report_with(35, 6, 2607), ReportFormat::TextSummary).unwrap();
        assert!(text.contains("0.829"), "{text}");
        assert!(text.contains("434.500"), "{text}");
    }

    #[test]
    fn empty_run_reports_undefined_metrics() {
        let report = report_with(0, 0, 100);
        let text = emit_report(&report, ReportFormat::TextSummary).unwrap();
        assert!(text.contains("undefined"), "{text}");
        let json = emit_report(&report, ReportFormat::Json).unwrap();
        assert!(json.contains("no reported findings"), "{json}");
    }

    #[test]
    fn emission_is_deterministic() {
        let report = report_with(4, 2, 100);
        for format in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::TextSummary] {
            assert_eq!(
                emit_report(&report, format).unwrap(),
                emit_report(&report, format).unwrap()
            );
        }
    }

    #[test]
    fn confirmations_merge_with_last_writer_wins() {
        let mut report = report_with(3, 0, 50);
        report.labels.clear();
        report.refresh_metrics();
        let csv = "finding_id,label,annotator,notes\n\
                   s0:q0,confirmed,alice,\n\
                   s1:q1,false_positive,bob,\n\
                   s0:q0,false_positive,bob,second opinion\n";
        let errors = ingest_confirmations(&mut report, csv.as_bytes()).unwrap();
        assert!(errors.is_empty());
        assert_eq!(report.labels["s0:q0"], Label::FalsePositive);
        assert!(report.warnings.iter().any(|w| w.contains("conflicting")));
        assert_eq!(report.metrics.n_confirmed_entries, 0);
        assert_eq!(report.metrics.pending_entries, 1);
    }

    #[test]
    fn unknown_finding_id_is_a_row_error() {
        let mut report = report_with(1, 0, 10);
        report.labels.clear();
        let csv = "finding_id,label,annotator,notes\nnope:q9,confirmed,alice,\n";
        let errors = ingest_confirmations(&mut report, csv.as_bytes()).unwrap();
        assert_eq!(errors.len(), 1);
        assert!(errors[0].reason.contains("unknown finding id"));
    }

    #[test]
    fn fully_labeled_ledger_updates_metrics() {
        let mut report = report_with(3, 0, 300);
        report.labels.clear();
        report.refresh_metrics();
        let csv = "finding_id,label,annotator,notes\n\
                   s0:q0,confirmed,a,\ns1:q1,confirmed,a,\ns2:q2,false_positive,a,\n";
        ingest_confirmations(&mut report, csv.as_bytes()).unwrap();
        assert_eq!(report.metrics.n_confirmed_entries, 2);
        assert_eq!(report.metrics.pending_entries, 0);
        assert_eq!(report.metrics.e_tc.value().unwrap(), 150.0);
    }
}
