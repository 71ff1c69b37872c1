//! Pipeline stages over JSON-lines artifacts.
//!
//! Each stage is a pure-ish function from loaded artifacts to new
//! artifacts, so runs are resumable: re-running a stage with unchanged
//! inputs reproduces identical output bytes. The CLI wires these stages
//! to files; tests call them directly.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use recallcheck_core::metrics::{compute_metrics, RunLedger, RunMetrics};
use recallcheck_core::oracle::{
    evaluate_run, GroupEvaluation, GroupOutcomes, GroupVerdict, MissedRecallFinding, RunTallies,
};
use recallcheck_core::prompt::{builtin_template_en, builtin_template_zh, PromptTemplate};
use recallcheck_core::query::{generate_template, truncate_group, QueryGroup, QuerySource};
use recallcheck_core::search::{gate_time, recalled, GateResult, SearchContext};
use recallcheck_core::shop::Catalog;
use recallcheck_core::sim::SimConfig;
use recallcheck_core::validation::{
    filter_group, validate_rule, DropRecord, RuleCheck, ValidationVerdict,
};

use crate::backend::{HttpBackend, SearchBackend, SimBackend};
use crate::config::{BackendMode, GeneratorMode, RunConfig, ValidationMode};
use crate::gateway::{Gateway, Transport};
use crate::generator::generate_llm;
use crate::validator::validate_llm;

/// Writes one JSON value per line; a trailing newline ends the file.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut file =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for item in items {
        serde_json::to_writer(&mut file, item)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{} line {}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn load_sim_config(path: &Path) -> Result<SimConfig> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("reading simulator config {}", path.display()))?;
    serde_json::from_str(&raw)
        .with_context(|| format!("parsing simulator config {}", path.display()))
}

/// Builds the configured backend over the ingested catalog.
pub fn build_backend(config: &RunConfig, catalog: &Catalog) -> Result<Box<dyn SearchBackend>> {
    match config.backend.mode {
        BackendMode::Sim => {
            let sim_path = config.backend.sim_config.as_ref().expect("validated");
            let sim = load_sim_config(sim_path)?;
            Ok(Box::new(
                SimBackend::new(catalog, sim).map_err(|e| anyhow::anyhow!("{e}"))?,
            ))
        }
        BackendMode::Http => {
            let url = config.backend.url.as_ref().expect("validated");
            Ok(Box::new(
                HttpBackend::new(url, std::time::Duration::from_secs(30))
                    .map_err(|e| anyhow::anyhow!("{e}"))?,
            ))
        }
    }
}

pub fn prompt_template(config: &RunConfig) -> PromptTemplate {
    match config.generator.language.as_str() {
        "zh" => builtin_template_zh(),
        _ => builtin_template_en(),
    }
}

/// A per-shop stage failure; the run continues past it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShopFailure {
    pub shop_id: String,
    pub stage: String,
    pub error: String,
}

/// Generates one group per shop, ordered by shop id for determinism.
/// Per-shop failures are collected; an all-shops failure is fatal.
pub fn stage_generate<T: Transport>(
    config: &RunConfig,
    catalog: &Catalog,
    gateway: Option<&Gateway<T>>,
) -> Result<(Vec<QueryGroup>, Vec<ShopFailure>)> {
    let mut groups = Vec::new();
    let mut failures = Vec::new();
    let template = prompt_template(config);
    for shop in &catalog.shops {
        match config.generator.mode {
            GeneratorMode::Template => {
                groups.push(generate_template(shop, &config.generator.template_rules));
            }
            GeneratorMode::Llm => {
                let gateway = gateway
                    .context("LLM generation requires a configured gateway")?;
                match generate_llm(shop, &template, gateway) {
                    Ok(g) => groups.push(g),
                    Err(e) => failures.push(ShopFailure {
                        shop_id: shop.id.clone(),
                        stage: "generate".into(),
                        error: e.to_string(),
                    }),
                }
            }
        }
    }
    if !catalog.is_empty() && groups.is_empty() {
        bail!("generation failed for every shop");
    }
    groups.sort_by(|a, b| a.target_shop_id.cmp(&b.target_shop_id));
    Ok((groups, failures))
}

/// A dropped query with its group, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropAudit {
    pub target_shop_id: String,
    #[serde(flatten)]
    pub record: DropRecord,
}

/// Applies the configured validation to every group. LLM-sourced groups
/// are truncated to the generator cap after filtering, preserving
/// derivation diversity.
pub fn stage_validate<T: Transport>(
    config: &RunConfig,
    catalog: &Catalog,
    groups: &[QueryGroup],
    gateway: Option<&Gateway<T>>,
) -> Result<(Vec<QueryGroup>, Vec<DropAudit>)> {
    let mut kept_groups = Vec::new();
    let mut audits = Vec::new();
    let rule = RuleCheck { max_query_len: config.validation.max_query_len };
    let examples = recallcheck_core::prompt::builtin_validation_examples_en();
    for group in groups {
        let shop = match catalog.get(&group.target_shop_id) {
            Some(s) => s,
            None => bail!("group targets unknown shop `{}`", group.target_shop_id),
        };
        let mut kept = match config.validation.mode {
            ValidationMode::Off => group.clone(),
            ValidationMode::Rule | ValidationMode::Llm => {
                let verdicts: Vec<ValidationVerdict> = group
                    .queries
                    .iter()
                    .map(|q| match config.validation.mode {
                        ValidationMode::Rule => validate_rule(shop, q, &rule),
                        ValidationMode::Llm => {
                            let gateway =
                                gateway.expect("validated: llm mode requires endpoint");
                            validate_llm(shop, q, &examples, gateway)
                        }
                        ValidationMode::Off => unreachable!(),
                    })
                    .collect();
                let (kept, drops) =
                    filter_group(group, &verdicts).map_err(|e| anyhow::anyhow!("{e}"))?;
                audits.extend(drops.into_iter().map(|record| DropAudit {
                    target_shop_id: group.target_shop_id.clone(),
                    record,
                }));
                kept
            }
        };
        if kept.queries.iter().any(|q| q.source == QuerySource::Llm) {
            truncate_group(&mut kept, config.generator.template_rules.max_queries);
        }
        kept_groups.push(kept);
    }
    Ok((kept_groups, audits))
}

/// Everything a detection run produces before human confirmation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub run_id: String,
    pub evaluations: Vec<GroupEvaluation>,
    pub verdicts: Vec<GroupVerdict>,
    pub findings: Vec<MissedRecallFinding>,
    pub tallies: RunTallies,
    /// Executed queries (post-validation, post-gating) — the metrics
    /// denominator.
    pub n_executed: u64,
    /// All queries entering the stage, logged for transparency.
    pub n_generated: u64,
    pub metrics: RunMetrics,
    pub warnings: Vec<String>,
}

/// Executes every group against the backend and applies the oracle.
///
/// The context is pinned per group to the target shop's coordinates. A
/// run time outside the window gates every query; a transport failure
/// marks just that group incomplete. Incomplete and ineligible groups
/// never produce findings.
pub fn stage_run(
    config: &RunConfig,
    catalog: &Catalog,
    groups: &[QueryGroup],
    backend: &dyn SearchBackend,
) -> Result<RunArtifacts> {
    let minute = config.context.minute_of_day()?;
    let window = config.context.time_window()?;
    let mut evaluations = Vec::new();
    let mut warnings = Vec::new();
    let mut n_executed: u64 = 0;
    let n_generated: u64 = groups.iter().map(|g| g.queries.len() as u64).sum();

    for group in groups {
        let Some(shop) = catalog.get(&group.target_shop_id) else {
            warnings.push(format!(
                "group targets unknown shop `{}`; marked incomplete",
                group.target_shop_id
            ));
            evaluations.push(GroupEvaluation {
                group: group.clone(),
                outcomes: GroupOutcomes::Incomplete,
                context: None,
            });
            continue;
        };
        let ctx = SearchContext {
            account_id: config.context.account_id.clone(),
            location: shop.location,
            minute_of_day: minute,
            page_size: config.context.page_size,
            page_depth: config.context.page_depth,
        };
        if gate_time(&ctx, window) == GateResult::Gated {
            evaluations.push(GroupEvaluation {
                group: group.clone(),
                outcomes: GroupOutcomes::Incomplete,
                context: Some(ctx),
            });
            continue;
        }
        let mut outcomes = Vec::with_capacity(group.queries.len());
        let mut failed = None;
        for query in &group.queries {
            match backend.search(&query.text, &ctx) {
                Ok(page) => {
                    n_executed += 1;
                    outcomes.push(recalled(&page, shop).0);
                }
                Err(e) => {
                    failed = Some(format!(
                        "query `{}` for shop `{}` failed: {e}",
                        query.text, group.target_shop_id
                    ));
                    break;
                }
            }
        }
        let outcomes = match failed {
            Some(w) => {
                warnings.push(w);
                GroupOutcomes::Incomplete
            }
            None => GroupOutcomes::Complete(outcomes),
        };
        evaluations.push(GroupEvaluation { group: group.clone(), outcomes, context: Some(ctx) });
    }

    let (verdicts, findings, tallies, errors) = evaluate_run(&evaluations, &config.run_id);
    warnings.extend(errors.iter().map(|e| format!("oracle contract error: {e}")));

    let ledger = RunLedger::new(n_executed, findings.clone());
    let metrics = compute_metrics(&ledger);

    Ok(RunArtifacts {
        run_id: config.run_id.clone(),
        evaluations,
        verdicts,
        findings,
        tallies,
        n_executed,
        n_generated,
        metrics,
        warnings,
    })
}
