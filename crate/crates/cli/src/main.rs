use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use recallcheck::backend::SearchBackend;
use recallcheck::catalog_io::{emit_catalog, parse_catalog};
use recallcheck::config::{CatalogFormat, GeneratorMode, RunConfig, ValidationMode};
use recallcheck::gateway::{Gateway, HttpTransport};
use recallcheck::pipeline::{
    build_backend, read_jsonl, stage_generate, stage_run, stage_validate, write_jsonl,
};
use recallcheck::report::{emit_report, ingest_confirmations, Report, ReportFormat};
use recallcheck::sim_server::serve_blocking;
use recallcheck_core::query::QueryGroup;
use recallcheck_core::shop::Catalog;

/// Missed-recall detector for location-based shop search.
#[derive(Parser)]
#[command(name = "recallcheck", version, about)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true, default_value = "recallcheck.toml")]
    config: PathBuf,
    /// Override the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the catalog; write the normalized copy.
    Ingest,
    /// Generate query groups per shop.
    Generate,
    /// Filter generated queries through the configured validator.
    Validate,
    /// Execute queries, apply the oracle, write findings and report.
    Run,
    /// Merge confirmation labels and emit the final report.
    Report {
        /// Confirmation CSV: finding_id,label,annotator,notes.
        #[arg(long)]
        confirmations: Option<PathBuf>,
    },
    /// Serve the simulator over HTTP.
    SimServe {
        /// Port to bind; 0 picks a free port.
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

/// 0 = success; 1 = fatal config/IO error; 2 = partial failures above
/// the configured threshold.
const EXIT_PARTIAL: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;

    match cli.command {
        Command::Ingest => cmd_ingest(&config),
        Command::Generate => cmd_generate(&config),
        Command::Validate => cmd_validate(&config),
        Command::Run => cmd_run(&config),
        Command::Report { confirmations } => cmd_report(&config, confirmations.as_deref()),
        Command::SimServe { port } => {
            let catalog = load_catalog(&config)?;
            let sim_path = config
                .backend
                .sim_config
                .as_ref()
                .context("sim-serve requires backend.sim_config")?;
            let sim = recallcheck::pipeline::load_sim_config(sim_path)?;
            serve_blocking(&catalog, sim, port)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_catalog(config: &RunConfig) -> Result<Catalog> {
    let file = File::open(&config.catalog.path)
        .with_context(|| format!("opening catalog {}", config.catalog.path.display()))?;
    let source = config.catalog.path.display().to_string();
    let (catalog, errors) = parse_catalog(file, config.catalog.format, &source)?;
    for e in &errors {
        eprintln!("warning: catalog row {} rejected: {}", e.row, e.reason);
    }
    Ok(catalog)
}

fn make_gateway(config: &RunConfig) -> Result<Option<Gateway<HttpTransport>>> {
    let needs_llm = config.generator.mode == GeneratorMode::Llm
        || config.validation.mode == ValidationMode::Llm;
    if !needs_llm {
        return Ok(None);
    }
    let endpoint = config.endpoint.clone().context("missing [endpoint] section")?;
    let retry = endpoint.retry.policy();
    let rpm = endpoint.requests_per_minute;
    let transport = HttpTransport::new(endpoint)?;
    Ok(Some(Gateway::new(transport, retry, config.seed, rpm)?))
}

fn cmd_ingest(config: &RunConfig) -> Result<ExitCode> {
    let file = File::open(&config.catalog.path)
        .with_context(|| format!("opening catalog {}", config.catalog.path.display()))?;
    let source = config.catalog.path.display().to_string();
    let (catalog, errors) = parse_catalog(file, config.catalog.format, &source)?;
    std::fs::write(
        config.out_dir.join("catalog.json"),
        emit_catalog(&catalog, CatalogFormat::Json)?,
    )?;
    write_jsonl(&config.out_dir.join("ingest_errors.jsonl"), &errors)?;
    println!("ingested {} shops, {} rows rejected", catalog.len(), errors.len());
    Ok(ExitCode::SUCCESS)
}

fn over_threshold(failures: usize, population: usize, threshold: f64) -> bool {
    population > 0 && (failures as f64 / population as f64) > threshold
}

fn cmd_generate(config: &RunConfig) -> Result<ExitCode> {
    let catalog = load_catalog(config)?;
    let gateway = make_gateway(config)?;
    let (groups, failures) = stage_generate(config, &catalog, gateway.as_ref())?;
    write_jsonl(&config.out_dir.join("groups.jsonl"), &groups)?;
    write_jsonl(&config.out_dir.join("generate_failures.jsonl"), &failures)?;
    println!("generated {} groups ({} shops failed)", groups.len(), failures.len());
    if over_threshold(failures.len(), catalog.len(), config.limits.partial_failure_threshold) {
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn read_groups(config: &RunConfig, validated: bool) -> Result<Vec<QueryGroup>> {
    let validated_path = config.out_dir.join("groups.validated.jsonl");
    let raw_path = config.out_dir.join("groups.jsonl");
    let path: &Path = if validated && validated_path.exists() { &validated_path } else { &raw_path };
    read_jsonl(path)
}

fn cmd_validate(config: &RunConfig) -> Result<ExitCode> {
    let catalog = load_catalog(config)?;
    let groups = read_groups(config, false)?;
    let gateway = make_gateway(config)?;
    let (kept, drops) = stage_validate(config, &catalog, &groups, gateway.as_ref())?;
    write_jsonl(&config.out_dir.join("groups.validated.jsonl"), &kept)?;
    write_jsonl(&config.out_dir.join("drops.jsonl"), &drops)?;
    println!("validated {} groups ({} queries dropped)", kept.len(), drops.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(config: &RunConfig) -> Result<ExitCode> {
    let catalog = load_catalog(config)?;
    let groups = read_groups(config, true)?;
    let backend: Box<dyn SearchBackend> = build_backend(config, &catalog)?;
    let artifacts = stage_run(config, &catalog, &groups, backend.as_ref())?;
    write_jsonl(&config.out_dir.join("evaluations.jsonl"), &artifacts.evaluations)?;
    write_jsonl(&config.out_dir.join("findings.jsonl"), &artifacts.findings)?;
    let report = Report::from_artifacts(&artifacts, &config.digest());
    std::fs::write(config.out_dir.join("report.json"), emit_report(&report, ReportFormat::Json)?)?;
    std::fs::write(config.out_dir.join("findings.csv"), emit_report(&report, ReportFormat::Csv)?)?;
    let text = emit_report(&report, ReportFormat::TextSummary)?;
    std::fs::write(config.out_dir.join("report.txt"), &text)?;
    print!("{text}");
    let incomplete = artifacts.tallies.incomplete;
    if over_threshold(incomplete, artifacts.tallies.groups, config.limits.partial_failure_threshold)
    {
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(config: &RunConfig, confirmations: Option<&Path>) -> Result<ExitCode> {
    let raw = std::fs::read_to_string(config.out_dir.join("report.json"))
        .context("no report.json in the output directory; run the `run` stage first")?;
    let mut report: Report = serde_json::from_str(&raw)?;
    let mut row_errors = Vec::new();
    if let Some(path) = confirmations {
        let file = File::open(path)
            .with_context(|| format!("opening confirmations {}", path.display()))?;
        row_errors = ingest_confirmations(&mut report, file)?;
        for e in &row_errors {
            eprintln!("warning: confirmation row {} rejected: {}", e.row, e.reason);
        }
    } else {
        report.refresh_metrics();
    }
    std::fs::write(
        config.out_dir.join("report.final.json"),
        emit_report(&report, ReportFormat::Json)?,
    )?;
    let text = emit_report(&report, ReportFormat::TextSummary)?;
    std::fs::write(config.out_dir.join("report.final.txt"), &text)?;
    write_jsonl(&config.out_dir.join("confirmation_errors.jsonl"), &row_errors)?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}
