//! Operator CLI binding the library into runnable workflows: ingest a fact
//! file, build reasoning history, induce methodologies, answer single
//! questions, run stratified evaluations, and export cluster reports.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Ablation, Backend, RunConfig};
use tkgqa_core::embed::{Embedder, HashedBowEmbedder, RemoteEmbedder, RemoteEmbedderConfig};
use tkgqa_core::eval::{
    evaluate_run, load_questions, save_traces, stratified_sample, match_answer, QuestionFormat,
    QuestionRecord, Split,
};
use tkgqa_core::llm::{
    LlmClient, LoggingLlm, RemoteLlmClient, RemoteLlmConfig, RequestLog, ScriptedClient,
};
use tkgqa_core::memory::{
    cluster_history, cluster_report_csv, induce_all, load_methodologies, save_methodologies,
    HistoryStore, MethodologyCluster,
};
use tkgqa_core::reasoner::{answer_question, ReasonerConfig};
use tkgqa_core::tkg::{load_alias_file, load_facts, FactFormat, TemporalKg};

#[derive(Parser)]
#[command(
    name = "tkgqa",
    version,
    about = "Temporal knowledge graph question answering agent"
)]
struct Cli {
    /// Flat key=value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the run configuration; any flag overrides the config file.
#[derive(Args, Default)]
struct CommonOpts {
    /// Tab-separated fact file.
    #[arg(long)]
    kg: Option<PathBuf>,
    /// Optional alias file (canonical TAB alias).
    #[arg(long)]
    alias: Option<PathBuf>,
    /// Line-delimited question file.
    #[arg(long)]
    questions: Option<PathBuf>,
    /// Question file dialect: multitq or cronquestions.
    #[arg(long)]
    format: Option<String>,
    /// Episode history store (JSONL, append-only).
    #[arg(long)]
    history: Option<PathBuf>,
    /// Methodology cluster file (JSONL).
    #[arg(long)]
    methodology: Option<PathBuf>,
    /// Completion backend.
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Script file for the scripted backend.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Root seed for sampling and clustering.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum reasoning steps per question.
    #[arg(long = "t-max")]
    max_steps: Option<usize>,
    /// Candidate filtration cap.
    #[arg(long = "top-k")]
    top_k: Option<usize>,
    /// Number of history clusters.
    #[arg(long)]
    clusters: Option<usize>,
    /// Number of training episodes to gather.
    #[arg(long = "history-size")]
    history_size: Option<usize>,
    /// Stratified evaluation sample size.
    #[arg(short = 'n', long = "sample-size")]
    sample_size: Option<usize>,
    /// Re-prompts allowed after an unusable response.
    #[arg(long = "parse-retries")]
    parse_retries: Option<usize>,
    /// Character budget per transcript section of the induction prompt.
    #[arg(long = "transcript-budget")]
    transcript_budget: Option<usize>,
    /// Parallel episodes (keep at 1 for scripted runs).
    #[arg(long)]
    jobs: Option<usize>,
    /// Disable one component.
    #[arg(long = "ablate", value_enum)]
    ablation: Option<Ablation>,
    /// Output directory for reports, traces, logs, and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Remote chat-completions base URL.
    #[arg(long = "api-base")]
    api_base: Option<String>,
    /// Remote model name.
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long = "api-key-env")]
    api_key_env: Option<String>,
    #[arg(long = "timeout-secs")]
    timeout_secs: Option<u64>,
    /// Remote retry count.
    #[arg(long)]
    retries: Option<usize>,
    /// Remote embedding endpoint (default: offline hashed bag-of-words).
    #[arg(long = "embed-url")]
    embed_url: Option<String>,
    #[arg(long = "embed-model")]
    embed_model: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and index a fact file, printing store statistics.
    Ingest(CommonOpts),
    /// Run the reasoner over training questions and record episodes.
    BuildHistory(CommonOpts),
    /// Cluster recorded history and induce one methodology per cluster.
    Induce(CommonOpts),
    /// Answer a single question and print the trace.
    Ask {
        #[command(flatten)]
        common: CommonOpts,
        /// The question text.
        #[arg(long)]
        question: String,
        /// Annotated subject entity; repeatable.
        #[arg(long = "anchor")]
        anchors: Vec<String>,
    },
    /// Stratified evaluation producing a metrics report and traces.
    Eval(CommonOpts),
    /// Export (episode id, cluster id, similarity) as CSV.
    ClusterReport(CommonOpts),
}

fn fold(cfg: &mut RunConfig, opts: &CommonOpts) {
    macro_rules! take {
        ($field:ident) => {
            if let Some(value) = &opts.$field {
                cfg.$field = Some(value.clone());
            }
        };
        ($field:ident, direct) => {
            if let Some(value) = &opts.$field {
                cfg.$field = value.clone();
            }
        };
    }
    take!(kg);
    take!(alias);
    take!(questions);
    take!(format, direct);
    take!(history);
    take!(methodology);
    if let Some(backend) = opts.backend {
        cfg.backend = backend;
    }
    take!(script);
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(v) = opts.max_steps {
        cfg.max_steps = v;
    }
    if let Some(v) = opts.top_k {
        cfg.top_k = v;
    }
    if let Some(v) = opts.clusters {
        cfg.clusters = v;
    }
    if let Some(v) = opts.history_size {
        cfg.history_size = v;
    }
    if let Some(v) = opts.sample_size {
        cfg.sample_size = v;
    }
    if let Some(v) = opts.parse_retries {
        cfg.parse_retries = v;
    }
    if let Some(v) = opts.transcript_budget {
        cfg.transcript_budget = v;
    }
    if let Some(v) = opts.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = opts.ablation {
        cfg.ablation = v;
    }
    take!(out);
    take!(api_base, direct);
    take!(model, direct);
    take!(api_key_env, direct);
    if let Some(v) = opts.timeout_secs {
        cfg.timeout_secs = v;
    }
    if let Some(v) = opts.retries {
        cfg.retries = v;
    }
    if let Some(v) = &opts.embed_url {
        cfg.embed_url = Some(v.clone());
    }
    take!(embed_model, direct);
}

fn resolve(cli_config: Option<&Path>, opts: &CommonOpts) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = cli_config {
        cfg.apply_file(path)?;
    }
    fold(&mut cfg, opts);
    Ok(cfg)
}

fn require<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value
        .as_ref()
        .with_context(|| format!("missing required option --{flag} (or config key {flag})"))
}

fn load_kg(cfg: &RunConfig) -> Result<TemporalKg> {
    let path = require(&cfg.kg, "kg")?;
    let kg = load_facts(path, FactFormat::Tsv)?;
    let kg = match &cfg.alias {
        Some(alias_path) => {
            let aliases = load_alias_file(alias_path)?;
            TemporalKg::from_facts(kg.facts().to_vec(), aliases)
        }
        None => kg,
    };
    Ok(kg)
}

fn build_llm(cfg: &RunConfig, log: Option<Arc<RequestLog>>) -> Result<Arc<dyn LlmClient>> {
    let inner: Arc<dyn LlmClient> = match cfg.backend {
        Backend::Scripted => {
            let script = require(&cfg.script, "script")?;
            Arc::new(ScriptedClient::from_file(script)?)
        }
        Backend::Remote => Arc::new(RemoteLlmClient::new(RemoteLlmConfig {
            base_url: cfg.api_base.clone(),
            model: cfg.model.clone(),
            api_key_env: Some(cfg.api_key_env.clone()),
            timeout_secs: cfg.timeout_secs,
            retries: cfg.retries,
            max_in_flight: cfg.jobs.max(1),
        })?),
    };
    Ok(match log {
        Some(log) => Arc::new(LoggingLlm::new(inner, log)),
        None => inner,
    })
}

/// An LLM that mirrors its traffic into `<out>/llm_log.jsonl` whenever an
/// output directory is configured.
fn build_logged_llm(cfg: &RunConfig) -> Result<Arc<dyn LlmClient>> {
    let log = match &cfg.out {
        Some(out_dir) => {
            std::fs::create_dir_all(out_dir)
                .with_context(|| format!("cannot create {}", out_dir.display()))?;
            Some(Arc::new(RequestLog::create(&out_dir.join("llm_log.jsonl"))?))
        }
        None => None,
    };
    build_llm(cfg, log)
}

fn build_embedder(cfg: &RunConfig) -> Result<Box<dyn Embedder>> {
    match &cfg.embed_url {
        Some(url) => Ok(Box::new(RemoteEmbedder::new(RemoteEmbedderConfig {
            url: url.clone(),
            model: cfg.embed_model.clone(),
            api_key_env: Some(cfg.api_key_env.clone()),
            timeout_secs: cfg.timeout_secs,
            retries: cfg.retries,
        })?)),
        None => Ok(Box::new(HashedBowEmbedder::default())),
    }
}

fn reasoner_config(cfg: &RunConfig) -> ReasonerConfig {
    ReasonerConfig {
        max_steps: cfg.max_steps,
        top_k: cfg.top_k,
        use_methodology: cfg.ablation != Ablation::NoMethodology,
        use_clustering: cfg.ablation != Ablation::NoCluster,
        use_filter: cfg.ablation != Ablation::NoFilter,
        parse_retries: cfg.parse_retries,
    }
}

fn question_format(cfg: &RunConfig) -> Result<QuestionFormat> {
    Ok(cfg.format.parse()?)
}

fn load_clusters(cfg: &RunConfig) -> Result<Option<Vec<MethodologyCluster>>> {
    let Some(path) = &cfg.methodology else {
        return Ok(None);
    };
    let clusters = load_methodologies(path)?;
    if cfg.ablation == Ablation::NoCluster && clusters.len() != 1 {
        bail!(
            "--ablate no-cluster expects a single global methodology; {} holds {} clusters \
             (re-run `induce --ablate no-cluster`)",
            path.display(),
            clusters.len()
        );
    }
    Ok(Some(clusters))
}

/// Manifest written beside every output set: enough to reproduce the run.
#[derive(serde::Serialize)]
struct Manifest {
    command: String,
    config_sha256: String,
    config: RunConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    cfg: &RunConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
) -> Result<()> {
    let manifest = Manifest {
        command: command.to_string(),
        config_sha256: cfg.sha256(),
        config: cfg.clone(),
        inputs,
        outputs,
    };
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn path_string(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let kg = load_kg(cfg)?;
    println!("facts: {}", kg.fact_count());
    println!("duplicates dropped: {}", kg.duplicates_dropped());
    println!("entities: {}", kg.entity_count());
    println!("relations: {}", kg.relation_count());
    Ok(())
}

fn resolved_anchors(kg: &TemporalKg, surfaces: &[String]) -> Vec<String> {
    surfaces
        .iter()
        .filter_map(|surface| kg.resolve_entity(surface).ok())
        .collect()
}

fn cmd_build_history(cfg: &RunConfig) -> Result<()> {
    let kg = load_kg(cfg)?;
    let format = question_format(cfg)?;
    let questions_path = require(&cfg.questions, "questions")?;
    let history_path = require(&cfg.history, "history")?;
    let llm = build_logged_llm(cfg)?;
    let embedder = build_embedder(cfg)?;

    let all = load_questions(questions_path, format)?;
    let train: Vec<QuestionRecord> = all
        .into_iter()
        .filter(|r| r.split == Split::Train)
        .collect();
    if train.is_empty() {
        bail!("no train-split questions in {}", questions_path.display());
    }
    let n = cfg.history_size.min(train.len());
    let sample = stratified_sample(&train, n, cfg.seed)?;

    let rcfg = reasoner_config(cfg);
    let mut store = HistoryStore::open(history_path)?;
    let mut correct_count = 0usize;
    for record in &sample {
        let anchors = resolved_anchors(&kg, &record.anchors);
        let trace = answer_question(
            &record.question,
            &anchors,
            &kg,
            None,
            llm.as_ref(),
            embedder.as_ref(),
            &rcfg,
        );
        let final_answer = trace.ranked_answers.first().cloned().unwrap_or_default();
        let correct = record.golds.iter().any(|gold| {
            match_answer(&final_answer, gold, record.answer_type, record.granularity)
        });
        correct_count += correct as usize;
        let episode = trace.to_episode(
            embedder.embed(&record.question)?,
            Some(record.golds.join(" | ")),
            Some(correct),
        );
        store.record(episode)?;
    }
    println!(
        "recorded {} episodes ({} correct) into {}; store now holds {}",
        sample.len(),
        correct_count,
        history_path.display(),
        store.len()
    );
    Ok(())
}

fn cmd_induce(cfg: &RunConfig) -> Result<()> {
    let history_path = require(&cfg.history, "history")?;
    let methodology_path = require(&cfg.methodology, "methodology")?;
    let llm = build_logged_llm(cfg)?;
    let store = HistoryStore::open(history_path)?;
    let k = if cfg.ablation == Ablation::NoCluster {
        1
    } else {
        cfg.clusters
    };
    let mut clusters = cluster_history(&store, k, cfg.seed)?;
    induce_all(&mut clusters, &store, llm.as_ref(), cfg.transcript_budget)?;
    save_methodologies(&clusters, methodology_path)?;
    for cluster in &clusters {
        println!(
            "cluster {}: {} members, methodology {} chars",
            cluster.id,
            cluster.member_indices.len(),
            cluster.methodology.as_deref().map(str::len).unwrap_or(0)
        );
    }
    println!("wrote {}", methodology_path.display());
    Ok(())
}

fn cmd_ask(cfg: &RunConfig, question: &str, anchor_surfaces: &[String]) -> Result<()> {
    let kg = load_kg(cfg)?;
    let llm = build_logged_llm(cfg)?;
    let embedder = build_embedder(cfg)?;
    let clusters = load_clusters(cfg)?;
    let anchors = resolved_anchors(&kg, anchor_surfaces);
    let trace = answer_question(
        question,
        &anchors,
        &kg,
        clusters.as_deref(),
        llm.as_ref(),
        embedder.as_ref(),
        &reasoner_config(cfg),
    );
    println!("question: {}", trace.question);
    if let Some(id) = trace.cluster_id {
        println!("methodology cluster: {id}");
    }
    for step in &trace.steps {
        println!(
            "step {}: {} -> {}",
            step.index,
            step.action.as_deref().unwrap_or("(no parsable action)"),
            step.result_summary
        );
    }
    println!("outcome: {}", trace.outcome.as_str());
    println!("ranked answers: {}", trace.ranked_answers.join(", "));
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let out_dir = require(&cfg.out, "out")?.clone();
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let kg = load_kg(cfg)?;
    let format = question_format(cfg)?;
    let questions_path = require(&cfg.questions, "questions")?;
    let log = Arc::new(RequestLog::create(&out_dir.join("llm_log.jsonl"))?);
    let llm = build_llm(cfg, Some(log))?;
    let embedder = build_embedder(cfg)?;
    let clusters = load_clusters(cfg)?;

    let all = load_questions(questions_path, format)?;
    let test: Vec<QuestionRecord> = all.into_iter().filter(|r| r.split == Split::Test).collect();
    if test.is_empty() {
        bail!("no test-split questions in {}", questions_path.display());
    }
    let n = cfg.sample_size.min(test.len());
    let sample = stratified_sample(&test, n, cfg.seed)?;

    let mut jobs = cfg.jobs.max(1);
    if cfg.backend == Backend::Scripted && jobs > 1 {
        eprintln!("note: scripted backend is sequential; forcing --jobs 1");
        jobs = 1;
    }
    let (report, traces) = evaluate_run(
        &sample,
        format,
        &reasoner_config(cfg),
        &kg,
        clusters.as_deref(),
        llm.as_ref(),
        embedder.as_ref(),
        jobs,
        cfg.ablation.tag(),
    )?;

    save_traces(&traces, &out_dir.join("traces.jsonl"))?;
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    std::fs::write(out_dir.join("report_categories.csv"), report.category_csv())?;
    let table = report.render_table();
    std::fs::write(out_dir.join("report.txt"), &table)?;
    print!("{table}");

    let mut inputs = BTreeMap::new();
    inputs.insert("kg".to_string(), path_string(&cfg.kg));
    inputs.insert("questions".to_string(), path_string(&cfg.questions));
    inputs.insert("methodology".to_string(), path_string(&cfg.methodology));
    inputs.insert("script".to_string(), path_string(&cfg.script));
    write_manifest(
        &out_dir,
        "eval",
        cfg,
        inputs,
        vec![
            "report.json".into(),
            "report.txt".into(),
            "report_categories.csv".into(),
            "traces.jsonl".into(),
            "llm_log.jsonl".into(),
        ],
    )?;
    Ok(())
}

fn cmd_cluster_report(cfg: &RunConfig) -> Result<()> {
    let history_path = require(&cfg.history, "history")?;
    let methodology_path = require(&cfg.methodology, "methodology")?;
    let store = HistoryStore::open(history_path)?;
    let clusters = load_methodologies(methodology_path)?;
    let csv_text = cluster_report_csv(&clusters, &store)?;
    match &cfg.out {
        Some(out_dir) => {
            std::fs::create_dir_all(out_dir)?;
            let path = out_dir.join("cluster_report.csv");
            std::fs::write(&path, &csv_text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv_text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli.config.as_deref();
    match &cli.command {
        Command::Ingest(opts) => cmd_ingest(&resolve(config_path, opts)?),
        Command::BuildHistory(opts) => cmd_build_history(&resolve(config_path, opts)?),
        Command::Induce(opts) => cmd_induce(&resolve(config_path, opts)?),
        Command::Ask {
            common,
            question,
            anchors,
        } => cmd_ask(&resolve(config_path, common)?, question, anchors),
        Command::Eval(opts) => cmd_eval(&resolve(config_path, opts)?),
        Command::ClusterReport(opts) => cmd_cluster_report(&resolve(config_path, opts)?),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}
