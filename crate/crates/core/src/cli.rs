//! The `argqa` command line.
//!
//! Every subcommand reads its inputs, writes its outputs and prints a single
//! summary line. Settings resolve as: flag, then environment
//! (`ARGQA_EMBED_ENDPOINT`, `ARGQA_GENERATE_ENDPOINT`), then the `--config`
//! TOML file, then built-in defaults. `--show-config` prints the resolved
//! configuration.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    curve_csv, hellinger_distance, type_distribution, CurvePoint, DistanceTable,
};
use crate::corpus::{self, ContextMode, Corpus, Ontology, RoleInstance};
use crate::demo_store::{self, RetrievalTrace, Retriever, SelfExclusion};
use crate::embedding::{self, EmbeddingProvider, EmbeddingRecord, QueryMode, Similarity};
use crate::generator::{
    self, Backend, GenerationRequest, OracleBackend, RemoteBackend, ReplayBackend,
};
use crate::postprocess;
use crate::prompt::{self, PromptOptions, SpecialTokens};
use crate::remote::RemoteConfig;
use crate::sampler::{self, AllocationMode, SampleRequest, SampleSources, Strategy};
use crate::scorer::{self, Assignment, ScoreOptions};
use crate::synthetic::HashingEmbedder;

pub const ENV_EMBED_ENDPOINT: &str = "ARGQA_EMBED_ENDPOINT";
pub const ENV_GENERATE_ENDPOINT: &str = "ARGQA_GENERATE_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ContextChoice {
    Window,
    Sentence,
    Document,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Oracle,
    Replay,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderChoice {
    Hashing,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub instances: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub trigger_embeddings: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub threshold: f64,
    pub window_chars: usize,
    pub context: ContextChoice,
    pub top_k: usize,
    pub similarity: Similarity,
    pub k: Option<usize>,
    pub bucket_edges: Vec<f64>,
    pub backend: BackendChoice,
    pub embedder: EmbedderChoice,
    pub hashing_dim: usize,
    pub strategy: Strategy,
    pub allocation: AllocationMode,
    pub max_iters: usize,
    pub paths: Paths,
    pub embed_remote: RemoteConfig,
    pub generate_remote: RemoteConfig,
    pub tokens: SpecialTokens,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            threshold: demo_store::DEFAULT_ANALOGY_THRESHOLD,
            window_chars: corpus::DEFAULT_WINDOW_CHARS,
            context: ContextChoice::Window,
            top_k: 1,
            similarity: Similarity::Cosine,
            k: None,
            bucket_edges: vec![0.0, 0.5, 0.7, 0.9, 1.0],
            backend: BackendChoice::Oracle,
            embedder: EmbedderChoice::Hashing,
            hashing_dim: HashingEmbedder::default().dim,
            strategy: Strategy::JointEnc,
            allocation: AllocationMode::Proportional,
            max_iters: sampler::DEFAULT_MAX_ITERS,
            paths: Paths::default(),
            embed_remote: RemoteConfig::default(),
            generate_remote: RemoteConfig::default(),
            tokens: SpecialTokens::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            (-1.0..=1.0).contains(&self.threshold),
            "threshold {} is outside [-1, 1]",
            self.threshold
        );
        self.tokens.validate()?;
        Ok(())
    }

    fn context_mode(&self) -> ContextMode {
        match self.context {
            ContextChoice::Window => ContextMode::Window(self.window_chars),
            ContextChoice::Sentence => ContextMode::Sentence,
            ContextChoice::Document => ContextMode::Document,
        }
    }

    fn apply_env(&mut self) {
        if let Ok(e) = std::env::var(ENV_EMBED_ENDPOINT) {
            self.embed_remote.endpoint = e;
        }
        if let Ok(e) = std::env::var(ENV_GENERATE_ENDPOINT) {
            self.generate_remote.endpoint = e;
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "argqa",
    version,
    about = "Retrieval-augmented QA for event argument extraction"
)]
pub struct Cli {
    /// TOML file with pipeline settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub show_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus statistics.
    Stats(StatsArgs),
    /// Cut contexts, explode role instances and write the demonstration store.
    BuildStore(BuildStoreArgs),
    /// Top-k demonstration per instance.
    Retrieve(RetrieveArgs),
    /// Input/target sequences per instance.
    BuildPrompts(BuildPromptsArgs),
    /// Run prompts through a generation backend.
    Generate(GenerateArgs),
    /// Ground generated answers onto context offsets.
    Postprocess(PostprocessArgs),
    /// Arg-Id / Arg-C precision, recall and F1 under exact and head match.
    Score(ScoreArgs),
    /// Select a few-shot subset of events.
    Sample(SampleArgs),
    /// Event-type distribution distances of sampled subsets.
    AnalyzeDistance(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Write the statistics as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ContextArgs {
    #[arg(long, value_enum)]
    context: Option<ContextChoice>,
    #[arg(long)]
    window_chars: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long, value_enum)]
    embedder: Option<EmbedderChoice>,
    #[arg(long)]
    embed_endpoint: Option<String>,
}

#[derive(Debug, Args)]
pub struct BuildStoreArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[command(flatten)]
    context: ContextArgs,
    /// Demonstration store output.
    #[arg(long)]
    out: PathBuf,
    /// Role instances (the gold file for scoring).
    #[arg(long)]
    instances_out: Option<PathBuf>,
    /// Query embeddings, keyed by instance id.
    #[arg(long)]
    embeddings_out: Option<PathBuf>,
    /// Context embeddings, keyed by event id.
    #[arg(long)]
    event_embeddings_out: Option<PathBuf>,
    /// Trigger embeddings, keyed by event id.
    #[arg(long)]
    trigger_embeddings_out: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Demonstration embeddings.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Query embeddings when they differ from the demonstration embeddings.
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    exclude_self: ExcludeChoice,
    #[arg(long, value_enum)]
    similarity: Option<SimilarityChoice>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExcludeChoice {
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimilarityChoice {
    Cosine,
    Dot,
}

#[derive(Debug, Args)]
pub struct BuildPromptsArgs {
    #[arg(long, conflicts_with = "corpus")]
    instances: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[command(flatten)]
    context: ContextArgs,
    #[arg(long)]
    store: Option<PathBuf>,
    /// Retrieval trace; without it prompts carry no demonstration.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_input_chars: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    prompts: PathBuf,
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Gold instances for the oracle backend.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Recorded outputs for the replay backend.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    #[arg(long)]
    generations: PathBuf,
    #[arg(long)]
    instances: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Gold role instances.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    pred: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "greedy")]
    assignment: AssignmentChoice,
    /// Retrieval trace supplying per-instance similarity for bucketing.
    #[arg(long, requires = "buckets_out")]
    trace: Option<PathBuf>,
    /// Comma-separated bucket edges.
    #[arg(long, value_delimiter = ',')]
    buckets: Option<Vec<f64>>,
    #[arg(long, requires = "trace")]
    buckets_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AssignmentChoice {
    Greedy,
    Optimal,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Population: every event of the corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Its event-type count is the default cluster count.
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    #[arg(long, conflicts_with = "fraction")]
    n: Option<usize>,
    /// Sample size as a fraction of the population.
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    trigger_embeddings: Option<PathBuf>,
    #[arg(long)]
    uncertainty: Option<PathBuf>,
    #[arg(long, value_enum)]
    allocation: Option<AllocationChoice>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AllocationChoice {
    Proportional,
    Equal,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Reference population.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Sample plans to compare.
    #[arg(long, required = true, num_args = 1..)]
    plans: Vec<PathBuf>,
    /// Per-type distance table.
    #[arg(long)]
    out: PathBuf,
    /// `sample_size,strategy,distance` rows.
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

/// Runs the command line and maps the outcome to a process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match execute(cli) {
        Ok(summary) => {
            // a closed pipe (`| head`) is not an error
            let _ = writeln!(std::io::stdout(), "{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Runs a parsed command line, returning its summary line.
pub fn execute(cli: Cli) -> Result<String> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    config.apply_env();
    if cli.show_config {
        return Ok(toml::to_string(&config)?.trim_end().to_string());
    }
    let Some(command) = cli.command else {
        bail!("no subcommand given; see --help");
    };
    config.validate()?;
    match command {
        Command::Stats(a) => stats(&config, a),
        Command::BuildStore(a) => build_store(&config, a),
        Command::Retrieve(a) => retrieve(&config, a),
        Command::BuildPrompts(a) => build_prompts(&config, a),
        Command::Generate(a) => generate(&config, a),
        Command::Postprocess(a) => postprocess(&config, a),
        Command::Score(a) => score(&config, a),
        Command::Sample(a) => sample(&config, a),
        Command::AnalyzeDistance(a) => analyze_distance(&config, a),
    }
}

fn need<'a>(
    flag: &'a Option<PathBuf>,
    configured: &'a Option<PathBuf>,
    name: &str,
) -> Result<&'a Path> {
    flag.as_deref().or(configured.as_deref()).with_context(|| {
        format!(
            "--{name} is required (or set paths.{} in the config)",
            name.replace('-', "_")
        )
    })
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    corpus::load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn read_ontology(path: &Path) -> Result<Ontology> {
    corpus::load_ontology(path).with_context(|| format!("loading ontology {}", path.display()))
}

fn read_instances(path: &Path) -> Result<Vec<RoleInstance>> {
    corpus::load_instances(path).with_context(|| format!("loading instances {}", path.display()))
}

fn context_mode(config: &PipelineConfig, args: &ContextArgs) -> ContextMode {
    let mut c = config.clone();
    if let Some(ctx) = args.context {
        c.context = ctx;
    }
    if let Some(w) = args.window_chars {
        c.window_chars = w;
    }
    c.context_mode()
}

fn stats(config: &PipelineConfig, a: StatsArgs) -> Result<String> {
    let corpus = read_corpus(need(&a.corpus, &config.paths.corpus, "corpus")?)?;
    let mut s = corpus::corpus_stats(&corpus);
    if let Some(p) = a.ontology.as_deref().or(config.paths.ontology.as_deref()) {
        let o = read_ontology(p)?;
        s.n_event_types = o.len();
        s.n_roles = o
            .event_types()
            .flat_map(|t| {
                o.get(t)
                    .into_iter()
                    .flat_map(|d| d.roles.iter().map(|r| r.name.clone()))
            })
            .collect::<std::collections::BTreeSet<_>>()
            .len();
    }
    if let Some(out) = &a.out {
        write_json(out, &s)?;
    }
    Ok(format!(
        "{} docs, {} sentences, {} events ({:.2}/doc), {} event types, {} roles",
        s.n_docs, s.n_sentences, s.n_events, s.avg_events_per_doc, s.n_event_types, s.n_roles
    ))
}

fn embedder(config: &PipelineConfig, a: &EmbedArgs) -> Box<dyn EmbeddingProvider> {
    let mut remote = config.embed_remote.clone();
    if let Some(e) = &a.embed_endpoint {
        remote.endpoint = e.clone();
    }
    match a.embedder.unwrap_or(config.embedder) {
        EmbedderChoice::Hashing => Box::new(HashingEmbedder {
            dim: config.hashing_dim,
        }),
        EmbedderChoice::Remote => Box::new(embedding::RemoteEmbedder::new(remote)),
    }
}

fn embed_records(
    provider: &dyn EmbeddingProvider,
    items: Vec<(String, String)>,
) -> Result<Vec<EmbeddingRecord>> {
    let (ids, texts): (Vec<String>, Vec<String>) = items.into_iter().unzip();
    let vectors = provider.embed(&texts)?;
    Ok(ids
        .into_iter()
        .zip(vectors)
        .map(|(id, vector)| EmbeddingRecord { id, vector })
        .collect())
}

fn build_store(config: &PipelineConfig, a: BuildStoreArgs) -> Result<String> {
    let corpus = read_corpus(need(&a.corpus, &config.paths.corpus, "corpus")?)?;
    let ontology = read_ontology(need(&a.ontology, &config.paths.ontology, "ontology")?)?;
    let mode = context_mode(config, &a.context);
    let set = corpus::build_instances(&corpus, &ontology, mode)?;
    let store = demo_store::build_store(&set.instances, &config.tokens)?;
    demo_store::write_store(&a.out, &store)?;
    if let Some(p) = &a.instances_out {
        corpus::write_instances(p, &set.instances)?;
    }
    let wants_embeddings = a.embeddings_out.is_some()
        || a.event_embeddings_out.is_some()
        || a.trigger_embeddings_out.is_some();
    if wants_embeddings {
        let provider = embedder(config, &a.embed);
        if let Some(p) = &a.embeddings_out {
            let items = set
                .instances
                .iter()
                .map(|i| {
                    (
                        i.id.clone(),
                        embedding::query_text(&i.question, &i.context, QueryMode::Joint),
                    )
                })
                .collect();
            embedding::write_embeddings(p, &embed_records(provider.as_ref(), items)?)?;
        }
        let events: Vec<(String, String, String)> = corpus
            .events()
            .map(|(id, doc, ev)| {
                let w = corpus::cut_context(doc, ev, mode);
                (id, w.context, ev.trigger.text.clone())
            })
            .collect();
        if let Some(p) = &a.event_embeddings_out {
            let items = events
                .iter()
                .map(|(id, c, _)| (id.clone(), c.clone()))
                .collect();
            embedding::write_embeddings(p, &embed_records(provider.as_ref(), items)?)?;
        }
        if let Some(p) = &a.trigger_embeddings_out {
            let items = events
                .iter()
                .map(|(id, _, t)| (id.clone(), t.clone()))
                .collect();
            embedding::write_embeddings(p, &embed_records(provider.as_ref(), items)?)?;
        }
    }
    Ok(format!(
        "{} demonstrations from {} events ({} arguments outside their context)",
        store.len(),
        corpus.n_events(),
        set.dropped_args
    ))
}

fn retrieve(config: &PipelineConfig, a: RetrieveArgs) -> Result<String> {
    let store = demo_store::load_store(
        need(&a.store, &config.paths.store, "store")?,
        &config.tokens,
    )?;
    let instances = read_instances(need(&a.instances, &config.paths.instances, "instances")?)?;
    let embeddings =
        embedding::load_embeddings(need(&a.embeddings, &config.paths.embeddings, "embeddings")?)?;
    let queries = match &a.query_embeddings {
        Some(p) => embedding::load_embeddings(p)?,
        None => embeddings.clone(),
    };
    let similarity = match a.similarity {
        Some(SimilarityChoice::Cosine) => Similarity::Cosine,
        Some(SimilarityChoice::Dot) => Similarity::Dot,
        None => config.similarity,
    };
    let exclude = match a.exclude_self {
        ExcludeChoice::Auto => SelfExclusion::Auto,
        ExcludeChoice::Always => SelfExclusion::Always,
        ExcludeChoice::Never => SelfExclusion::Never,
    };
    let threshold = a.threshold.unwrap_or(config.threshold);
    ensure!(
        (-1.0..=1.0).contains(&threshold),
        "threshold {threshold} is outside [-1, 1]"
    );
    let k = a.k.unwrap_or(config.top_k);

    let retriever = Retriever::new(&store, &embeddings, similarity)?;
    let query_vecs: Vec<(&str, &embedding::EmbeddingVector)> = instances
        .iter()
        .map(|i| Ok((i.id.as_str(), queries.require(&i.id)?)))
        .collect::<Result<_, embedding::EmbeddingError>>()?;
    let hits = retriever.top_many(&query_vecs, k, exclude)?;

    let mut trace = Vec::new();
    let mut labelled = 0;
    for (inst, results) in instances.iter().zip(&hits) {
        if results.is_empty() {
            trace.push(RetrievalTrace {
                query_id: inst.id.clone(),
                demo_id: None,
                score: None,
                label: 0,
            });
        }
        for r in results {
            let label = demo_store::analogy_label(
                r.score,
                threshold,
                !r.demo.answers.is_empty(),
                !inst.gold_args.is_empty(),
            );
            labelled += usize::from(label);
            trace.push(RetrievalTrace {
                query_id: inst.id.clone(),
                demo_id: Some(r.demo.id.clone()),
                score: Some(r.score),
                label,
            });
        }
    }
    demo_store::write_trace(&a.out, &trace)?;
    Ok(format!(
        "retrieved top-{k} for {} queries; {labelled} hits labelled analogous (threshold {threshold})",
        instances.len()
    ))
}

fn build_prompts(config: &PipelineConfig, a: BuildPromptsArgs) -> Result<String> {
    let instances = match (&a.instances, &a.corpus) {
        (Some(p), _) => read_instances(p)?,
        (None, Some(c)) => {
            let ontology = read_ontology(need(&a.ontology, &config.paths.ontology, "ontology")?)?;
            corpus::build_instances(
                &read_corpus(c)?,
                &ontology,
                context_mode(config, &a.context),
            )?
            .instances
        }
        (None, None) => read_instances(need(&None, &config.paths.instances, "instances")?)?,
    };
    let options = PromptOptions {
        tokens: config.tokens.clone(),
        threshold: a.threshold.unwrap_or(config.threshold),
        max_input_chars: a.max_input_chars,
    };
    ensure!(
        (-1.0..=1.0).contains(&options.threshold),
        "threshold {} is outside [-1, 1]",
        options.threshold
    );

    let mut retrieved: HashMap<String, demo_store::RetrievalResult> = HashMap::new();
    if let Some(trace_path) = &a.trace {
        let store = demo_store::load_store(
            need(&a.store, &config.paths.store, "store")?,
            &config.tokens,
        )?;
        for t in demo_store::load_trace(trace_path)? {
            if retrieved.contains_key(&t.query_id) {
                continue;
            }
            if let (Some(id), Some(score)) = (t.demo_id, t.score) {
                let demo = store.get(&id).with_context(|| {
                    format!("trace names demonstration {id:?} missing from the store")
                })?;
                retrieved.insert(
                    t.query_id,
                    demo_store::RetrievalResult {
                        demo: demo.clone(),
                        score,
                    },
                );
            }
        }
    }
    let prompts = instances
        .iter()
        .map(|i| prompt::build_prompt(i, retrieved.get(&i.id), &options))
        .collect::<Result<Vec<_>, _>>()?;
    prompt::write_prompts(&a.out, &prompts)?;
    let with_demo = prompts.iter().filter(|p| p.demo_id.is_some()).count();
    let analogous = prompts.iter().filter(|p| p.analogy_label == 1).count();
    Ok(format!(
        "{} prompts ({with_demo} with a demonstration, {analogous} analogous)",
        prompts.len()
    ))
}

fn generate(config: &PipelineConfig, a: GenerateArgs) -> Result<String> {
    let prompts = prompt::load_prompts(&a.prompts)?;
    let requests: Vec<GenerationRequest> = prompts.iter().map(GenerationRequest::from).collect();
    let backend: Box<dyn Backend> = match a.backend.unwrap_or(config.backend) {
        BackendChoice::Oracle => {
            let instances =
                read_instances(need(&a.instances, &config.paths.instances, "instances")?)?;
            Box::new(OracleBackend::new(&instances, &config.tokens)?)
        }
        BackendChoice::Replay => Box::new(ReplayBackend::load(
            a.replay.as_deref().context("--replay is required")?,
        )?),
        BackendChoice::Remote => {
            let mut remote = config.generate_remote.clone();
            if let Some(e) = a.endpoint {
                remote.endpoint = e;
            }
            ensure!(
                !remote.endpoint.is_empty(),
                "no generation endpoint: pass --endpoint or set {ENV_GENERATE_ENDPOINT}"
            );
            Box::new(RemoteBackend::new(remote))
        }
    };
    let results = generator::generate(&requests, backend.as_ref())?;
    generator::write_generations(&a.out, &results)?;
    Ok(format!(
        "{} outputs from the {} backend",
        results.len(),
        backend.tag()
    ))
}

fn postprocess(config: &PipelineConfig, a: PostprocessArgs) -> Result<String> {
    let results = generator::load_generations(&a.generations)?;
    let instances = read_instances(need(&a.instances, &config.paths.instances, "instances")?)?;
    let preds = postprocess::decode_all(&results, &instances, &config.tokens)?;
    let out = need(&a.out, &config.paths.predictions, "out")?;
    postprocess::write_predictions(out, &preds)?;
    Ok(format!(
        "{} grounded arguments from {} generations",
        preds.len(),
        results.len()
    ))
}

fn score(config: &PipelineConfig, a: ScoreArgs) -> Result<String> {
    let gold = read_instances(need(&a.gold, &config.paths.instances, "gold")?)?;
    let preds = postprocess::load_predictions(need(&a.pred, &config.paths.predictions, "pred")?)?;
    let options = ScoreOptions {
        assignment: match a.assignment {
            AssignmentChoice::Greedy => Assignment::Greedy,
            AssignmentChoice::Optimal => Assignment::Optimal,
        },
        ..ScoreOptions::default()
    };
    let detailed = scorer::score_detailed(&gold, &preds, &options)?;
    let report = &detailed.report;
    let out = match (&a.out, &config.paths.reports) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => Some(dir.join("report.json")),
        (None, None) => None,
    };
    if let Some(p) = &out {
        write_json(p, report)?;
    }
    if let Some(p) = &a.csv {
        write_text(p, &report.to_csv())?;
    }
    if let (Some(trace), Some(bout)) = (&a.trace, &a.buckets_out) {
        let scores: HashMap<String, f64> = demo_store::load_trace(trace)?
            .into_iter()
            .filter_map(|t| t.score.map(|s| (t.query_id, s)))
            .collect();
        let edges = a
            .buckets
            .clone()
            .unwrap_or_else(|| config.bucket_edges.clone());
        let table = scorer::bucket_by_similarity(&gold, &preds, &scores, &edges, &options)?;
        write_text(bout, &table.to_csv())?;
    }
    let cell = |c, m| report.get(c, m).f1;
    use scorer::{Criterion::*, MatchKind::*};
    Ok(format!(
        "F1 Arg-Id EM {:.4} HM {:.4} | Arg-C EM {:.4} HM {:.4} over {} instances ({} assignment divergences)",
        cell(ArgId, Exact),
        cell(ArgId, Head),
        cell(ArgC, Exact),
        cell(ArgC, Head),
        report.n_instances,
        detailed.divergences.len()
    ))
}

fn sample(config: &PipelineConfig, a: SampleArgs) -> Result<String> {
    let corpus = read_corpus(need(&a.corpus, &config.paths.corpus, "corpus")?)?;
    let population: Vec<String> = corpus.events().map(|(id, _, _)| id).collect();
    let strategy = a.strategy.unwrap_or(config.strategy);
    let n = match (a.n, a.fraction) {
        (Some(n), _) => n,
        (None, Some(f)) => {
            ensure!((0.0..=1.0).contains(&f), "--fraction must lie in [0, 1]");
            (f * population.len() as f64).round() as usize
        }
        (None, None) => bail!("one of --n or --fraction is required"),
    };
    let k = match (
        a.k.or(config.k),
        a.ontology.as_deref().or(config.paths.ontology.as_deref()),
    ) {
        (Some(k), _) => k,
        (None, Some(o)) => read_ontology(o)?.len(),
        (None, None) => {
            let types: std::collections::BTreeSet<&str> = corpus
                .events()
                .map(|(_, _, e)| e.event_type.as_str())
                .collect();
            types.len()
        }
    };
    let mut store = None;
    if matches!(strategy, Strategy::Context | Strategy::JointEnc) {
        let mut s = embedding::load_embeddings(need(
            &a.embeddings,
            &config.paths.embeddings,
            "embeddings",
        )?)?;
        if strategy == Strategy::JointEnc {
            let trig = need(
                &a.trigger_embeddings,
                &config.paths.trigger_embeddings,
                "trigger-embeddings",
            )?;
            embedding::load_trigger_embeddings(&mut s, trig)?;
        }
        store = Some(s);
    }
    let uncertainty = match (&a.uncertainty, strategy) {
        (Some(p), _) => Some(sampler::load_uncertainty(p)?),
        (None, Strategy::Uncertainty) => {
            bail!("--uncertainty is required for the uncertainty strategy")
        }
        _ => None,
    };
    let request = SampleRequest {
        strategy,
        n,
        seed: a.seed.unwrap_or(config.seed),
        k: Some(k),
        allocation: match a.allocation {
            Some(AllocationChoice::Proportional) => AllocationMode::Proportional,
            Some(AllocationChoice::Equal) => AllocationMode::Equal,
            None => config.allocation,
        },
        max_iters: config.max_iters,
    };
    let plan = sampler::sample(
        &population,
        &request,
        SampleSources {
            embeddings: store.as_ref(),
            uncertainty: uncertainty.as_ref(),
        },
    )?;
    sampler::write_plan(&a.out, &plan)?;
    let clusters = if plan.clusters.is_empty() {
        String::new()
    } else {
        format!(" across {} clusters", plan.clusters.len())
    };
    Ok(format!(
        "{} sampled {} of {} events{clusters} (seed {})",
        plan.strategy,
        plan.ids.len(),
        population.len(),
        plan.seed
    ))
}

fn analyze_distance(config: &PipelineConfig, a: AnalyzeArgs) -> Result<String> {
    let corpus = read_corpus(need(&a.corpus, &config.paths.corpus, "corpus")?)?;
    let types: BTreeMap<String, String> = corpus
        .events()
        .map(|(id, _, e)| (id, e.event_type.clone()))
        .collect();
    let reference = type_distribution(types.values())?;

    let plans = a
        .plans
        .iter()
        .map(|p| sampler::load_plan(p).with_context(|| format!("loading plan {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut label_counts: HashMap<String, usize> = HashMap::new();
    for p in &plans {
        *label_counts.entry(p.strategy.to_string()).or_default() += 1;
    }
    let mut samples = Vec::new();
    let mut curve = Vec::new();
    for plan in &plans {
        let sampled = plan
            .ids
            .iter()
            .map(|id| {
                types
                    .get(id)
                    .with_context(|| format!("plan id {id:?} is not an event of the corpus"))
            })
            .collect::<Result<Vec<_>>>()?;
        let dist = type_distribution(sampled)?;
        let label = if label_counts[&plan.strategy.to_string()] > 1 {
            format!("{}_n{}_s{}", plan.strategy, plan.n, plan.seed)
        } else {
            plan.strategy.to_string()
        };
        curve.push(CurvePoint {
            sample_size: plan.ids.len(),
            strategy: plan.strategy.to_string(),
            distance: hellinger_distance(&dist, &reference)?,
        });
        samples.push((label, dist));
    }
    let table = DistanceTable::build(&reference, &samples)?;
    write_text(&a.out, &table.to_csv())?;
    if let Some(p) = &a.curve_out {
        write_text(p, &curve_csv(&curve))?;
    }
    let summary: Vec<String> = samples
        .iter()
        .zip(&curve)
        .map(|((label, _), c)| format!("{label} {:.4}", c.distance))
        .collect();
    Ok(format!(
        "Hellinger distance to the corpus: {}",
        summary.join(", ")
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let c = PipelineConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<PipelineConfig>(&text).unwrap(), c);
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c: PipelineConfig =
            toml::from_str("threshold = 0.5\n[paths]\ncorpus = \"c.jsonl\"\n").unwrap();
        assert_eq!(c.threshold, 0.5);
        assert_eq!(c.window_chars, 140);
        assert_eq!(c.paths.corpus, Some(PathBuf::from("c.jsonl")));
        assert!(toml::from_str::<PipelineConfig>("thresold = 0.5").is_err());
    }

    #[test]
    fn threshold_is_validated() {
        let c = PipelineConfig {
            threshold: 1.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "argqa",
            "sample",
            "--strategy",
            "jointenc",
            "--n",
            "5",
            "--out",
            "p.json",
        ])
        .unwrap();
        assert!(matches!(cli.command, Some(Command::Sample(_))));
        assert!(Cli::try_parse_from(["argqa", "sample", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["argqa", "score", "--buckets-out", "b.csv"]).is_err());
    }
}
