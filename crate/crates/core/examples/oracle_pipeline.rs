//! The whole pipeline in memory: instances, retrieval, prompts, an oracle
//! generator that answers with the gold target, grounding and scoring. With
//! verbatim gold arguments every metric comes out at 1.0.
//!
//! ```bash
//! cargo run --example oracle_pipeline
//! ```

use argqa::corpus::{build_instances, ContextMode};
use argqa::demo_store::{build_store, Retriever, SelfExclusion};
use argqa::embedding::{query_text, EmbeddingProvider, EmbeddingStore, QueryMode, Similarity};
use argqa::generator::{generate, GenerationRequest, OracleBackend};
use argqa::postprocess::decode_all;
use argqa::prompt::{build_prompt, PromptOptions};
use argqa::scorer::{score, Criterion, MatchKind};
use argqa::synthetic::{demo_ontology, synthetic_corpus, HashingEmbedder};

pub fn run_example() -> anyhow::Result<()> {
    let options = PromptOptions::default();
    let tokens = &options.tokens;
    let corpus = synthetic_corpus(50, 42);
    let instances = build_instances(&corpus, &demo_ontology(), ContextMode::Window(140))?.instances;

    let store = build_store(&instances, tokens)?;
    let texts: Vec<String> = instances
        .iter()
        .map(|i| query_text(&i.question, &i.context, QueryMode::Joint))
        .collect();
    let mut embeddings = EmbeddingStore::new();
    for (inst, v) in instances
        .iter()
        .zip(HashingEmbedder::default().embed(&texts)?)
    {
        embeddings.insert(&inst.id, v)?;
    }
    let retriever = Retriever::new(&store, &embeddings, Similarity::Cosine)?;
    let queries: Vec<_> = instances
        .iter()
        .map(|i| (i.id.as_str(), embeddings.get(&i.id).unwrap()))
        .collect();
    let hits = retriever.top_many(&queries, 1, SelfExclusion::Auto)?;

    let prompts = instances
        .iter()
        .zip(&hits)
        .map(|(inst, top)| build_prompt(inst, top.first(), &options))
        .collect::<Result<Vec<_>, _>>()?;
    let requests: Vec<GenerationRequest> = prompts.iter().map(GenerationRequest::from).collect();
    let outputs = generate(&requests, &OracleBackend::new(&instances, tokens)?)?;
    let predictions = decode_all(&outputs, &instances, tokens)?;
    let report = score(&instances, &predictions)?;

    print!("{}", report.to_csv());
    println!(
        "{} events, {} role questions, {} grounded arguments",
        report.n_events,
        report.n_instances,
        predictions.len()
    );
    anyhow::ensure!(report.get(Criterion::ArgC, MatchKind::Exact).f1 == 1.0);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
