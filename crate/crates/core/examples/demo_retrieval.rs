//! Embed every role instance of a small corpus, store them as
//! demonstrations and retrieve the most similar one for each query,
//! excluding the query itself.
//!
//! ```bash
//! cargo run --example demo_retrieval
//! ```

use argqa::corpus::{build_instances, ContextMode};
use argqa::demo_store::{
    analogy_label, build_store, Retriever, SelfExclusion, DEFAULT_ANALOGY_THRESHOLD,
};
use argqa::embedding::{query_text, EmbeddingProvider, EmbeddingStore, QueryMode, Similarity};
use argqa::synthetic::{demo_ontology, synthetic_corpus, HashingEmbedder};
use argqa::SpecialTokens;

pub fn run_example() -> anyhow::Result<()> {
    let corpus = synthetic_corpus(30, 7);
    let instances = build_instances(&corpus, &demo_ontology(), ContextMode::Window(140))?.instances;
    let store = build_store(&instances, &SpecialTokens::default())?;

    let texts: Vec<String> = instances
        .iter()
        .map(|i| query_text(&i.question, &i.context, QueryMode::Joint))
        .collect();
    let vectors = HashingEmbedder { dim: 512 }.embed(&texts)?;
    let mut embeddings = EmbeddingStore::new();
    for (inst, v) in instances.iter().zip(vectors) {
        embeddings.insert(&inst.id, v)?;
    }

    let retriever = Retriever::new(&store, &embeddings, Similarity::Cosine)?;
    let queries: Vec<_> = instances
        .iter()
        .map(|i| (i.id.as_str(), embeddings.get(&i.id).unwrap()))
        .collect();
    let hits = retriever.top_many(&queries, 1, SelfExclusion::Auto)?;

    let mut same_role = 0;
    for (inst, top) in instances.iter().zip(&hits) {
        let best = &top[0];
        anyhow::ensure!(best.demo.id != inst.id);
        same_role += usize::from(best.demo.role == inst.role);
        let label = analogy_label(
            best.score,
            DEFAULT_ANALOGY_THRESHOLD,
            !best.demo.answers.is_empty(),
            !inst.gold_args.is_empty(),
        );
        if inst.id.starts_with("doc0000") {
            println!(
                "{:<28} -> {:<28} {:.3} label={label}",
                inst.id, best.demo.id, best.score
            );
        }
    }
    println!(
        "{same_role}/{} queries retrieved a demonstration for the same role",
        instances.len()
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
