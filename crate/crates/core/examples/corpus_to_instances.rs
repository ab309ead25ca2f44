//! Load a corpus and ontology, cut a context window around each trigger and
//! explode every event into one question per ontology role.
//!
//! ```bash
//! cargo run --example corpus_to_instances
//! ```

use argqa::corpus::{self, ContextMode};

pub fn run_example() -> anyhow::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let corpus = corpus::load_corpus(format!("{dir}/nomination.jsonl"))?;
    let ontology = corpus::load_ontology(format!("{dir}/ontology.jsonl"))?;

    let stats = corpus::corpus_stats(&corpus);
    println!(
        "{} doc(s), {} event(s), {} sentence(s)",
        stats.n_docs, stats.n_events, stats.n_sentences
    );

    for mode in [
        ContextMode::Window(60),
        ContextMode::Sentence,
        ContextMode::Document,
    ] {
        let set = corpus::build_instances(&corpus, &ontology, mode)?;
        println!(
            "\n{mode:?}: {} instances, {} argument(s) lost",
            set.instances.len(),
            set.dropped_args
        );
        for inst in &set.instances {
            println!(
                "  {:<24} {:<30} {:?}",
                inst.id,
                inst.question,
                inst.gold_texts()
            );
        }
        if let Some(first) = set.instances.first() {
            println!("  context: {:?}", first.context);
        }
    }

    // the role without a filler is still a question, with an empty answer
    let set = corpus::build_instances(&corpus, &ontology, ContextMode::Document)?;
    let empty = set
        .instances
        .iter()
        .filter(|i| i.gold_args.is_empty())
        .count();
    anyhow::ensure!(set.instances.len() == 3 && empty == 1);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
