//! Draw few-shot subsets from a skewed population with each strategy and
//! show how the clustering strategies spread the budget over clusters.
//!
//! ```bash
//! cargo run --release --example fewshot_sampling
//! ```

use std::collections::HashMap;

use argqa::sampler::{sample, SampleRequest, SampleSources, Strategy, UncertaintyScores};
use argqa::synthetic::synthetic_population;

pub fn run_example() -> anyhow::Result<()> {
    let pop = synthetic_population(4000, 33, 3);
    let n = 200;

    // stand-in model uncertainty: distance of the trigger vector from the origin
    let uncertainty = UncertaintyScores(
        pop.ids
            .iter()
            .map(|id| (id.clone(), pop.embeddings.trigger(id).unwrap().norm()))
            .collect(),
    );
    let sources = SampleSources {
        embeddings: Some(&pop.embeddings),
        uncertainty: Some(&uncertainty),
    };
    let type_of: HashMap<&str, &str> = pop
        .ids
        .iter()
        .map(String::as_str)
        .zip(pop.event_types.iter().map(String::as_str))
        .collect();

    for strategy in [
        Strategy::Random,
        Strategy::Context,
        Strategy::JointEnc,
        Strategy::Uncertainty,
    ] {
        let plan = sample(
            &pop.ids,
            &SampleRequest::new(strategy, n, 7).with_k(33),
            sources,
        )?;
        let mut types: Vec<&str> = plan.ids.iter().map(|id| type_of[id.as_str()]).collect();
        types.sort();
        types.dedup();
        println!(
            "{strategy:<12} {} ids covering {} of 33 types",
            plan.ids.len(),
            types.len()
        );
        if strategy == Strategy::JointEnc {
            let allocs: Vec<String> = plan
                .clusters
                .iter()
                .take(8)
                .map(|c| format!("{}/{}", c.alloc, c.size))
                .collect();
            println!(
                "             first clusters (alloc/size): {}",
                allocs.join(" ")
            );
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
