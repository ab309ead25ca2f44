//! Compare the event-type distribution of sampled subsets with the full
//! population: one aggregate Hellinger distance per strategy and size, and a
//! per-type table of contributions.
//!
//! ```bash
//! cargo run --release --example distance_report
//! ```

use std::collections::HashMap;

use argqa::analysis::{
    curve_csv, hellinger_distance, type_distribution, CurvePoint, DistanceTable,
};
use argqa::sampler::{sample, SampleRequest, SampleSources, Strategy};
use argqa::synthetic::synthetic_population;

pub fn run_example() -> anyhow::Result<()> {
    let pop = synthetic_population(4000, 33, 11);
    let truth = type_distribution(&pop.event_types)?;
    let type_of: HashMap<&str, &str> = pop
        .ids
        .iter()
        .map(String::as_str)
        .zip(pop.event_types.iter().map(String::as_str))
        .collect();
    let sources = SampleSources {
        embeddings: Some(&pop.embeddings),
        ..Default::default()
    };

    let mut curve = Vec::new();
    let mut at_five_percent = Vec::new();
    for pct in [5, 10, 15, 20, 25] {
        let n = pop.ids.len() * pct / 100;
        for strategy in [Strategy::Random, Strategy::Context, Strategy::JointEnc] {
            let plan = sample(
                &pop.ids,
                &SampleRequest::new(strategy, n, 1).with_k(33),
                sources,
            )?;
            let dist = type_distribution(plan.ids.iter().map(|id| type_of[id.as_str()]))?;
            curve.push(CurvePoint {
                sample_size: n,
                strategy: strategy.to_string(),
                distance: hellinger_distance(&dist, &truth)?,
            });
            if pct == 5 {
                at_five_percent.push((strategy.to_string(), dist));
            }
        }
    }
    print!("{}", curve_csv(&curve));

    let table = DistanceTable::build(&truth, &at_five_percent)?;
    let csv = table.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    println!("\nper-type contributions at 5% (first rows and totals):");
    for line in lines
        .iter()
        .take(4)
        .chain(lines.iter().skip(lines.len() - 2))
    {
        println!("{line}");
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
