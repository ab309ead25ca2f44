//! Score a handful of imperfect predictions: a boundary error that only head
//! match forgives, a right span under the wrong role, and a spurious extra.
//! Then split the same scores by retrieval similarity.
//!
//! ```bash
//! cargo run --example scoring_report
//! ```

use std::collections::HashMap;

use argqa::postprocess::ArgumentPrediction;
use argqa::scorer::{
    bucket_by_similarity, score_detailed, Assignment, Criterion, MatchKind, ScoreOptions,
};
use argqa::{RoleInstance, Span};

fn instance(role: &str, gold: &[&str], context: &str) -> RoleInstance {
    RoleInstance {
        id: format!("doc:0:{role}"),
        doc_id: "doc".into(),
        event_id: "doc:0".into(),
        context: context.into(),
        event_type: "Justice:Convict".into(),
        trigger: span(context, "convicted"),
        role: role.into(),
        question: format!("{role}?"),
        gold_args: gold.iter().map(|g| span(context, g)).collect(),
    }
}

fn span(context: &str, text: &str) -> Span {
    let start = context.find(text).expect("text occurs in context");
    Span::new(start, start + text.chars().count(), text)
}

fn pred(inst: &RoleInstance, role: &str, text: &str) -> ArgumentPrediction {
    ArgumentPrediction {
        instance_id: inst.id.clone(),
        role: role.into(),
        span: span(&inst.context, text),
        source_text: text.into(),
    }
}

pub fn run_example() -> anyhow::Result<()> {
    let ctx = "The federal court in Boston convicted former mayor Dara Vell of fraud on Tuesday.";
    let court = instance("JudgeCourt", &["The federal court"], ctx);
    let defendant = instance("Defendant", &["former mayor Dara Vell"], ctx);
    let place = instance("Place", &["Boston"], ctx);
    let crime = instance("Crime", &["fraud"], ctx);
    let gold = vec![
        court.clone(),
        defendant.clone(),
        place.clone(),
        crime.clone(),
    ];

    let preds = vec![
        pred(&court, "JudgeCourt", "The federal court"),
        // boundary error: same head word "Vell"
        pred(&defendant, "Defendant", "Dara Vell"),
        // right span, asked as the wrong role
        pred(&place, "Place", "fraud"),
        pred(&place, "Place", "Tuesday"),
    ];

    let detailed = score_detailed(&gold, &preds, &ScoreOptions::default())?;
    print!("{}", detailed.report.to_csv());
    let em = detailed.report.get(Criterion::ArgC, MatchKind::Exact);
    let hm = detailed.report.get(Criterion::ArgC, MatchKind::Head);
    anyhow::ensure!(hm.tp >= em.tp);

    let optimal = ScoreOptions {
        assignment: Assignment::Optimal,
        ..ScoreOptions::default()
    };
    let audit = score_detailed(&gold, &preds, &optimal)?;
    println!("greedy/optimal divergences: {}", audit.divergences.len());

    let similarity: HashMap<String, f64> = [
        (&court, 0.91),
        (&defendant, 0.74),
        (&place, 0.35),
        (&crime, 0.52),
    ]
    .into_iter()
    .map(|(i, s)| (i.id.clone(), s))
    .collect();
    let table = bucket_by_similarity(
        &gold,
        &preds,
        &similarity,
        &[0.0, 0.5, 0.7, 1.0],
        &ScoreOptions::default(),
    )?;
    for b in &table.buckets {
        let f1 = b.report.get(Criterion::ArgC, MatchKind::Exact).f1;
        println!(
            "[{:.1}, {:.1}) {} instance(s), Arg-C EM F1 {f1:.3}",
            b.lo, b.hi, b.population
        );
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
