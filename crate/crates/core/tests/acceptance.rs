//! Acceptance checks, one PASS/FAIL line each. Exits nonzero if any fails.

use std::collections::{BTreeMap, HashMap};
use std::process::Command;
use std::time::Instant;

use argqa::analysis::{hellinger_distance, type_distribution, TypeDistribution};
use argqa::corpus::{build_instances, ContextMode};
use argqa::demo_store::{
    build_store, retrieve_top, DemoStore, Demonstration, Retriever, SelfExclusion,
};
use argqa::embedding::{
    query_text, EmbeddingProvider, EmbeddingStore, EmbeddingVector, QueryMode, Similarity,
};
use argqa::generator::{generate, GenerationRequest, OracleBackend};
use argqa::postprocess::{decode_all, split_answers, ArgumentPrediction};
use argqa::prompt::{
    build_input, build_prompt, build_target, build_target_texts, mark_trigger,
    render_demonstration, PromptOptions,
};
use argqa::sampler::{allocate_proportional, sample_sizes, SampleRequest, SampleSources, Strategy};
use argqa::scorer::{
    bucket_by_similarity, score_detailed, Assignment, Criterion, MatchKind, MetricsReport,
    ScoreOptions, CELLS,
};
use argqa::synthetic::{demo_ontology, synthetic_corpus, synthetic_population, HashingEmbedder};
use argqa::{RoleInstance, Span, SpecialTokens};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn oracle_round_trip() -> Outcome {
    let started = Instant::now();
    let options = PromptOptions::default();
    let tokens = &options.tokens;
    let corpus = synthetic_corpus(50, 2024);
    let instances = build_instances(&corpus, &demo_ontology(), ContextMode::Window(140))
        .map_err(|e| e.to_string())?
        .instances;
    let store = build_store(&instances, tokens).map_err(|e| e.to_string())?;
    let texts: Vec<String> = instances
        .iter()
        .map(|i| query_text(&i.question, &i.context, QueryMode::Joint))
        .collect();
    let mut embeddings = EmbeddingStore::new();
    for (inst, v) in instances
        .iter()
        .zip(HashingEmbedder::default().embed(&texts).unwrap())
    {
        embeddings.insert(&inst.id, v).unwrap();
    }
    let retriever = Retriever::new(&store, &embeddings, Similarity::Cosine).unwrap();
    let queries: Vec<_> = instances
        .iter()
        .map(|i| (i.id.as_str(), embeddings.get(&i.id).unwrap()))
        .collect();
    let hits = retriever
        .top_many(&queries, 1, SelfExclusion::Auto)
        .unwrap();
    let prompts = instances
        .iter()
        .zip(&hits)
        .map(|(i, h)| build_prompt(i, h.first(), &options))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let requests: Vec<GenerationRequest> = prompts.iter().map(GenerationRequest::from).collect();
    let outputs = generate(&requests, &OracleBackend::new(&instances, tokens).unwrap())
        .map_err(|e| e.to_string())?;
    let preds = decode_all(&outputs, &instances, tokens).map_err(|e| e.to_string())?;
    let report = argqa::scorer::score(&instances, &preds).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();

    let id = report.get(Criterion::ArgId, MatchKind::Exact).f1;
    let c = report.get(Criterion::ArgC, MatchKind::Exact).f1;
    check!(report.n_events == 50, "{} events", report.n_events);
    check!(id == 1.0 && c == 1.0, "EM Arg-Id F1 {id}, Arg-C F1 {c}");
    check!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}");
    Ok(format!(
        "50 events, {} questions, EM Arg-Id/Arg-C F1 = {id:.3}/{c:.3} in {:.0} ms",
        report.n_instances,
        elapsed.as_secs_f64() * 1000.0
    ))
}

const WORDS: [&str; 14] = [
    "the", "a", "court", "mayor", "Vell", "Boston", "fraud", "convoy", "rebels", "an", "embassy",
    "Kirkuk", "The", "Court",
];
const ROLES: [&str; 3] = ["Agent", "Target", "Place"];

/// One random event: its role instances and predictions against them.
fn random_event(
    rng: &mut ChaCha8Rng,
    event: usize,
) -> (Vec<RoleInstance>, Vec<ArgumentPrediction>) {
    let words: Vec<&str> = (0..16)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect();
    let context = words.join(" ");
    let starts: Vec<usize> = words
        .iter()
        .scan(0, |pos, w| {
            let s = *pos;
            *pos += w.len() + 1;
            Some(s)
        })
        .collect();
    let span = |rng: &mut ChaCha8Rng| {
        let i = rng.gen_range(0..words.len());
        let j = (i + rng.gen_range(1..=3)).min(words.len());
        let (s, e) = (starts[i], starts[j - 1] + words[j - 1].len());
        Span::new(s, e, &context[s..e])
    };
    let event_id = format!("ev{event}");
    let mut instances: Vec<RoleInstance> = ROLES
        .iter()
        .map(|r| RoleInstance {
            id: format!("{event_id}:{r}"),
            doc_id: "d".into(),
            event_id: event_id.clone(),
            context: context.clone(),
            event_type: "T".into(),
            trigger: Span::new(0, words[0].len(), words[0]),
            role: r.to_string(),
            question: format!("{r}?"),
            gold_args: Vec::new(),
        })
        .collect();
    let mut golds: Vec<(usize, Span)> = Vec::new();
    for _ in 0..rng.gen_range(0..=5) {
        let r = rng.gen_range(0..ROLES.len());
        let s = span(rng);
        if !instances[r].gold_args.contains(&s) {
            instances[r].gold_args.push(s.clone());
            golds.push((r, s));
        }
    }
    let mut preds = Vec::new();
    for _ in 0..rng.gen_range(0..=5) {
        let r = rng.gen_range(0..ROLES.len());
        let s = match (rng.gen_range(0..3), golds.is_empty()) {
            (0, false) => golds[rng.gen_range(0..golds.len())].1.clone(),
            (1, false) => {
                // shift the left boundary, keeping the head word
                let g = &golds[rng.gen_range(0..golds.len())].1;
                let wi = starts.iter().position(|&s| s == g.start).unwrap();
                let ns = if wi > 0 && rng.gen_bool(0.5) {
                    starts[wi - 1]
                } else {
                    g.start
                };
                Span::new(ns, g.end, &context[ns..g.end])
            }
            _ => span(rng),
        };
        preds.push(ArgumentPrediction {
            instance_id: instances[r].id.clone(),
            role: ROLES[r].to_string(),
            source_text: s.text.clone(),
            span: s,
        });
    }
    (instances, preds)
}

/// Head key written from the definition: lowercase alphanumeric tokens,
/// leading articles dropped, last token; else the collapsed text, which
/// never equals a head word.
fn oracle_head(text: &str) -> (bool, String) {
    let lower = text.to_lowercase();
    let tokens: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect();
    let mut rest = &tokens[..];
    while let Some((first, tail)) = rest.split_first() {
        if ["a", "an", "the"].contains(first) {
            rest = tail;
        } else {
            break;
        }
    }
    match rest.last() {
        Some(t) => (true, t.to_string()),
        None => (false, text.split_whitespace().collect::<Vec<_>>().join(" ")),
    }
}

/// Largest one-to-one matching by exhaustive search.
fn max_matching(n_pred: usize, n_gold: usize, ok: &dyn Fn(usize, usize) -> bool) -> usize {
    fn go(
        p: usize,
        n_pred: usize,
        used: &mut Vec<bool>,
        ok: &dyn Fn(usize, usize) -> bool,
    ) -> usize {
        if p == n_pred {
            return 0;
        }
        let mut best = go(p + 1, n_pred, used, ok);
        for g in 0..used.len() {
            if !used[g] && ok(p, g) {
                used[g] = true;
                best = best.max(1 + go(p + 1, n_pred, used, ok));
                used[g] = false;
            }
        }
        best
    }
    go(0, n_pred, &mut vec![false; n_gold], ok)
}

fn oracle_tp(
    instances: &[RoleInstance],
    preds: &[ArgumentPrediction],
    criterion: Criterion,
    kind: MatchKind,
) -> usize {
    let golds: Vec<(&str, &Span)> = instances
        .iter()
        .flat_map(|i| i.gold_args.iter().map(move |g| (i.role.as_str(), g)))
        .collect();
    let ok = |p: usize, g: usize| {
        let (pred, (grole, gold)) = (&preds[p], golds[g]);
        let located = match kind {
            MatchKind::Exact => pred.span.start == gold.start && pred.span.end == gold.end,
            MatchKind::Head => oracle_head(&pred.span.text) == oracle_head(&gold.text),
        };
        located && (criterion == Criterion::ArgId || pred.role == grole)
    };
    max_matching(preds.len(), golds.len(), &ok)
}

fn scorer_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let events: Vec<_> = (0..200).map(|e| random_event(&mut rng, e)).collect();
    let gold: Vec<RoleInstance> = events.iter().flat_map(|(i, _)| i.clone()).collect();
    let preds: Vec<ArgumentPrediction> = events.iter().flat_map(|(_, p)| p.clone()).collect();

    let greedy =
        score_detailed(&gold, &preds, &ScoreOptions::default()).map_err(|e| e.to_string())?;
    let optimal_opts = ScoreOptions {
        assignment: Assignment::Optimal,
        ..ScoreOptions::default()
    };
    let optimal = score_detailed(&gold, &preds, &optimal_opts).map_err(|e| e.to_string())?;

    let mut oracle_divergences = 0;
    for (ei, (inst, pr)) in events.iter().enumerate() {
        let per_event =
            score_detailed(inst, pr, &ScoreOptions::default()).map_err(|e| e.to_string())?;
        for &(c, k) in &CELLS {
            let want = oracle_tp(inst, pr, c, k);
            let got = per_event.report.get(c, k).tp;
            let opt = score_detailed(inst, pr, &optimal_opts)
                .unwrap()
                .report
                .get(c, k)
                .tp;
            check!(
                opt == want,
                "ev{ei} {c:?}/{k:?}: optimal {opt}, exhaustive {want}"
            );
            if got != want {
                oracle_divergences += 1;
                let logged = greedy.divergences.iter().any(|d| {
                    d.event_id == format!("ev{ei}")
                        && d.criterion == c
                        && d.match_kind == k
                        && d.optimal_tp == want
                });
                check!(
                    logged,
                    "ev{ei} {c:?}/{k:?}: greedy {got} vs exhaustive {want} not logged"
                );
            }
        }
    }
    check!(
        greedy.divergences.len() == oracle_divergences,
        "{} logged divergences, {} found by the oracle",
        greedy.divergences.len(),
        oracle_divergences
    );

    let mut worst: f64 = 0.0;
    for report in [&greedy.report, &optimal.report] {
        for row in &report.rows {
            let (tp, np, ng) = (row.tp as f64, row.n_pred as f64, row.n_gold as f64);
            let p = if np > 0.0 { tp / np } else { 0.0 };
            let r = if ng > 0.0 { tp / ng } else { 0.0 };
            let f = if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            };
            worst = worst
                .max((p - row.precision).abs())
                .max((r - row.recall).abs())
                .max((f - row.f1).abs());
        }
    }
    check!(worst <= 1e-9, "P/R/F1 off by {worst:e}");
    let row = greedy.report.get(Criterion::ArgC, MatchKind::Exact);
    Ok(format!(
        "200 events, {} preds / {} golds; {} greedy-vs-exhaustive divergences, all logged; Arg-C EM F1 {:.4}; max P/R/F1 error {worst:.1e}",
        row.n_pred, row.n_gold, oracle_divergences, row.f1
    ))
}

fn retrieval_argmax() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 24;
    let mut vecs: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    // ties: every tenth vector repeats an earlier one (possibly scaled)
    for i in (10..1000).step_by(10) {
        let src = rng.gen_range(0..i);
        let scale = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
        vecs[i] = vecs[src].iter().map(|x| x * scale).collect();
    }
    let ids: Vec<String> = (0..1000)
        .map(|i| format!("d{:04}", (i * 7919) % 1000))
        .collect();
    let mut embeddings = EmbeddingStore::new();
    let demos: Vec<Demonstration> = ids
        .iter()
        .zip(&vecs)
        .map(|(id, v)| {
            embeddings.insert(id, v.clone().into()).unwrap();
            Demonstration {
                id: id.clone(),
                question: "q".into(),
                context: "c".into(),
                answers: Vec::new(),
                event_type: "T".into(),
                role: "R".into(),
            }
        })
        .collect();
    let store = DemoStore::from_demonstrations(demos, &SpecialTokens::default()).unwrap();

    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let mut tied = 0;
    for q in 0..100 {
        let query: Vec<f64> = if q % 4 == 0 {
            // exactly a stored direction, so duplicates tie at the top
            vecs[rng.gen_range(0..1000)].clone()
        } else {
            (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let scores: Vec<f64> = vecs.iter().map(|v| cos(&query, v)).collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<&String> = ids
            .iter()
            .zip(&scores)
            .filter(|(_, &s)| best - s < 1e-12)
            .map(|(i, _)| i)
            .collect();
        tied += usize::from(winners.len() > 1);
        let expected = winners.iter().min().unwrap();
        let got = retrieve_top(
            &format!("q{q}"),
            &EmbeddingVector(query),
            &store,
            &embeddings,
            1,
            false,
        )
        .map_err(|e| e.to_string())?;
        check!(
            got.len() == 1 && &&got[0].demo.id == expected,
            "query {q}: got {:?}, exhaustive {expected}",
            got.first().map(|r| &r.demo.id)
        );
    }
    Ok(format!(
        "100 queries over 1000 vectors; {tied} with tied maxima resolved by lowest id"
    ))
}

fn random_distribution(rng: &mut ChaCha8Rng, n_types: usize) -> TypeDistribution {
    loop {
        let counts: Vec<(String, usize)> = (0..n_types)
            .map(|t| {
                (
                    format!("T{t:02}"),
                    if rng.gen_bool(0.3) {
                        0
                    } else {
                        rng.gen_range(0..50)
                    },
                )
            })
            .collect();
        if let Ok(d) = TypeDistribution::from_counts(counts) {
            return d;
        }
    }
}

fn hellinger_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = |p: &TypeDistribution, q: &TypeDistribution| hellinger_distance(p, q).unwrap();
    let mut worst_triangle: f64 = f64::NEG_INFINITY;
    for i in 0..1000 {
        let (p, q, r) = (
            random_distribution(&mut rng, 33),
            random_distribution(&mut rng, 33),
            random_distribution(&mut rng, 33),
        );
        let (pq, qp, qr, pr) = (h(&p, &q), h(&q, &p), h(&q, &r), h(&p, &r));
        check!(pq >= 0.0, "triple {i}: negative {pq}");
        check!(pq == qp, "triple {i}: asymmetric {pq} vs {qp}");
        check!(h(&p, &p) <= 1e-12, "triple {i}: H(P,P) = {}", h(&p, &p));
        check!(pq <= 1.0 + 1e-12, "triple {i}: {pq} > 1");
        worst_triangle = worst_triangle.max(pr - (pq + qr));
        check!(
            pr <= pq + qr + 1e-9,
            "triple {i}: triangle violated by {}",
            pr - pq - qr
        );
        // direct formula on the union support
        let direct = (0.5
            * (0..33)
                .map(|t| {
                    let k = format!("T{t:02}");
                    (p.prob(&k).sqrt() - q.prob(&k).sqrt()).powi(2)
                })
                .sum::<f64>())
        .sqrt();
        check!(
            (direct - pq).abs() < 1e-9,
            "triple {i}: {pq} vs formula {direct}"
        );
    }
    for i in 0..200 {
        let split = rng.gen_range(1..33);
        let mut types: Vec<usize> = (0..33).collect();
        for j in (1..33).rev() {
            types.swap(j, rng.gen_range(0..=j));
        }
        let build = |ts: &[usize], rng: &mut ChaCha8Rng| {
            TypeDistribution::from_counts(
                ts.iter()
                    .map(|t| (format!("T{t:02}"), rng.gen_range(1..40usize))),
            )
            .unwrap()
        };
        let (p, q) = (
            build(&types[..split], &mut rng),
            build(&types[split..], &mut rng),
        );
        check!(h(&p, &q) == 1.0, "disjoint pair {i}: {}", h(&p, &q));
    }
    Ok(format!("1000 triples on 33 types; max triangle slack {worst_triangle:.3}; 200 disjoint pairs at exactly 1.0"))
}

/// Largest-remainder quotas computed directly with exact integer fractions.
fn oracle_allocation(sizes: &[usize], n: usize) -> Vec<usize> {
    let total: u128 = sizes.iter().map(|&s| s as u128).sum();
    let mut out: Vec<usize> = sizes
        .iter()
        .map(|&s| (s as u128 * n as u128 / total) as usize)
        .collect();
    let rem: Vec<u128> = sizes
        .iter()
        .map(|&s| s as u128 * n as u128 % total)
        .collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        rem[b]
            .cmp(&rem[a])
            .then(sizes[b].cmp(&sizes[a]))
            .then(a.cmp(&b))
    });
    let short = n - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

fn allocation_cases() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..500 {
        let k = rng.gen_range(1..40);
        let sizes: Vec<usize> = (0..k)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    rng.gen_range(1..3)
                } else {
                    rng.gen_range(1..500)
                }
            })
            .collect();
        let total: usize = sizes.iter().sum();
        let n = rng.gen_range(0..=total);
        let got = allocate_proportional(&sizes, n).map_err(|e| e.to_string())?;
        check!(
            got.iter().sum::<usize>() == n,
            "case {case}: sums to {}",
            got.iter().sum::<usize>()
        );
        for (i, (&a, &s)) in got.iter().zip(&sizes).enumerate() {
            check!(a <= s, "case {case}: cluster {i} gets {a} > size {s}");
            let exact = s as f64 * n as f64 / total as f64;
            check!(
                (a as f64 - exact).abs() < 1.0,
                "case {case}: cluster {i} gets {a}, quota {exact}"
            );
        }
        check!(
            got == oracle_allocation(&sizes, n),
            "case {case}: differs from direct largest remainder"
        );
    }
    Ok("500 random cases: sums, caps, |alloc - quota| < 1 and tie order all hold".into())
}

fn prompt_grammar() -> Outcome {
    let tokens = SpecialTokens::default();
    let context = "One of those difficult judges John M. is nominated by Adam to be chief justice";
    let trig_start = context.find("nominated").unwrap();
    let trigger = Span::new(trig_start, trig_start + 9, "nominated");
    let marked = mark_trigger(context, &trigger, &tokens).map_err(|e| e.to_string())?;
    let demo = Demonstration {
        id: "d".into(),
        question: "Who are nominated?".into(),
        context: "Bush nominated Rice as secretary".into(),
        answers: vec!["Rice".into()],
        event_type: "Personnel:Nominate".into(),
        role: "Person".into(),
    };
    let input = build_input(
        &render_demonstration(&demo, &tokens),
        "Who are nominated?",
        &marked,
        &tokens,
    )
    .map_err(|e| e.to_string())?;
    let expected_input = "<S> [demo] Who are nominated? [sep] Bush nominated Rice as secretary [sep] The answer is: Rice [demo] Who are nominated? [sep] One of those difficult judges John M. is [trg] nominated [trg] by Adam to be chief justice </S>";
    check!(input == expected_input, "input was {input:?}");
    let bare = build_input("", "Who are nominated?", &marked, &tokens).unwrap();
    check!(
        bare == "<S> Who are nominated? [sep] One of those difficult judges John M. is [trg] nominated [trg] by Adam to be chief justice </S>",
        "demo-less input was {bare:?}"
    );
    let john = context.find("John M.").unwrap();
    let adam = context.find("Adam").unwrap();
    // gold given out of order; the target lists arguments by offset
    let target = build_target(
        &[
            Span::new(adam, adam + 4, "Adam"),
            Span::new(john, john + 7, "John M."),
        ],
        &tokens,
    )
    .map_err(|e| e.to_string())?;
    check!(
        target == "<s> John M. [sep_arg] Adam </s>",
        "target was {target:?}"
    );
    check!(
        build_target(&[], &tokens).unwrap() == "<s> </s>",
        "empty target"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alphabet: Vec<char> = "abcXYZ019.,'-()&é ".chars().collect();
    let mut failures = 0;
    for _ in 0..1000 {
        let args: Vec<String> = (0..rng.gen_range(0..6))
            .map(|_| loop {
                let s: String = (0..rng.gen_range(1..12))
                    .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                    .collect();
                let norm = s.split_whitespace().collect::<Vec<_>>().join(" ");
                if !norm.is_empty() {
                    break norm;
                }
            })
            .collect();
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let t = build_target_texts(&refs, &tokens).map_err(|e| e.to_string())?;
        failures += usize::from(split_answers(&t, &tokens) != args);
    }
    check!(
        failures == 0,
        "{failures} of 1000 argument lists did not survive split_answers"
    );
    Ok("worked example byte-exact; split_answers inverted 1000/1000 random targets".into())
}

fn sampling_trend() -> Outcome {
    let pop = synthetic_population(4000, 33, 2024);
    let truth = type_distribution(&pop.event_types).unwrap();
    let type_of: HashMap<&str, &str> = pop
        .ids
        .iter()
        .map(String::as_str)
        .zip(pop.event_types.iter().map(String::as_str))
        .collect();
    let sizes: Vec<usize> = [5, 10, 15, 20, 25]
        .iter()
        .map(|p| pop.ids.len() * p / 100)
        .collect();
    let sources = SampleSources {
        embeddings: Some(&pop.embeddings),
        ..Default::default()
    };
    let trials = 50;
    let mut wins = 0;
    let mut mean: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut mean_at_5 = [0.0; 2];
    for seed in 0..trials {
        let mut at_5 = [0.0; 2];
        for (si, strategy) in [Strategy::Random, Strategy::JointEnc]
            .into_iter()
            .enumerate()
        {
            let req = SampleRequest::new(strategy, 0, seed).with_k(33);
            let plans = sample_sizes(&pop.ids, &req, &sizes, sources).map_err(|e| e.to_string())?;
            let acc = mean
                .entry(strategy.to_string())
                .or_insert_with(|| vec![0.0; sizes.len()]);
            for (j, plan) in plans.iter().enumerate() {
                let d = type_distribution(plan.ids.iter().map(|id| type_of[id.as_str()])).unwrap();
                let dist = hellinger_distance(&d, &truth).unwrap();
                acc[j] += dist / trials as f64;
                if j == 0 {
                    at_5[si] = dist;
                }
            }
        }
        wins += usize::from(at_5[1] <= at_5[0]);
        mean_at_5[0] += at_5[0] / trials as f64;
        mean_at_5[1] += at_5[1] / trials as f64;
    }
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let curves = format!(
        "random [{}] jointenc [{}]",
        fmt(&mean["random"]),
        fmt(&mean["jointenc"])
    );
    // distance of an exactly stratified sample: only integer rounding remains
    let mut type_sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &pop.event_types {
        *type_sizes.entry(t).or_default() += 1;
    }
    let counts: Vec<usize> = type_sizes.values().copied().collect();
    let floor: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let alloc = allocate_proportional(&counts, n).unwrap();
            let d =
                TypeDistribution::from_counts(type_sizes.keys().map(|t| t.to_string()).zip(alloc))
                    .unwrap();
            hellinger_distance(&d, &truth).unwrap()
        })
        .collect();
    let curves = format!("{curves}; rounding floor [{}]", fmt(&floor));
    check!(
        wins * 100 >= 80 * trials as usize,
        "JointEnc closer in {wins}/{trials} trials; {curves}"
    );
    for (strategy, curve) in &mean {
        check!(
            curve.windows(2).all(|w| w[1] <= w[0]),
            "{strategy} mean distance increases: {curves}"
        );
    }
    Ok(format!(
        "JointEnc <= Random at 5% in {wins}/{trials} trials (mean {:.4} vs {:.4}); mean distance 5%..25%: {curves}",
        mean_at_5[1], mean_at_5[0]
    ))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let pop = synthetic_population(1200, 33, 4);
    argqa::corpus::write_corpus(d.join("corpus.jsonl"), &pop.to_corpus()).unwrap();
    argqa::corpus::write_ontology(d.join("ontology.jsonl"), &pop.ontology()).unwrap();
    argqa::embedding::write_embeddings(d.join("ctx.jsonl"), &pop.embeddings.records()).unwrap();
    argqa::embedding::write_embeddings(d.join("trg.jsonl"), &pop.embeddings.trigger_records())
        .unwrap();

    let path = |name: &str| d.join(name).to_str().unwrap().to_string();
    let run = |args: &[String]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_argqa"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!(
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            ))
        }
    };
    let mut compared = 0;
    for strategy in ["random", "context", "jointenc"] {
        let mut outputs = Vec::new();
        for round in 0..2 {
            let out = path(&format!("{strategy}-{round}.json"));
            let args: Vec<String> = [
                "sample",
                "--corpus",
                &path("corpus.jsonl"),
                "--ontology",
                &path("ontology.jsonl"),
                "--strategy",
                strategy,
                "--n",
                "200",
                "--seed",
                "7",
                "--embeddings",
                &path("ctx.jsonl"),
                "--trigger-embeddings",
                &path("trg.jsonl"),
                "--out",
                &out,
            ]
            .map(String::from)
            .to_vec();
            run(&args)?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        check!(
            outputs[0] == outputs[1],
            "{strategy} plans differ between runs"
        );
        let plan: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
        check!(
            plan["seed"] == 7 && plan["N"] == 200,
            "{strategy} plan does not record seed and N"
        );
        compared += 1;
    }
    for round in 0..2 {
        let args: Vec<String> = [
            "analyze-distance",
            "--corpus",
            &path("corpus.jsonl"),
            "--plans",
            &path("random-0.json"),
            &path("jointenc-0.json"),
            "--out",
            &path(&format!("table-{round}.csv")),
        ]
        .map(String::from)
        .to_vec();
        run(&args)?;
    }
    check!(
        std::fs::read(d.join("table-0.csv")).unwrap()
            == std::fs::read(d.join("table-1.csv")).unwrap(),
        "distance tables differ"
    );
    Ok(format!(
        "{compared} sample strategies and analyze-distance byte-identical across two runs"
    ))
}

fn check_order(report: &MetricsReport, what: &str) -> Result<(), String> {
    for kind in [MatchKind::Exact, MatchKind::Head] {
        let (id, c) = (
            report.get(Criterion::ArgId, kind),
            report.get(Criterion::ArgC, kind),
        );
        check!(
            c.tp <= id.tp,
            "{what}: Arg-C tp {} > Arg-Id tp {} ({kind:?})",
            c.tp,
            id.tp
        );
        check!(
            c.f1 <= id.f1 + 1e-12,
            "{what}: Arg-C F1 above Arg-Id ({kind:?})"
        );
    }
    for criterion in [Criterion::ArgId, Criterion::ArgC] {
        let (em, hm) = (
            report.get(criterion, MatchKind::Exact),
            report.get(criterion, MatchKind::Head),
        );
        check!(
            em.tp <= hm.tp,
            "{what}: EM tp {} > HM tp {} ({criterion:?})",
            em.tp,
            hm.tp
        );
    }
    Ok(())
}

fn ordering_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut reports = 0;
    for fixture in 0..100 {
        let events: Vec<_> = (0..rng.gen_range(1..8))
            .map(|e| random_event(&mut rng, e))
            .collect();
        let gold: Vec<RoleInstance> = events.iter().flat_map(|(i, _)| i.clone()).collect();
        let preds: Vec<ArgumentPrediction> = events.iter().flat_map(|(_, p)| p.clone()).collect();
        for assignment in [Assignment::Greedy, Assignment::Optimal] {
            let opts = ScoreOptions {
                assignment,
                ..ScoreOptions::default()
            };
            let r = score_detailed(&gold, &preds, &opts)
                .map_err(|e| e.to_string())?
                .report;
            check_order(&r, &format!("fixture {fixture} {assignment:?}"))?;
            reports += 1;
            let sims: HashMap<String, f64> = gold
                .iter()
                .map(|g| (g.id.clone(), rng.gen_range(0.0..1.0)))
                .collect();
            let table = bucket_by_similarity(&gold, &preds, &sims, &[0.0, 0.5, 0.7, 1.0], &opts)
                .map_err(|e| e.to_string())?;
            for b in &table.buckets {
                check_order(
                    &b.report,
                    &format!("fixture {fixture} bucket [{}, {})", b.lo, b.hi),
                )?;
                reports += 1;
            }
        }
    }
    Ok(format!(
        "{reports} reports from 100 fixtures: Arg-C <= Arg-Id and EM <= HM throughout"
    ))
}

fn main() {
    let criteria: [Check; 9] = [
        ("oracle round trip", oracle_round_trip),
        ("scorer vs exhaustive assignment", scorer_equivalence),
        ("top-1 retrieval vs exhaustive argmax", retrieval_argmax),
        ("Hellinger metric axioms", hellinger_axioms),
        ("proportional allocation", allocation_cases),
        ("prompt grammar", prompt_grammar),
        ("JointEnc vs Random distance trend", sampling_trend),
        ("seeded CLI determinism", cli_determinism),
        ("report ordering invariants", ordering_invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
