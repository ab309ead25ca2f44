//! Argument identification / classification scoring under exact-offset and
//! head-word matching.
//!
//! Matching happens per event: every prediction from any role instance of an
//! event competes for the gold arguments of all roles of that event. Each
//! gold argument is credited at most once. Counts are micro-averaged over the
//! whole input.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{RoleInstance, Span};
use crate::postprocess::ArgumentPrediction;

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("prediction refers to unknown instance {0:?}")]
    OrphanPrediction(String),
    #[error("duplicate gold instance {0:?}")]
    DuplicateInstance(String),
    #[error("bucket edges must be finite, strictly increasing, and at least two")]
    BadEdges,
    #[error("no similarity score for instance {0:?}")]
    MissingScore(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    ArgId,
    ArgC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchKind {
    #[serde(rename = "EM")]
    Exact,
    #[serde(rename = "HM")]
    Head,
}

pub const CELLS: [(Criterion, MatchKind); 4] = [
    (Criterion::ArgId, MatchKind::Exact),
    (Criterion::ArgId, MatchKind::Head),
    (Criterion::ArgC, MatchKind::Exact),
    (Criterion::ArgC, MatchKind::Head),
];

/// Extracts the head word used by head matching.
pub trait HeadRule: Sync {
    fn head(&self, text: &str) -> String;
}

/// Lowercase, split into alphanumeric tokens, drop leading determiners
/// (a, an, the), keep the last token.
#[derive(Debug, Clone, Copy, Default)]
pub struct LastTokenHead;

impl HeadRule for LastTokenHead {
    fn head(&self, text: &str) -> String {
        let lower = text.to_lowercase();
        let tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        let content = tokens
            .iter()
            .position(|t| !matches!(*t, "a" | "an" | "the"))
            .map_or(&[][..], |i| &tokens[i..]);
        content.last().map(|t| t.to_string()).unwrap_or_default()
    }
}

/// Key under which two texts head-match: the head word, or the whole
/// whitespace-normalized text when it has no head word.
fn head_key(text: &str, rule: &dyn HeadRule) -> String {
    let head = rule.head(text);
    if head.is_empty() {
        format!(
            "\u{0}{}",
            text.split_whitespace().collect::<Vec<_>>().join(" ")
        )
    } else {
        head
    }
}

pub fn match_hm_with(pred_text: &str, gold_text: &str, rule: &dyn HeadRule) -> bool {
    head_key(pred_text, rule) == head_key(gold_text, rule)
}

/// Head match with [`LastTokenHead`].
pub fn match_hm(pred_text: &str, gold_text: &str) -> bool {
    match_hm_with(pred_text, gold_text, &LastTokenHead)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmMatch {
    pub arg_id: bool,
    pub arg_c: bool,
}

pub fn match_em(pred: &ArgumentPrediction, gold_role: &str, gold: &Span) -> EmMatch {
    let arg_id = pred.span.start == gold.start && pred.span.end == gold.end;
    EmMatch {
        arg_id,
        arg_c: arg_id && pred.role == gold_role,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Predictions claim the first unclaimed matching gold, in input order.
    #[default]
    Greedy,
    /// Maximum one-to-one matching.
    Optimal,
}

#[derive(Clone, Copy)]
pub struct ScoreOptions<'a> {
    pub assignment: Assignment,
    pub head_rule: &'a dyn HeadRule,
}

impl Default for ScoreOptions<'_> {
    fn default() -> Self {
        ScoreOptions {
            assignment: Assignment::Greedy,
            head_rule: &LastTokenHead,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub n_pred: usize,
    pub n_gold: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.n_pred)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.n_gold)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.n_pred += other.n_pred;
        self.n_gold += other.n_gold;
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub criterion: Criterion,
    #[serde(rename = "match")]
    pub match_kind: MatchKind,
    #[serde(rename = "P")]
    pub precision: f64,
    #[serde(rename = "R")]
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    pub tp: usize,
    pub n_pred: usize,
    pub n_gold: usize,
}

impl MetricRow {
    fn new(criterion: Criterion, match_kind: MatchKind, c: Counts) -> Self {
        MetricRow {
            criterion,
            match_kind,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            tp: c.tp,
            n_pred: c.n_pred,
            n_gold: c.n_gold,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.tp,
            n_pred: self.n_pred,
            n_gold: self.n_gold,
        }
    }
}

/// P/R/F1 for {ArgId, ArgC} × {EM, HM}, rows in [`CELLS`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    pub n_instances: usize,
    pub n_events: usize,
}

impl MetricsReport {
    fn from_counts(
        counts: &BTreeMap<(Criterion, MatchKind), Counts>,
        n_instances: usize,
        n_events: usize,
    ) -> Self {
        MetricsReport {
            rows: CELLS
                .iter()
                .map(|&(c, m)| {
                    MetricRow::new(c, m, counts.get(&(c, m)).copied().unwrap_or_default())
                })
                .collect(),
            n_instances,
            n_events,
        }
    }

    pub fn get(&self, criterion: Criterion, kind: MatchKind) -> &MetricRow {
        self.rows
            .iter()
            .find(|r| r.criterion == criterion && r.match_kind == kind)
            .expect("report has every cell")
    }

    pub const CSV_HEADER: &'static str = "criterion,match,P,R,F1,tp,n_pred,n_gold";

    fn csv_cells(row: &MetricRow) -> String {
        format!(
            "{:?},{},{:.6},{:.6},{:.6},{},{},{}",
            row.criterion,
            match row.match_kind {
                MatchKind::Exact => "EM",
                MatchKind::Head => "HM",
            },
            row.precision,
            row.recall,
            row.f1,
            row.tp,
            row.n_pred,
            row.n_gold
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for row in &self.rows {
            let _ = writeln!(out, "{}", Self::csv_cells(row));
        }
        out
    }
}

/// Which gold (if any) a prediction was credited with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchDecision {
    pub event_id: String,
    /// Index into the prediction slice given to [`score_detailed`].
    pub pred: usize,
    /// `(instance id, index into its gold_args)`.
    pub gold: Option<(String, usize)>,
    pub criterion: Criterion,
    pub match_kind: MatchKind,
}

/// A per-event cell where greedy and optimal assignment credit different
/// numbers of true positives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub event_id: String,
    pub criterion: Criterion,
    pub match_kind: MatchKind,
    pub greedy_tp: usize,
    pub optimal_tp: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailedScore {
    pub report: MetricsReport,
    pub decisions: Vec<MatchDecision>,
    pub divergences: Vec<Divergence>,
}

struct GoldArg<'a> {
    instance_id: &'a str,
    index: usize,
    role: &'a str,
    span: &'a Span,
}

struct EventGroup<'a> {
    golds: Vec<GoldArg<'a>>,
    preds: Vec<(usize, &'a ArgumentPrediction)>,
}

/// Greedy assignment: each prediction takes the first free matching gold.
fn greedy(
    n_pred: usize,
    n_gold: usize,
    matches: &dyn Fn(usize, usize) -> bool,
) -> Vec<Option<usize>> {
    let mut taken = vec![false; n_gold];
    (0..n_pred)
        .map(|p| {
            let g = (0..n_gold).find(|&g| !taken[g] && matches(p, g))?;
            taken[g] = true;
            Some(g)
        })
        .collect()
}

/// Maximum bipartite matching by augmenting paths.
fn optimal(
    n_pred: usize,
    n_gold: usize,
    matches: &dyn Fn(usize, usize) -> bool,
) -> Vec<Option<usize>> {
    fn augment(
        p: usize,
        n_gold: usize,
        matches: &dyn Fn(usize, usize) -> bool,
        seen: &mut [bool],
        gold_owner: &mut [Option<usize>],
    ) -> bool {
        for g in 0..n_gold {
            if seen[g] || !matches(p, g) {
                continue;
            }
            seen[g] = true;
            if gold_owner[g].is_none_or(|q| augment(q, n_gold, matches, seen, gold_owner)) {
                gold_owner[g] = Some(p);
                return true;
            }
        }
        false
    }
    let mut gold_owner = vec![None; n_gold];
    for p in 0..n_pred {
        let mut seen = vec![false; n_gold];
        augment(p, n_gold, matches, &mut seen, &mut gold_owner);
    }
    let mut out = vec![None; n_pred];
    for (g, owner) in gold_owner.iter().enumerate() {
        if let Some(p) = owner {
            out[*p] = Some(g);
        }
    }
    out
}

fn assign(
    assignment: Assignment,
    n_pred: usize,
    n_gold: usize,
    matches: &dyn Fn(usize, usize) -> bool,
) -> Vec<Option<usize>> {
    match assignment {
        Assignment::Greedy => greedy(n_pred, n_gold, matches),
        Assignment::Optimal => optimal(n_pred, n_gold, matches),
    }
}

fn group_events<'a>(
    gold: &'a [RoleInstance],
    preds: &'a [ArgumentPrediction],
) -> Result<BTreeMap<&'a str, EventGroup<'a>>, ScoreError> {
    let mut by_id: HashMap<&str, &RoleInstance> = HashMap::with_capacity(gold.len());
    let mut events: BTreeMap<&str, EventGroup> = BTreeMap::new();
    for inst in gold {
        if by_id.insert(&inst.id, inst).is_some() {
            return Err(ScoreError::DuplicateInstance(inst.id.clone()));
        }
        let group = events.entry(&inst.event_id).or_insert_with(|| EventGroup {
            golds: Vec::new(),
            preds: Vec::new(),
        });
        group.golds.extend(
            inst.gold_args
                .iter()
                .enumerate()
                .map(|(index, span)| GoldArg {
                    instance_id: &inst.id,
                    index,
                    role: &inst.role,
                    span,
                }),
        );
    }
    for (i, p) in preds.iter().enumerate() {
        let inst = by_id
            .get(p.instance_id.as_str())
            .ok_or_else(|| ScoreError::OrphanPrediction(p.instance_id.clone()))?;
        events
            .get_mut(inst.event_id.as_str())
            .expect("event registered with its instances")
            .preds
            .push((i, p));
    }
    Ok(events)
}

/// Scores with [`ScoreOptions`], returning per-prediction decisions and any
/// greedy/optimal divergences alongside the report.
pub fn score_detailed(
    gold: &[RoleInstance],
    preds: &[ArgumentPrediction],
    options: &ScoreOptions,
) -> Result<DetailedScore, ScoreError> {
    let events = group_events(gold, preds)?;
    let mut counts: BTreeMap<(Criterion, MatchKind), Counts> = BTreeMap::new();
    let mut decisions = Vec::new();
    let mut divergences = Vec::new();

    for (event_id, group) in &events {
        let pred_keys: Vec<String> = group
            .preds
            .iter()
            .map(|(_, p)| head_key(&p.span.text, options.head_rule))
            .collect();
        let gold_keys: Vec<String> = group
            .golds
            .iter()
            .map(|g| head_key(&g.span.text, options.head_rule))
            .collect();

        for &(criterion, kind) in &CELLS {
            let matches = |p: usize, g: usize| {
                let (pred, gold) = (group.preds[p].1, &group.golds[g]);
                let located = match kind {
                    MatchKind::Exact => {
                        pred.span.start == gold.span.start && pred.span.end == gold.span.end
                    }
                    MatchKind::Head => pred_keys[p] == gold_keys[g],
                };
                located && (criterion == Criterion::ArgId || pred.role == gold.role)
            };
            let (np, ng) = (group.preds.len(), group.golds.len());
            let chosen = assign(options.assignment, np, ng, &matches);
            let tp = chosen.iter().flatten().count();

            let other = match options.assignment {
                Assignment::Greedy => Assignment::Optimal,
                Assignment::Optimal => Assignment::Greedy,
            };
            let other_tp = assign(other, np, ng, &matches).iter().flatten().count();
            if other_tp != tp {
                let (greedy_tp, optimal_tp) = match options.assignment {
                    Assignment::Greedy => (tp, other_tp),
                    Assignment::Optimal => (other_tp, tp),
                };
                log::warn!(
                    "{event_id} {criterion:?}/{kind:?}: greedy credits {greedy_tp}, optimal {optimal_tp}"
                );
                divergences.push(Divergence {
                    event_id: event_id.to_string(),
                    criterion,
                    match_kind: kind,
                    greedy_tp,
                    optimal_tp,
                });
            }

            counts.entry((criterion, kind)).or_default().add(Counts {
                tp,
                n_pred: np,
                n_gold: ng,
            });
            for (p, g) in chosen.into_iter().enumerate() {
                decisions.push(MatchDecision {
                    event_id: event_id.to_string(),
                    pred: group.preds[p].0,
                    gold: g.map(|g| (group.golds[g].instance_id.to_string(), group.golds[g].index)),
                    criterion,
                    match_kind: kind,
                });
            }
        }
    }

    Ok(DetailedScore {
        report: MetricsReport::from_counts(&counts, gold.len(), events.len()),
        decisions,
        divergences,
    })
}

pub fn score_with(
    gold: &[RoleInstance],
    preds: &[ArgumentPrediction],
    options: &ScoreOptions,
) -> Result<MetricsReport, ScoreError> {
    Ok(score_detailed(gold, preds, options)?.report)
}

/// Greedy one-to-one scoring with [`LastTokenHead`] head matching.
pub fn score(
    gold: &[RoleInstance],
    preds: &[ArgumentPrediction],
) -> Result<MetricsReport, ScoreError> {
    score_with(gold, preds, &ScoreOptions::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    pub population: usize,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketTable {
    pub buckets: Vec<Bucket>,
    /// Instances whose score fell outside `[first edge, last edge)`.
    pub clamped: usize,
}

impl BucketTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("lo,hi,population,{}\n", MetricsReport::CSV_HEADER);
        for b in &self.buckets {
            for row in &b.report.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    b.lo,
                    b.hi,
                    b.population,
                    MetricsReport::csv_cells(row)
                );
            }
        }
        out
    }
}

/// `n` equal-width edges spanning `[lo, hi]`.
pub fn equal_width_edges(lo: f64, hi: f64, buckets: usize) -> Vec<f64> {
    (0..=buckets)
        .map(|i| lo + (hi - lo) * i as f64 / buckets as f64)
        .collect()
}

/// Splits instances into half-open similarity buckets `[e_i, e_{i+1})` and
/// scores each bucket separately. Out-of-range scores go to the end buckets.
pub fn bucket_by_similarity(
    gold: &[RoleInstance],
    preds: &[ArgumentPrediction],
    scores: &HashMap<String, f64>,
    edges: &[f64],
    options: &ScoreOptions,
) -> Result<BucketTable, ScoreError> {
    if edges.len() < 2
        || edges.iter().any(|e| !e.is_finite())
        || edges.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(ScoreError::BadEdges);
    }
    let n_buckets = edges.len() - 1;
    let mut clamped = 0;
    let mut bucket_of: HashMap<&str, usize> = HashMap::with_capacity(gold.len());
    let mut members: Vec<Vec<RoleInstance>> = vec![Vec::new(); n_buckets];
    for inst in gold {
        let s = *scores
            .get(&inst.id)
            .filter(|s| !s.is_nan())
            .ok_or_else(|| ScoreError::MissingScore(inst.id.clone()))?;
        let b = if s < edges[0] {
            clamped += 1;
            0
        } else if s >= edges[n_buckets] {
            clamped += 1;
            n_buckets - 1
        } else {
            edges.partition_point(|&e| e <= s) - 1
        };
        bucket_of.insert(&inst.id, b);
        members[b].push(inst.clone());
    }
    let mut bucket_preds: Vec<Vec<ArgumentPrediction>> = vec![Vec::new(); n_buckets];
    for p in preds {
        let b = bucket_of
            .get(p.instance_id.as_str())
            .ok_or_else(|| ScoreError::OrphanPrediction(p.instance_id.clone()))?;
        bucket_preds[*b].push(p.clone());
    }
    let buckets = members
        .iter()
        .zip(&bucket_preds)
        .enumerate()
        .map(|(i, (g, p))| {
            Ok(Bucket {
                lo: edges[i],
                hi: edges[i + 1],
                population: g.len(),
                report: score_with(g, p, options)?,
            })
        })
        .collect::<Result<_, ScoreError>>()?;
    Ok(BucketTable { buckets, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, event: &str, role: &str, gold: &[(usize, usize, &str)]) -> RoleInstance {
        RoleInstance {
            id: id.into(),
            doc_id: "d".into(),
            event_id: event.into(),
            context: String::new(),
            event_type: "T".into(),
            trigger: Span::new(0, 1, "x"),
            role: role.into(),
            question: "q".into(),
            gold_args: gold.iter().map(|(s, e, t)| Span::new(*s, *e, *t)).collect(),
        }
    }

    fn pred(inst: &str, role: &str, s: usize, e: usize, t: &str) -> ArgumentPrediction {
        ArgumentPrediction {
            instance_id: inst.into(),
            role: role.into(),
            span: Span::new(s, e, t),
            source_text: t.into(),
        }
    }

    #[test]
    fn em_definitions() {
        let g = Span::new(3, 10, "John M.");
        assert_eq!(
            match_em(&pred("i", "Person", 3, 10, "John M."), "Person", &g),
            EmMatch {
                arg_id: true,
                arg_c: true
            }
        );
        assert_eq!(
            match_em(&pred("i", "Agent", 3, 10, "John M."), "Person", &g),
            EmMatch {
                arg_id: true,
                arg_c: false
            }
        );
        assert_eq!(
            match_em(&pred("i", "Person", 3, 9, "John M"), "Person", &g),
            EmMatch {
                arg_id: false,
                arg_c: false
            }
        );
    }

    #[test]
    fn hm_definitions() {
        assert!(match_hm("the John M.", "John M."));
        assert!(match_hm("John M.", "John M."));
        assert!(!match_hm("Baghdad airport", "Baghdad"));
        assert!(match_hm("...", "..."));
        assert!(!match_hm("...", "!!"));
        assert_eq!(LastTokenHead.head("An old Man,"), "man");
        assert_eq!(LastTokenHead.head("the"), "");
    }

    #[test]
    fn three_golds_two_correct_predictions() {
        let gold = [inst(
            "e:P",
            "e",
            "P",
            &[(0, 3, "Ann"), (10, 13, "Bob"), (20, 23, "Cat")],
        )];
        let preds = [
            pred("e:P", "P", 0, 3, "Ann"),
            pred("e:P", "P", 10, 13, "Bob"),
        ];
        let r = score(&gold, &preds).unwrap();
        for row in &r.rows {
            assert_eq!(row.precision, 1.0);
            assert!((row.recall - 2.0 / 3.0).abs() < 1e-12);
            assert!((row.f1 - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_predictions_score_zero() {
        let gold = [inst("e:P", "e", "P", &[(0, 3, "Ann")])];
        let r = score(&gold, &[]).unwrap();
        assert!(r
            .rows
            .iter()
            .all(|row| row.precision == 0.0 && row.recall == 0.0 && row.f1 == 0.0));
    }

    #[test]
    fn wrong_role_counts_for_identification_only() {
        let gold = [
            inst("e:P", "e", "P", &[(0, 3, "Ann")]),
            inst("e:A", "e", "A", &[]),
        ];
        let preds = [pred("e:A", "A", 0, 3, "Ann")];
        let r = score(&gold, &preds).unwrap();
        assert_eq!(r.get(Criterion::ArgId, MatchKind::Exact).tp, 1);
        assert_eq!(r.get(Criterion::ArgC, MatchKind::Exact).tp, 0);
        assert_eq!(r.n_events, 1);
    }

    #[test]
    fn gold_is_credited_once() {
        let gold = [
            inst("e:P", "e", "P", &[(0, 3, "Ann")]),
            inst("e:A", "e", "A", &[]),
        ];
        let preds = [pred("e:P", "P", 0, 3, "Ann"), pred("e:A", "A", 0, 3, "Ann")];
        let r = score(&gold, &preds).unwrap();
        assert_eq!(r.get(Criterion::ArgId, MatchKind::Exact).tp, 1);
        assert_eq!(r.get(Criterion::ArgId, MatchKind::Exact).n_pred, 2);
    }

    #[test]
    fn head_match_relaxes_boundaries() {
        let gold = [inst("e:P", "e", "P", &[(4, 11, "John M.")])];
        let preds = [pred("e:P", "P", 0, 11, "the John M.")];
        let r = score(&gold, &preds).unwrap();
        assert_eq!(r.get(Criterion::ArgC, MatchKind::Exact).tp, 0);
        assert_eq!(r.get(Criterion::ArgC, MatchKind::Head).tp, 1);
    }

    #[test]
    fn orphan_prediction_is_error() {
        let gold = [inst("e:P", "e", "P", &[])];
        assert!(matches!(
            score(&gold, &[pred("nope", "P", 0, 1, "x")]),
            Err(ScoreError::OrphanPrediction(_))
        ));
    }

    #[test]
    fn optimal_beats_greedy_on_crossed_preferences() {
        let matches = |p: usize, g: usize| matches!((p, g), (0, 0) | (0, 1) | (1, 0));
        let g = greedy(2, 2, &matches);
        let o = optimal(2, 2, &matches);
        assert_eq!(g.iter().flatten().count(), 1);
        assert_eq!(o.iter().flatten().count(), 2);
    }

    #[test]
    fn buckets_partition_instances() {
        let gold: Vec<_> = (0..6)
            .map(|i| inst(&format!("e{i}:P"), &format!("e{i}"), "P", &[(0, 1, "a")]))
            .collect();
        let scores: HashMap<String, f64> = gold.iter().map(|g| (g.id.clone(), 0.75)).collect();
        let edges = equal_width_edges(0.0, 1.0, 4);
        let t =
            bucket_by_similarity(&gold, &[], &scores, &edges, &ScoreOptions::default()).unwrap();
        assert_eq!(
            t.buckets.iter().map(|b| b.population).collect::<Vec<_>>(),
            [0, 0, 0, 6]
        );
        assert_eq!(t.clamped, 0);

        let mut scores = scores;
        scores.insert("e0:P".into(), 1.0);
        scores.insert("e1:P".into(), -0.2);
        let t =
            bucket_by_similarity(&gold, &[], &scores, &edges, &ScoreOptions::default()).unwrap();
        assert_eq!(t.clamped, 2);
        assert_eq!(t.buckets.iter().map(|b| b.population).sum::<usize>(), 6);
        assert_eq!(t.buckets[0].population, 1);

        assert!(matches!(
            bucket_by_similarity(&gold, &[], &scores, &[0.5, 0.5], &ScoreOptions::default()),
            Err(ScoreError::BadEdges)
        ));
    }

    #[test]
    fn csv_has_four_rows() {
        let gold = [inst("e:P", "e", "P", &[(0, 3, "Ann")])];
        let csv = score(&gold, &[pred("e:P", "P", 0, 3, "Ann")])
            .unwrap()
            .to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("ArgC,HM,1.000000,1.000000,1.000000,1,1,1"));
    }
}
