//! Few-shot subset selection.
//!
//! | strategy      | procedure                                                          |
//! |---------------|--------------------------------------------------------------------|
//! | `random`      | seeded uniform draw without replacement                            |
//! | `context`     | k-means on context vectors, proportional draw per cluster          |
//! | `jointenc`    | k-means on `[context ; trigger]` vectors, proportional per cluster |
//! | `uncertainty` | top-N by externally supplied uncertainty score, ties by id         |
//!
//! For the clustering strategies `k` is the number of event types in the
//! ontology unless overridden.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingError, EmbeddingStore, EmbeddingVector};
use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error("k = {k} exceeds the {n} points to cluster")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("points have mixed dimensions")]
    MixedDimensions,
    #[error("requested {n} items from a population of {available}")]
    TooLarge { n: usize, available: usize },
    #[error("duplicate population id {0:?}")]
    DuplicateId(String),
    #[error("{strategy} sampling needs {what}")]
    MissingInput {
        strategy: Strategy,
        what: &'static str,
    },
    #[error("no uncertainty score for {0:?}")]
    MissingScore(String),
    #[error("line {line}: invalid uncertainty score for {id:?}")]
    BadScore { line: usize, id: String },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster of each input point.
    pub labels: Vec<usize>,
    /// Input indices per cluster, ascending.
    pub members: Vec<Vec<usize>>,
    pub iterations: usize,
}

/// Lloyd's k-means with step-wise access to its state.
///
/// Seeding: one point drawn uniformly by `seed`, then repeatedly the point
/// farthest from all chosen centroids (ties to the lower index). A cluster
/// left empty by an assignment step is reseeded with the point farthest from
/// its own centroid among clusters holding two or more points.
pub struct KMeans<'a> {
    points: Vec<&'a [f64]>,
    centroids: Vec<Vec<f64>>,
    labels: Vec<usize>,
    iterations: usize,
}

impl<'a> KMeans<'a> {
    pub fn new(points: &'a [EmbeddingVector], k: usize, seed: u64) -> Result<Self, SampleError> {
        let points: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        if k == 0 {
            return Err(SampleError::ZeroK);
        }
        if k > points.len() {
            return Err(SampleError::KTooLarge { k, n: points.len() });
        }
        if points.iter().any(|p| p.len() != points[0].len()) {
            return Err(SampleError::MixedDimensions);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = vec![rng.gen_range(0..points.len())];
        let mut nearest: Vec<f64> = points
            .iter()
            .map(|p| sq_dist(p, points[chosen[0]]))
            .collect();
        let mut is_chosen = vec![false; points.len()];
        is_chosen[chosen[0]] = true;
        while chosen.len() < k {
            let next = (0..points.len())
                .filter(|&i| !is_chosen[i])
                .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)))
                .expect("k <= n leaves an unchosen point");
            is_chosen[next] = true;
            chosen.push(next);
            for (i, p) in points.iter().enumerate() {
                nearest[i] = nearest[i].min(sq_dist(p, points[next]));
            }
        }
        Ok(KMeans {
            centroids: chosen.iter().map(|&i| points[i].to_vec()).collect(),
            labels: vec![usize::MAX; points.len()],
            points,
            iterations: 0,
        })
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Cluster per point; `usize::MAX` before the first step.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Sum of squared distances of points to their assigned centroids.
    pub fn objective(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.labels)
            .map(|(p, &l)| sq_dist(p, &self.centroids[l]))
            .sum()
    }

    /// One assignment + update round. Returns whether any label changed.
    pub fn step(&mut self) -> bool {
        let centroids = &self.centroids;
        let mut labels: Vec<usize> = self
            .points
            .par_iter()
            .map(|p| {
                let mut best = (f64::INFINITY, 0);
                for (c, centroid) in centroids.iter().enumerate() {
                    let d = sq_dist(p, centroid);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect();

        let k = self.centroids.len();
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let donor = (0..self.points.len())
                .filter(|&i| sizes[labels[i]] >= 2)
                .max_by(|&a, &b| {
                    let da = sq_dist(self.points[a], &self.centroids[labels[a]]);
                    let db = sq_dist(self.points[b], &self.centroids[labels[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("an empty cluster implies a cluster with two or more points");
            sizes[labels[donor]] -= 1;
            labels[donor] = empty;
            sizes[empty] = 1;
            self.centroids[empty] = self.points[donor].to_vec();
        }

        let dim = self.points.first().map_or(0, |p| p.len());
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &l) in self.points.iter().zip(&labels) {
            for (s, x) in sums[l].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for (c, (sum, &n)) in sums.into_iter().zip(&sizes).enumerate() {
            self.centroids[c] = sum.into_iter().map(|s| s / n as f64).collect();
        }

        let changed = labels != self.labels;
        self.labels = labels;
        self.iterations += 1;
        changed
    }

    pub fn run(mut self, max_iters: usize) -> ClusterAssignment {
        while self.iterations < max_iters.max(1) && self.step() {}
        let k = self.centroids.len();
        let mut members = vec![Vec::new(); k];
        for (i, &l) in self.labels.iter().enumerate() {
            members[l].push(i);
        }
        ClusterAssignment {
            k,
            centroids: self.centroids,
            labels: self.labels,
            members,
            iterations: self.iterations,
        }
    }
}

pub const DEFAULT_MAX_ITERS: usize = 100;

pub fn kmeans(
    reps: &[EmbeddingVector],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterAssignment, SampleError> {
    Ok(KMeans::new(reps, k, seed)?.run(max_iters))
}

/// Splits `n` across clusters in proportion to their sizes by largest
/// remainder: `floor(size_i * n / total)` each, then one extra to the largest
/// fractional parts (ties: larger cluster, then lower index). No cluster gets
/// more than its size; any overflow is re-spread by the same rule.
pub fn allocate_proportional(sizes: &[usize], n: usize) -> Result<Vec<usize>, SampleError> {
    let available: usize = sizes.iter().sum();
    if n > available {
        return Err(SampleError::TooLarge { n, available });
    }
    let mut alloc = vec![0usize; sizes.len()];
    let mut remaining = n;
    while remaining > 0 {
        let active: Vec<usize> = (0..sizes.len()).filter(|&i| alloc[i] < sizes[i]).collect();
        let total: u128 = active.iter().map(|&i| sizes[i] as u128).sum();
        let mut give: Vec<(usize, usize, u128)> = active
            .iter()
            .map(|&i| {
                let scaled = sizes[i] as u128 * remaining as u128;
                (i, (scaled / total) as usize, scaled % total)
            })
            .collect();
        let mut leftover = remaining - give.iter().map(|g| g.1).sum::<usize>();
        give.sort_by(|a, b| {
            b.2.cmp(&a.2)
                .then(sizes[b.0].cmp(&sizes[a.0]))
                .then(a.0.cmp(&b.0))
        });
        for g in give.iter_mut() {
            if leftover == 0 {
                break;
            }
            g.1 += 1;
            leftover -= 1;
        }
        for (i, amount, _) in give {
            let granted = amount.min(sizes[i] - alloc[i]);
            alloc[i] += granted;
            remaining -= granted;
        }
    }
    Ok(alloc)
}

/// The same `n / k` for every cluster, capped at cluster size, with any
/// shortfall spread over clusters that still have room.
pub fn allocate_equal(sizes: &[usize], n: usize) -> Result<Vec<usize>, SampleError> {
    let available: usize = sizes.iter().sum();
    if n > available {
        return Err(SampleError::TooLarge { n, available });
    }
    let mut alloc = vec![0usize; sizes.len()];
    let mut remaining = n;
    while remaining > 0 {
        let active: Vec<usize> = (0..sizes.len()).filter(|&i| alloc[i] < sizes[i]).collect();
        let (share, extra) = (remaining / active.len(), remaining % active.len());
        for (rank, &i) in active.iter().enumerate() {
            let want = share + usize::from(rank < extra);
            let granted = want.min(sizes[i] - alloc[i]);
            alloc[i] += granted;
            remaining -= granted;
        }
    }
    Ok(alloc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Context,
    JointEnc,
    Uncertainty,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Strategy::Random => "random",
            Strategy::Context => "context",
            Strategy::JointEnc => "jointenc",
            Strategy::Uncertainty => "uncertainty",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "context" => Ok(Strategy::Context),
            "jointenc" => Ok(Strategy::JointEnc),
            "uncertainty" | "al" => Ok(Strategy::Uncertainty),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationMode {
    #[default]
    Proportional,
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRequest {
    pub strategy: Strategy,
    pub n: usize,
    pub seed: u64,
    /// Cluster count for the clustering strategies.
    pub k: Option<usize>,
    pub allocation: AllocationMode,
    pub max_iters: usize,
}

impl SampleRequest {
    pub fn new(strategy: Strategy, n: usize, seed: u64) -> Self {
        SampleRequest {
            strategy,
            n,
            seed,
            k: None,
            allocation: AllocationMode::Proportional,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAllocation {
    pub size: usize,
    pub alloc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub strategy: Strategy,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: usize,
    pub ids: Vec<String>,
    #[serde(default)]
    pub clusters: Vec<ClusterAllocation>,
}

pub fn write_plan(path: impl AsRef<Path>, plan: &SamplePlan) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(plan).expect("plan serializes");
    text.push('\n');
    std::fs::write(path, text)
}

pub fn load_plan(path: impl AsRef<Path>) -> std::io::Result<SamplePlan> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(std::io::Error::other)
}

/// Externally computed uncertainty per population id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UncertaintyScores(pub HashMap<String, f64>);

#[derive(Debug, Deserialize)]
struct ScoreLine {
    id: String,
    score: f64,
}

pub fn load_uncertainty(path: impl AsRef<Path>) -> Result<UncertaintyScores, SampleError> {
    let mut scores = HashMap::new();
    for (line, rec) in jsonl::read::<ScoreLine>(path)? {
        if !rec.score.is_finite() || scores.contains_key(&rec.id) {
            return Err(SampleError::BadScore { line, id: rec.id });
        }
        scores.insert(rec.id, rec.score);
    }
    Ok(UncertaintyScores(scores))
}

/// Where the non-random strategies read their inputs from.
#[derive(Default, Clone, Copy)]
pub struct SampleSources<'a> {
    pub embeddings: Option<&'a EmbeddingStore>,
    pub uncertainty: Option<&'a UncertaintyScores>,
}

/// Draws `amount` of `0..len` uniformly without replacement, ascending.
fn draw(rng: &mut ChaCha8Rng, len: usize, amount: usize) -> Vec<usize> {
    let mut picked = index::sample(rng, len, amount).into_vec();
    picked.sort_unstable();
    picked
}

/// Selects `request.n` ids from `population`.
pub fn sample(
    population: &[String],
    request: &SampleRequest,
    sources: SampleSources,
) -> Result<SamplePlan, SampleError> {
    let mut plans = sample_sizes(population, request, &[request.n], sources)?;
    Ok(plans.pop().expect("one plan per size"))
}

/// One plan per entry of `sizes`, all under the same seed. The clustering
/// strategies cluster once and draw every size from that clustering, so each
/// plan equals what [`sample`] returns for that size alone.
pub fn sample_sizes(
    population: &[String],
    request: &SampleRequest,
    sizes: &[usize],
    sources: SampleSources,
) -> Result<Vec<SamplePlan>, SampleError> {
    let mut seen = HashSet::with_capacity(population.len());
    for id in population {
        if !seen.insert(id.as_str()) {
            return Err(SampleError::DuplicateId(id.clone()));
        }
    }
    if let Some(&n) = sizes.iter().find(|&&n| n > population.len()) {
        return Err(SampleError::TooLarge {
            n,
            available: population.len(),
        });
    }
    let strategy = request.strategy;
    let missing = |what| SampleError::MissingInput { strategy, what };
    let plan = |n: usize, ids: Vec<String>, clusters: Vec<ClusterAllocation>| SamplePlan {
        strategy,
        seed: request.seed,
        n,
        ids,
        clusters,
    };

    match strategy {
        Strategy::Random => Ok(sizes
            .iter()
            .map(|&n| {
                let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
                let ids = draw(&mut rng, population.len(), n)
                    .into_iter()
                    .map(|i| population[i].clone())
                    .collect();
                plan(n, ids, Vec::new())
            })
            .collect()),
        Strategy::Uncertainty => {
            let scores = sources
                .uncertainty
                .ok_or_else(|| missing("an uncertainty score file"))?;
            let mut ranked: Vec<(f64, &String)> = population
                .iter()
                .map(|id| {
                    scores
                        .0
                        .get(id)
                        .map(|&s| (s, id))
                        .ok_or_else(|| SampleError::MissingScore(id.clone()))
                })
                .collect::<Result<_, _>>()?;
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
            Ok(sizes
                .iter()
                .map(|&n| {
                    plan(
                        n,
                        ranked.iter().take(n).map(|(_, id)| (*id).clone()).collect(),
                        Vec::new(),
                    )
                })
                .collect())
        }
        Strategy::Context | Strategy::JointEnc => {
            let store = sources.embeddings.ok_or_else(|| missing("embeddings"))?;
            let k = request.k.ok_or_else(|| missing("a cluster count k"))?;
            let reps: Vec<EmbeddingVector> = population
                .iter()
                .map(|id| match strategy {
                    Strategy::JointEnc => store.joint(id),
                    _ => store.require(id).cloned(),
                })
                .collect::<Result<_, _>>()?;
            let clusters = kmeans(&reps, k, request.seed, request.max_iters)?;
            let cluster_sizes: Vec<usize> = clusters.members.iter().map(Vec::len).collect();
            sizes
                .iter()
                .map(|&n| {
                    let alloc = match request.allocation {
                        AllocationMode::Proportional => allocate_proportional(&cluster_sizes, n)?,
                        AllocationMode::Equal => allocate_equal(&cluster_sizes, n)?,
                    };
                    let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
                    rng.set_stream(1);
                    let mut ids = Vec::with_capacity(n);
                    for (members, &take) in clusters.members.iter().zip(&alloc) {
                        ids.extend(
                            draw(&mut rng, members.len(), take)
                                .into_iter()
                                .map(|j| population[members[j]].clone()),
                        );
                    }
                    let allocations = cluster_sizes
                        .iter()
                        .zip(alloc)
                        .map(|(&size, alloc)| ClusterAllocation { size, alloc })
                        .collect();
                    Ok(plan(n, ids, allocations))
                })
                .collect()
        }
    }
}
