//! Event-type distributions and Hellinger distances between them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Ontology;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("cannot build a distribution from zero examples")]
    Empty,
    #[error("probability for {event_type:?} is {value}")]
    BadProbability { event_type: String, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    BadSum(f64),
    #[error("event type {0:?} is not in the ontology")]
    UnknownType(String),
}

/// Probability per event type. Types absent from the map have probability 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeDistribution(BTreeMap<String, f64>);

impl TypeDistribution {
    pub fn new(probs: BTreeMap<String, f64>) -> Result<Self, AnalysisError> {
        let d = TypeDistribution(probs);
        d.validate()?;
        Ok(d)
    }

    /// Normalizes non-negative counts.
    pub fn from_counts<S: Into<String>>(
        counts: impl IntoIterator<Item = (S, usize)>,
    ) -> Result<Self, AnalysisError> {
        let mut tally: BTreeMap<String, usize> = BTreeMap::new();
        for (t, c) in counts {
            *tally.entry(t.into()).or_default() += c;
        }
        tally.retain(|_, c| *c > 0);
        let total: usize = tally.values().sum();
        if total == 0 {
            return Err(AnalysisError::Empty);
        }
        Ok(TypeDistribution(
            tally
                .into_iter()
                .map(|(t, c)| (t, c as f64 / total as f64))
                .collect(),
        ))
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        for (t, &p) in &self.0 {
            if !p.is_finite() || p < 0.0 {
                return Err(AnalysisError::BadProbability {
                    event_type: t.clone(),
                    value: p,
                });
            }
        }
        let sum: f64 = self.0.values().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(AnalysisError::BadSum(sum));
        }
        Ok(())
    }

    pub fn check_support(&self, ontology: &Ontology) -> Result<(), AnalysisError> {
        match self.support().find(|t| ontology.get(t).is_none()) {
            Some(t) => Err(AnalysisError::UnknownType(t.to_string())),
            None => Ok(()),
        }
    }

    pub fn prob(&self, event_type: &str) -> f64 {
        self.0.get(event_type).copied().unwrap_or(0.0)
    }

    /// Types with non-zero probability.
    pub fn support(&self) -> impl Iterator<Item = &str> {
        self.0
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(t, _)| t.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(t, &p)| (t.as_str(), p))
    }
}

/// Empirical type frequencies of a list of examples.
pub fn type_distribution<S: AsRef<str>>(
    examples: impl IntoIterator<Item = S>,
) -> Result<TypeDistribution, AnalysisError> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in examples {
        *counts.entry(e.as_ref().to_string()).or_default() += 1;
    }
    TypeDistribution::from_counts(counts)
}

fn union_types<'a>(p: &'a TypeDistribution, q: &'a TypeDistribution) -> BTreeSet<&'a str> {
    p.0.keys().chain(q.0.keys()).map(String::as_str).collect()
}

/// `(1/√2) · ‖√P − √Q‖₂` over the union of both supports.
pub fn hellinger_distance(
    p: &TypeDistribution,
    q: &TypeDistribution,
) -> Result<f64, AnalysisError> {
    p.validate()?;
    q.validate()?;
    let mut sq = 0.0;
    let mut overlap = false;
    for t in union_types(p, q) {
        let (a, b) = (p.prob(t), q.prob(t));
        overlap |= a > 0.0 && b > 0.0;
        sq += (a.sqrt() - b.sqrt()).powi(2);
    }
    if !overlap {
        // Σ(√p − √q)² = Σp + Σq exactly; avoid the rounding in both sums
        return Ok(1.0);
    }
    Ok((0.5 * sq).sqrt().min(1.0))
}

/// Distance between the binary marginals "is type t" under P and Q,
/// unnormalized: in `[0, √2]`.
pub fn type_contribution(p: f64, q: f64) -> f64 {
    ((p.sqrt() - q.sqrt()).powi(2)
        + ((1.0 - p).max(0.0).sqrt() - (1.0 - q).max(0.0).sqrt()).powi(2))
    .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub rows: Vec<(String, f64)>,
    pub sum: f64,
    pub average: f64,
}

/// Per-type contributions over the union support, then their sum and mean.
pub fn per_type_distance_report(
    p: &TypeDistribution,
    q: &TypeDistribution,
) -> Result<DistanceReport, AnalysisError> {
    p.validate()?;
    q.validate()?;
    let rows: Vec<(String, f64)> = union_types(p, q)
        .into_iter()
        .map(|t| (t.to_string(), type_contribution(p.prob(t), q.prob(t))))
        .collect();
    let sum: f64 = rows.iter().map(|r| r.1).sum();
    let average = if rows.is_empty() {
        0.0
    } else {
        sum / rows.len() as f64
    };
    Ok(DistanceReport { rows, sum, average })
}

/// Per-type contributions for several samples against one reference, laid
/// out one column per strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    pub strategies: Vec<String>,
    pub event_types: Vec<String>,
    /// `values[type][strategy]`.
    pub values: Vec<Vec<f64>>,
}

impl DistanceTable {
    pub fn build(
        reference: &TypeDistribution,
        samples: &[(String, TypeDistribution)],
    ) -> Result<Self, AnalysisError> {
        reference.validate()?;
        let mut types: BTreeSet<&str> = reference.0.keys().map(String::as_str).collect();
        for (_, d) in samples {
            d.validate()?;
            types.extend(d.0.keys().map(String::as_str));
        }
        let values = types
            .iter()
            .map(|t| {
                samples
                    .iter()
                    .map(|(_, d)| type_contribution(d.prob(t), reference.prob(t)))
                    .collect()
            })
            .collect();
        Ok(DistanceTable {
            strategies: samples.iter().map(|(s, _)| s.clone()).collect(),
            event_types: types.into_iter().map(String::from).collect(),
            values,
        })
    }

    pub fn sums(&self) -> Vec<f64> {
        (0..self.strategies.len())
            .map(|j| self.values.iter().map(|row| row[j]).sum())
            .collect()
    }

    pub fn averages(&self) -> Vec<f64> {
        let n = self.event_types.len().max(1) as f64;
        self.sums().into_iter().map(|s| s / n).collect()
    }

    pub fn to_csv(&self) -> String {
        let fmt = |label: &str, vals: &[f64]| {
            let mut line = label.to_string();
            for v in vals {
                line.push_str(&format!(",{v:.4}"));
            }
            line.push('\n');
            line
        };
        let mut out = format!("event_type,{}\n", self.strategies.join(","));
        for (t, row) in self.event_types.iter().zip(&self.values) {
            out.push_str(&fmt(t, row));
        }
        out.push_str(&fmt("Sum", &self.sums()));
        out.push_str(&fmt("Average", &self.averages()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sample_size: usize,
    pub strategy: String,
    pub distance: f64,
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("sample_size,strategy,distance\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{:.6}\n",
            p.sample_size, p.strategy, p.distance
        ));
    }
    out
}
