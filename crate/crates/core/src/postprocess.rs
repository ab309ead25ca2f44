//! Grounding generated answers back onto context offsets.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{RoleInstance, Span};
use crate::generator::GenerationResult;
use crate::jsonl::{self, JsonlError};
use crate::prompt::SpecialTokens;

#[derive(Debug, thiserror::Error)]
pub enum PostprocessError {
    #[error("generation for {found:?} paired with instance {expected:?}")]
    IdMismatch { expected: String, found: String },
    #[error("no instance {0:?} for generation output")]
    UnknownInstance(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// A generated answer located in its instance context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArgumentPrediction {
    pub instance_id: String,
    pub role: String,
    pub span: Span,
    /// The candidate string as generated, before whitespace normalization.
    pub source_text: String,
}

/// Flat on-disk form: `{instance_id, role, start, end, text}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub role: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl From<&ArgumentPrediction> for PredictionRecord {
    fn from(p: &ArgumentPrediction) -> Self {
        PredictionRecord {
            instance_id: p.instance_id.clone(),
            role: p.role.clone(),
            start: p.span.start,
            end: p.span.end,
            text: p.span.text.clone(),
        }
    }
}

impl From<PredictionRecord> for ArgumentPrediction {
    fn from(r: PredictionRecord) -> Self {
        ArgumentPrediction {
            instance_id: r.instance_id,
            role: r.role,
            source_text: r.text.clone(),
            span: Span::new(r.start, r.end, r.text),
        }
    }
}

pub fn write_predictions(
    path: impl AsRef<Path>,
    preds: &[ArgumentPrediction],
) -> Result<(), PostprocessError> {
    let records: Vec<PredictionRecord> = preds.iter().map(PredictionRecord::from).collect();
    Ok(jsonl::write(path, &records)?)
}

pub fn load_predictions(
    path: impl AsRef<Path>,
) -> Result<Vec<ArgumentPrediction>, PostprocessError> {
    let records: Vec<PredictionRecord> = jsonl::read_records(path)?;
    Ok(records.into_iter().map(ArgumentPrediction::from).collect())
}

/// Strips the target delimiters, splits on `[sep_arg]`, trims, and drops
/// empty candidates. Anything after the end-of-target token is ignored.
pub fn split_answers(decoded: &str, tokens: &SpecialTokens) -> Vec<String> {
    let mut body = decoded.trim();
    if let Some(rest) = body.strip_prefix(tokens.target_bos.as_str()) {
        body = rest;
    }
    if let Some(pos) = body.find(tokens.target_eos.as_str()) {
        body = &body[..pos];
    }
    body.split(tokens.sep_arg.as_str())
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(String::from)
        .collect()
}

/// Context characters with whitespace runs collapsed to one space, each
/// paired with its original character offset.
fn normalize_with_offsets(text: &str) -> (Vec<char>, Vec<usize>) {
    let mut chars = Vec::new();
    let mut offsets = Vec::new();
    let mut in_space = false;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !in_space {
                chars.push(' ');
                offsets.push(i);
            }
            in_space = true;
        } else {
            chars.push(c);
            offsets.push(i);
            in_space = false;
        }
    }
    (chars, offsets)
}

fn normalize(text: &str) -> Vec<char> {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .chars()
        .collect()
}

/// Every occurrence of `candidate` in `context` under whitespace-normalized,
/// case-sensitive matching, as original-offset spans in ascending order.
pub fn find_occurrences(candidate: &str, context: &str) -> Vec<Span> {
    let needle = normalize(candidate);
    if needle.is_empty() {
        return Vec::new();
    }
    let (hay, offsets) = normalize_with_offsets(context);
    if needle.len() > hay.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len())
        .filter(|&i| hay[i..i + needle.len()] == needle[..])
        .map(|i| {
            let start = offsets[i];
            let end = offsets[i + needle.len() - 1] + 1;
            Span::from_context(context, start, end).expect("occurrence lies within context")
        })
        .collect()
}

/// The occurrence whose start is nearest the trigger start; ties go to the
/// earlier occurrence. `None` when the candidate does not occur.
pub fn locate_span(candidate: &str, context: &str, trigger: &Span) -> Option<Span> {
    find_occurrences(candidate, context)
        .into_iter()
        .min_by_key(|s| (s.start.abs_diff(trigger.start), s.start))
}

/// Splits a generation, locates each candidate, drops the unlocatable ones
/// and deduplicates identical spans.
pub fn decode_predictions(
    result: &GenerationResult,
    instance: &RoleInstance,
    tokens: &SpecialTokens,
) -> Result<Vec<ArgumentPrediction>, PostprocessError> {
    if result.instance_id != instance.id {
        return Err(PostprocessError::IdMismatch {
            expected: instance.id.clone(),
            found: result.instance_id.clone(),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for candidate in split_answers(&result.output_seq, tokens) {
        let Some(span) = locate_span(&candidate, &instance.context, &instance.trigger) else {
            log::debug!(
                "{}: discarding ungrounded candidate {candidate:?}",
                instance.id
            );
            continue;
        };
        if seen.insert((span.start, span.end)) {
            out.push(ArgumentPrediction {
                instance_id: instance.id.clone(),
                role: instance.role.clone(),
                span,
                source_text: candidate,
            });
        }
    }
    Ok(out)
}

/// [`decode_predictions`] over a whole generation file, looking instances up
/// by id.
pub fn decode_all(
    results: &[GenerationResult],
    instances: &[RoleInstance],
    tokens: &SpecialTokens,
) -> Result<Vec<ArgumentPrediction>, PostprocessError> {
    let by_id: std::collections::HashMap<&str, &RoleInstance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut out = Vec::new();
    for r in results {
        let inst = by_id
            .get(r.instance_id.as_str())
            .ok_or_else(|| PostprocessError::UnknownInstance(r.instance_id.clone()))?;
        out.extend(decode_predictions(r, inst, tokens)?);
    }
    Ok(out)
}
