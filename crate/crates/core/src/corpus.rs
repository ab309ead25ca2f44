//! Corpus and ontology loading, context windowing, and per-role question
//! instances.
//!
//! All offsets are character offsets (Unicode scalar values), never bytes.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("document {doc_id}")]
    InvalidSpan {
        doc_id: String,
        #[source]
        source: SpanError,
    },
    #[error("document {doc_id}: sentence [{start}, {end}) is not within the text")]
    InvalidSentence {
        doc_id: String,
        start: usize,
        end: usize,
    },
    #[error("duplicate document id {0:?}")]
    DuplicateDocument(String),
    #[error("event type {event_type:?}: role {role:?} has no question")]
    MissingQuestion { event_type: String, role: String },
    #[error("event type {event_type:?}: role {role:?} listed twice")]
    DuplicateRole { event_type: String, role: String },
    #[error("event type {0:?} defined twice")]
    DuplicateEventType(String),
    #[error("event type {event_type:?}: template has {slots} slots but {roles} roles")]
    TemplateSlots {
        event_type: String,
        slots: usize,
        roles: usize,
    },
    #[error("unknown event type {0:?}")]
    UnknownEventType(String),
    #[error("event type {event_type:?} has no role {role:?}")]
    UnknownRole { event_type: String, role: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpanError {
    #[error("empty span [{start}, {end})")]
    Empty { start: usize, end: usize },
    #[error("span [{start}, {end}) exceeds text length {len}")]
    OutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("span [{start}, {end}) reads {found:?}, record says {expected:?}")]
    TextMismatch {
        start: usize,
        end: usize,
        expected: String,
        found: String,
    },
}

/// A half-open character range of some context together with its text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Span {
    pub fn new(start: usize, end: usize, text: impl Into<String>) -> Self {
        Span {
            start,
            end,
            text: text.into(),
        }
    }

    /// Builds the span covering `[start, end)` of `context`.
    pub fn from_context(context: &str, start: usize, end: usize) -> Result<Self, SpanError> {
        if start >= end {
            return Err(SpanError::Empty { start, end });
        }
        let text = char_slice(context, start, end).ok_or(SpanError::OutOfRange {
            start,
            end,
            len: context.chars().count(),
        })?;
        Ok(Span::new(start, end, text))
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, context: &str) -> Result<(), SpanError> {
        let found = Span::from_context(context, self.start, self.end)?;
        if found.text != self.text {
            return Err(SpanError::TextMismatch {
                start: self.start,
                end: self.end,
                expected: self.text.clone(),
                found: found.text,
            });
        }
        Ok(())
    }

    fn shifted_left(&self, by: usize) -> Span {
        Span::new(self.start - by, self.end - by, self.text.clone())
    }
}

/// The substring between character offsets `start` and `end`, if in range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let lo = char_to_byte(text, start)?;
    let hi = char_to_byte(text, end)?;
    Some(&text[lo..hi])
}

fn char_to_byte(text: &str, offset: usize) -> Option<usize> {
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .nth(offset)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub role: String,
    #[serde(flatten)]
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMention {
    #[serde(rename = "type")]
    pub event_type: String,
    pub trigger: Span,
    #[serde(default)]
    pub arguments: Vec<Argument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    #[serde(default)]
    pub sentences: Vec<[usize; 2]>,
    #[serde(default)]
    pub events: Vec<EventMention>,
}

impl Document {
    fn validate(&mut self) -> Result<(), CorpusError> {
        let len = self.text.chars().count();
        for &[start, end] in &self.sentences {
            if start >= end || end > len {
                return Err(CorpusError::InvalidSentence {
                    doc_id: self.doc_id.clone(),
                    start,
                    end,
                });
            }
        }
        for event in &self.events {
            let spans =
                std::iter::once(&event.trigger).chain(event.arguments.iter().map(|a| &a.span));
            for span in spans {
                span.validate(&self.text)
                    .map_err(|source| CorpusError::InvalidSpan {
                        doc_id: self.doc_id.clone(),
                        source,
                    })?;
            }
        }
        self.events
            .sort_by_key(|e| (e.trigger.start, e.trigger.end));
        Ok(())
    }
}

/// Stable identifier of the `index`-th event (in trigger order) of a document.
pub fn event_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}:{index}")
}

/// Identifier of the question instance for `role` of an event.
pub fn instance_id(event_id: &str, role: &str) -> String {
    format!("{event_id}:{role}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(mut documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for doc in &mut documents {
            if !seen.insert(doc.doc_id.clone()) {
                return Err(CorpusError::DuplicateDocument(doc.doc_id.clone()));
            }
            doc.validate()?;
        }
        Ok(Corpus { documents })
    }

    /// Iterates `(event_id, document, event)` in document then trigger order.
    pub fn events(&self) -> impl Iterator<Item = (String, &Document, &EventMention)> {
        self.documents.iter().flat_map(|doc| {
            doc.events
                .iter()
                .enumerate()
                .map(move |(i, ev)| (event_id(&doc.doc_id, i), doc, ev))
        })
    }

    pub fn n_events(&self) -> usize {
        self.documents.iter().map(|d| d.events.len()).sum()
    }
}

/// Loads a line-delimited corpus file, validating every span and sorting
/// each document's events by trigger start.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    Corpus::new(jsonl::read_records(path)?)
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<(), CorpusError> {
    Ok(jsonl::write(path, &corpus.documents)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleDef {
    pub name: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTypeDef {
    #[serde(default)]
    pub template: String,
    pub roles: Vec<RoleDef>,
}

impl EventTypeDef {
    pub fn role(&self, name: &str) -> Option<&RoleDef> {
        self.roles.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Deserialize)]
struct RawEventType {
    #[serde(default)]
    template: String,
    roles: Vec<RawRole>,
}

#[derive(Debug, Deserialize)]
struct RawRole {
    name: String,
    #[serde(default)]
    question: Option<String>,
}

/// Event types with their ordered roles, per-role questions and templates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    types: BTreeMap<String, EventTypeDef>,
}

impl Ontology {
    pub fn insert(&mut self, event_type: &str, def: EventTypeDef) -> Result<(), CorpusError> {
        if self.types.contains_key(event_type) {
            return Err(CorpusError::DuplicateEventType(event_type.to_string()));
        }
        let mut seen = HashSet::new();
        for role in &def.roles {
            if !seen.insert(role.name.as_str()) {
                return Err(CorpusError::DuplicateRole {
                    event_type: event_type.to_string(),
                    role: role.name.clone(),
                });
            }
            if role.question.trim().is_empty() {
                return Err(CorpusError::MissingQuestion {
                    event_type: event_type.to_string(),
                    role: role.name.clone(),
                });
            }
        }
        // An empty template means the entry only carries questions.
        if !def.template.is_empty() {
            let slots = template_slots(&def.template);
            if slots != def.roles.len() {
                return Err(CorpusError::TemplateSlots {
                    event_type: event_type.to_string(),
                    slots,
                    roles: def.roles.len(),
                });
            }
        }
        self.types.insert(event_type.to_string(), def);
        Ok(())
    }

    pub fn get(&self, event_type: &str) -> Option<&EventTypeDef> {
        self.types.get(event_type)
    }

    pub fn event_types(&self) -> impl Iterator<Item = &str> {
        self.types.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn question(&self, event_type: &str, role: &str) -> Option<&str> {
        self.get(event_type)?
            .role(role)
            .map(|r| r.question.as_str())
    }
}

/// Counts slot markers such as `[arg_1]`, `[arg1]` or `<arg1>`.
pub fn template_slots(template: &str) -> usize {
    let chars: Vec<char> = template.chars().collect();
    let mut count = 0;
    let mut i = 0;
    while i < chars.len() {
        let close = match chars[i] {
            '[' => ']',
            '<' => '>',
            _ => {
                i += 1;
                continue;
            }
        };
        let mut j = i + 1;
        if chars[j..].starts_with(&['a', 'r', 'g']) {
            j += 3;
            if chars.get(j) == Some(&'_') {
                j += 1;
            }
            let digits = chars[j..].iter().take_while(|c| c.is_ascii_digit()).count();
            if digits > 0 && chars.get(j + digits) == Some(&close) {
                count += 1;
                i = j + digits + 1;
                continue;
            }
        }
        i += 1;
    }
    count
}

/// Loads an ontology file. Each line holds an object mapping event types to
/// `{template, roles: [{name, question}]}`.
pub fn load_ontology(path: impl AsRef<Path>) -> Result<Ontology, CorpusError> {
    let mut ontology = Ontology::default();
    for raw in jsonl::read_records::<BTreeMap<String, RawEventType>>(path)? {
        for (event_type, entry) in raw {
            let mut roles = Vec::with_capacity(entry.roles.len());
            for role in entry.roles {
                let question = role
                    .question
                    .filter(|q| !q.trim().is_empty())
                    .ok_or_else(|| CorpusError::MissingQuestion {
                        event_type: event_type.clone(),
                        role: role.name.clone(),
                    })?;
                roles.push(RoleDef {
                    name: role.name,
                    question,
                });
            }
            ontology.insert(
                &event_type,
                EventTypeDef {
                    template: entry.template,
                    roles,
                },
            )?;
        }
    }
    Ok(ontology)
}

pub fn write_ontology(path: impl AsRef<Path>, ontology: &Ontology) -> Result<(), CorpusError> {
    let lines: Vec<BTreeMap<&str, &EventTypeDef>> = ontology
        .types
        .iter()
        .map(|(k, v)| BTreeMap::from([(k.as_str(), v)]))
        .collect();
    Ok(jsonl::write(path, &lines)?)
}

/// How much text around a trigger becomes the instance context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    Document,
    /// The sentence(s) overlapping the trigger.
    Sentence,
    /// A character window of the given width centred on the trigger.
    Window(usize),
}

pub const DEFAULT_WINDOW_CHARS: usize = 140;

/// A context cut out of a document with the event remapped into it.
#[derive(Debug, Clone, PartialEq)]
pub struct Windowed {
    pub context: String,
    /// Character offset of the context within the source document.
    pub offset: usize,
    pub event: EventMention,
    /// Arguments that did not fit entirely inside the context.
    pub dropped: usize,
}

/// Cuts a `max_chars` window centred on the trigger midpoint, clipped to the
/// document. When the spare width is odd the extra character goes left.
pub fn window_context(document: &Document, event: &EventMention, max_chars: usize) -> Windowed {
    let len = document.text.chars().count();
    let width = max_chars.max(event.trigger.len());
    if width >= len {
        return clip(document, event, 0, len);
    }
    let spare = width - event.trigger.len();
    let left = spare - spare / 2;
    let mut start = event.trigger.start.saturating_sub(left);
    if start + width > len {
        start = len - width;
    }
    clip(document, event, start, start + width)
}

fn sentence_bounds(document: &Document, event: &EventMention) -> (usize, usize) {
    let overlapping: Vec<_> = document
        .sentences
        .iter()
        .filter(|[s, e]| *s < event.trigger.end && event.trigger.start < *e)
        .collect();
    match (
        overlapping.iter().map(|[s, _]| *s).min(),
        overlapping.iter().map(|[_, e]| *e).max(),
    ) {
        (Some(s), Some(e)) => (s, e),
        _ => (0, document.text.chars().count()),
    }
}

pub fn cut_context(document: &Document, event: &EventMention, mode: ContextMode) -> Windowed {
    match mode {
        ContextMode::Document => clip(document, event, 0, document.text.chars().count()),
        ContextMode::Sentence => {
            let (s, e) = sentence_bounds(document, event);
            clip(document, event, s, e)
        }
        ContextMode::Window(n) => window_context(document, event, n),
    }
}

fn clip(document: &Document, event: &EventMention, start: usize, end: usize) -> Windowed {
    let context = char_slice(&document.text, start, end)
        .expect("window bounds lie within the document")
        .to_string();
    let inside = |s: &Span| s.start >= start && s.end <= end;
    let arguments: Vec<Argument> = event
        .arguments
        .iter()
        .filter(|a| inside(&a.span))
        .map(|a| Argument {
            role: a.role.clone(),
            span: a.span.shifted_left(start),
        })
        .collect();
    Windowed {
        context,
        offset: start,
        dropped: event.arguments.len() - arguments.len(),
        event: EventMention {
            event_type: event.event_type.clone(),
            trigger: event.trigger.shifted_left(start),
            arguments,
        },
    }
}

/// One (event mention, argument role) question-answering unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleInstance {
    pub id: String,
    pub doc_id: String,
    pub event_id: String,
    pub context: String,
    pub event_type: String,
    pub trigger: Span,
    pub role: String,
    pub question: String,
    #[serde(default)]
    pub gold_args: Vec<Span>,
}

impl RoleInstance {
    pub fn gold_texts(&self) -> Vec<&str> {
        self.gold_args.iter().map(|s| s.text.as_str()).collect()
    }
}

/// One instance per role of the event type, in ontology role order. Roles
/// without a filler get an instance with empty `gold_args`.
pub fn explode_qa(
    doc_id: &str,
    event_id: &str,
    event: &EventMention,
    ontology: &Ontology,
    context: &str,
) -> Result<Vec<RoleInstance>, CorpusError> {
    let def = ontology
        .get(&event.event_type)
        .ok_or_else(|| CorpusError::UnknownEventType(event.event_type.clone()))?;
    let invalid = |source| CorpusError::InvalidSpan {
        doc_id: doc_id.to_string(),
        source,
    };
    event.trigger.validate(context).map_err(invalid)?;
    for arg in &event.arguments {
        if def.role(&arg.role).is_none() {
            return Err(CorpusError::UnknownRole {
                event_type: event.event_type.clone(),
                role: arg.role.clone(),
            });
        }
        arg.span.validate(context).map_err(invalid)?;
    }
    Ok(def
        .roles
        .iter()
        .map(|role| {
            let mut gold_args: Vec<Span> = event
                .arguments
                .iter()
                .filter(|a| a.role == role.name)
                .map(|a| a.span.clone())
                .collect();
            gold_args.sort_by_key(|a| (a.start, a.end));
            RoleInstance {
                id: instance_id(event_id, &role.name),
                doc_id: doc_id.to_string(),
                event_id: event_id.to_string(),
                context: context.to_string(),
                event_type: event.event_type.clone(),
                trigger: event.trigger.clone(),
                role: role.name.clone(),
                question: role.question.clone(),
                gold_args,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstanceSet {
    pub instances: Vec<RoleInstance>,
    /// Gold arguments lost to context cutting.
    pub dropped_args: usize,
}

/// Cuts a context for every event and explodes it into role instances.
pub fn build_instances(
    corpus: &Corpus,
    ontology: &Ontology,
    mode: ContextMode,
) -> Result<InstanceSet, CorpusError> {
    let mut set = InstanceSet::default();
    for (event_id, doc, event) in corpus.events() {
        let windowed = cut_context(doc, event, mode);
        set.dropped_args += windowed.dropped;
        set.instances.extend(explode_qa(
            &doc.doc_id,
            &event_id,
            &windowed.event,
            ontology,
            &windowed.context,
        )?);
    }
    Ok(set)
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<RoleInstance>, CorpusError> {
    let instances: Vec<RoleInstance> = jsonl::read_records(path)?;
    for inst in &instances {
        let spans = std::iter::once(&inst.trigger).chain(&inst.gold_args);
        for span in spans {
            span.validate(&inst.context)
                .map_err(|source| CorpusError::InvalidSpan {
                    doc_id: inst.doc_id.clone(),
                    source,
                })?;
        }
    }
    Ok(instances)
}

pub fn write_instances(
    path: impl AsRef<Path>,
    instances: &[RoleInstance],
) -> Result<(), CorpusError> {
    Ok(jsonl::write(path, instances)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_event_types: usize,
    pub n_roles: usize,
    pub n_docs: usize,
    pub n_sentences: usize,
    pub n_events: usize,
    pub avg_events_per_doc: f64,
}

/// Published statistics of the ACE05 and WikiEvent splits, for comparing a
/// locally preprocessed copy.
pub mod reference {
    /// `(split, event types, roles, docs, sentences, avg events per doc)`.
    pub const SPLITS: [(&str, usize, usize, usize, usize, f64); 6] = [
        ("ace05/train", 33, 22, 529, 17172, 9.26),
        ("ace05/dev", 22, 22, 40, 923, 16.71),
        ("ace05/test", 31, 21, 30, 832, 10.58),
        ("wikievent/train", 49, 57, 206, 5262, 15.73),
        ("wikievent/dev", 35, 32, 20, 378, 17.25),
        ("wikievent/test", 34, 44, 20, 492, 18.25),
    ];
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut types = BTreeSet::new();
    let mut roles = BTreeSet::new();
    let mut n_events = 0;
    for doc in &corpus.documents {
        for ev in &doc.events {
            n_events += 1;
            types.insert(ev.event_type.as_str());
            roles.extend(ev.arguments.iter().map(|a| a.role.as_str()));
        }
    }
    let n_docs = corpus.documents.len();
    CorpusStats {
        n_event_types: types.len(),
        n_roles: roles.len(),
        n_docs,
        n_sentences: corpus.documents.iter().map(|d| d.sentences.len()).sum(),
        n_events,
        avg_events_per_doc: if n_docs == 0 {
            0.0
        } else {
            n_events as f64 / n_docs as f64
        },
    }
}
