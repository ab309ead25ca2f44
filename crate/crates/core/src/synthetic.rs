//! Seeded generators for corpora, sampling populations and offline
//! embeddings. Used by the examples, the tests and for smoke runs without a
//! licensed corpus.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{
    Argument, Corpus, Document, EventMention, EventTypeDef, Ontology, RoleDef, Span,
};
use crate::embedding::{EmbeddingError, EmbeddingProvider, EmbeddingStore, EmbeddingVector};
use crate::sampler::allocate_proportional;

enum Piece {
    Lit(&'static str),
    Trigger(&'static str),
    Arg(&'static str),
}

struct TypeSpec {
    name: &'static str,
    roles: &'static [(&'static str, &'static str)],
    pieces: &'static [Piece],
}

use Piece::{Arg, Lit, Trigger};

const TYPES: [TypeSpec; 4] = [
    TypeSpec {
        name: "Personnel:Nominate",
        roles: &[
            ("Agent", "Who is the nominating agent?"),
            ("Person", "Who are nominated?"),
            ("Position", "What is the position?"),
        ],
        pieces: &[
            Arg("Person"),
            Lit(" was "),
            Trigger("nominated"),
            Lit(" by "),
            Arg("Agent"),
            Lit(" as "),
            Arg("Position"),
            Lit("."),
        ],
    },
    TypeSpec {
        name: "Justice:Convict",
        roles: &[
            ("JudgeCourt", "Who is the judge or court?"),
            ("Defendant", "Who is convicted?"),
            ("Crime", "What is the crime?"),
            ("Place", "Where does the conviction take place?"),
        ],
        pieces: &[
            Arg("JudgeCourt"),
            Lit(" "),
            Trigger("convicted"),
            Lit(" "),
            Arg("Defendant"),
            Lit(" of "),
            Arg("Crime"),
            Lit(" in "),
            Arg("Place"),
            Lit("."),
        ],
    },
    TypeSpec {
        name: "Movement:Transport",
        roles: &[
            ("Artifact", "Who or what is transported?"),
            ("Origin", "Where is the transport from?"),
            ("Destination", "Where is the transport to?"),
        ],
        pieces: &[
            Arg("Artifact"),
            Lit(" "),
            Trigger("traveled"),
            Lit(" from "),
            Arg("Origin"),
            Lit(" to "),
            Arg("Destination"),
            Lit("."),
        ],
    },
    TypeSpec {
        name: "Conflict:Attack",
        roles: &[
            ("Attacker", "Who is the attacker?"),
            ("Target", "Who or what is attacked?"),
            ("Place", "Where does the attack take place?"),
        ],
        pieces: &[
            Arg("Attacker"),
            Lit(" "),
            Trigger("attacked"),
            Lit(" "),
            Arg("Target"),
            Lit(" near "),
            Arg("Place"),
            Lit("."),
        ],
    },
];

const SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ra", "ten", "vo", "zu", "shi", "dor", "ne", "bel", "qua",
];

fn capitalized(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Names that never occur inside one another: the trailing three-letter code
/// is unique per name and always followed by a non-letter.
struct NameGen {
    next: usize,
}

impl NameGen {
    fn name(&mut self, rng: &mut ChaCha8Rng) -> String {
        let n = self.next;
        self.next += 1;
        assert!(n < 26 * 26 * 26, "name space exhausted");
        let code: String = [n / 676, (n / 26) % 26, n % 26]
            .iter()
            .map(|&d| (b'A' + d as u8) as char)
            .collect();
        let first: String = (0..rng.gen_range(1..=2))
            .map(|_| *SYLLABLES.choose(rng).unwrap())
            .collect();
        let last = SYLLABLES.choose(rng).unwrap();
        format!("{} {}{code}", capitalized(&first), capitalized(last))
    }
}

/// The four-type ontology the synthetic corpora are drawn from.
pub fn demo_ontology() -> Ontology {
    let mut o = Ontology::default();
    for t in &TYPES {
        let def = EventTypeDef {
            template: String::new(),
            roles: t
                .roles
                .iter()
                .map(|(name, q)| RoleDef {
                    name: name.to_string(),
                    question: q.to_string(),
                })
                .collect(),
        };
        o.insert(t.name, def).expect("static ontology is valid");
    }
    o
}

/// `n_events` events over documents of one to three sentences each. Every
/// argument text is unique within the corpus and occurs verbatim in its
/// document; roughly one role in five is left unfilled.
pub fn synthetic_corpus(n_events: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = NameGen { next: 0 };
    let mut documents = Vec::new();
    let mut remaining = n_events;
    while remaining > 0 {
        let in_doc = rng.gen_range(1..=3).min(remaining);
        remaining -= in_doc;
        let mut text = String::new();
        let mut len = 0usize;
        let mut sentences = Vec::new();
        let mut events = Vec::new();
        for s in 0..in_doc {
            if s > 0 {
                text.push(' ');
                len += 1;
            }
            let spec = TYPES.choose(&mut rng).unwrap();
            let start = len;
            let mut trigger = None;
            let mut arguments = Vec::new();
            for piece in spec.pieces {
                let (word, role) = match piece {
                    Lit(w) => (w.to_string(), None),
                    Trigger(w) => (w.to_string(), None),
                    Arg(role) if rng.gen_bool(0.8) => (names.name(&mut rng), Some(*role)),
                    Arg(_) => ("someone".to_string(), None),
                };
                let n = word.chars().count();
                if let Trigger(_) = piece {
                    trigger = Some(Span::new(len, len + n, word.clone()));
                }
                if let Some(role) = role {
                    arguments.push(Argument {
                        role: role.to_string(),
                        span: Span::new(len, len + n, word.clone()),
                    });
                }
                text.push_str(&word);
                len += n;
            }
            sentences.push([start, len]);
            events.push(EventMention {
                event_type: spec.name.to_string(),
                trigger: trigger.expect("every template has a trigger"),
                arguments,
            });
        }
        documents.push(Document {
            doc_id: format!("doc{:04}", documents.len()),
            text,
            sentences,
            events,
        });
    }
    Corpus::new(documents).expect("generated spans are consistent")
}

/// A sampling population: one event per id with a known type, context and
/// trigger embeddings.
pub struct Population {
    pub ids: Vec<String>,
    pub event_types: Vec<String>,
    pub embeddings: EmbeddingStore,
}

impl Population {
    /// One single-event document per member, so that event ids of the
    /// corpus (`"<doc>:0"`) are the population ids.
    pub fn to_corpus(&self) -> Corpus {
        let docs = self
            .ids
            .iter()
            .zip(&self.event_types)
            .map(|(id, t)| {
                let doc_id = id
                    .strip_suffix(":0")
                    .expect("population ids are event ids")
                    .to_string();
                let text = format!("event of type {t}");
                Document {
                    doc_id,
                    sentences: vec![[0, text.chars().count()]],
                    events: vec![EventMention {
                        event_type: t.clone(),
                        trigger: Span::new(0, 5, "event"),
                        arguments: Vec::new(),
                    }],
                    text,
                }
            })
            .collect();
        Corpus::new(docs).expect("generated documents are valid")
    }

    /// Ontology with one role-less entry per population type.
    pub fn ontology(&self) -> Ontology {
        let mut o = Ontology::default();
        let mut types: Vec<&String> = self.event_types.iter().collect();
        types.sort();
        types.dedup();
        for t in types {
            o.insert(
                t,
                EventTypeDef {
                    template: String::new(),
                    roles: Vec::new(),
                },
            )
            .expect("type names are unique");
        }
        o
    }
}

const POPULATION_DIM: usize = 16;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn around(center: &[f64], spread: f64, rng: &mut ChaCha8Rng) -> EmbeddingVector {
    center
        .iter()
        .map(|c| c + spread * gaussian(rng))
        .collect::<Vec<_>>()
        .into()
}

/// `n` events over `n_types` types with Zipf-like type frequencies. Trigger
/// vectors cluster tightly by type; context vectors cluster only by groups of
/// three types, so the type is recoverable from the joint representation but
/// not from context alone.
pub fn synthetic_population(n: usize, n_types: usize, seed: u64) -> Population {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<usize> = (1..=n_types).map(|r| (1e6 / r as f64) as usize).collect();
    let counts = allocate_proportional(&weights, n).expect("n <= total weight");

    let center = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..POPULATION_DIM).map(|_| 10.0 * gaussian(rng)).collect()
    };
    let trigger_centers: Vec<Vec<f64>> = (0..n_types).map(|_| center(&mut rng)).collect();
    let context_centers: Vec<Vec<f64>> =
        (0..n_types.div_ceil(3)).map(|_| center(&mut rng)).collect();

    let mut types: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(t, &c)| std::iter::repeat_n(t, c))
        .collect();
    types.shuffle(&mut rng);

    let mut pop = Population {
        ids: Vec::with_capacity(n),
        event_types: Vec::with_capacity(n),
        embeddings: EmbeddingStore::new(),
    };
    for (i, t) in types.into_iter().enumerate() {
        let id = format!("p{i:05}:0");
        let ctx = around(&context_centers[t / 3], 1.0, &mut rng);
        let trg = around(&trigger_centers[t], 1.0, &mut rng);
        pop.embeddings.insert(&id, ctx).expect("fixed dimension");
        pop.embeddings
            .insert_trigger(&id, trg)
            .expect("fixed dimension");
        pop.event_types.push(format!("Type{t:02}"));
        pop.ids.push(id);
    }
    pop
}

/// Signed feature hashing of lowercase alphanumeric tokens, L2-normalized.
/// Texts without tokens map to a fixed unit vector.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: 256 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

impl HashingEmbedder {
    pub fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dim];
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = fnv1a(token.to_lowercase().as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v.into()
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
