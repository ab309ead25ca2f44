//! Input and target sequence construction.
//!
//! ```text
//! input:  <S> [demo] Q_r [sep] C_r [sep] The answer is: A_r [demo] Q [sep] C' </S>
//! target: <s> a_1 [sep_arg] a_2 [sep_arg] ... </s>
//! ```
//!
//! `C'` is the context with the trigger wrapped as `[trg] trigger [trg]`.
//! Components are joined by single ASCII spaces.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{RoleInstance, Span, SpanError};
use crate::demo_store::{analogy_label, Demonstration, RetrievalResult};
use crate::jsonl::{self, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("trigger: {0}")]
    InvalidSpan(#[from] SpanError),
    #[error("{component} contains the reserved token {token:?}")]
    TokenCollision {
        component: &'static str,
        token: String,
    },
    #[error("input sequence has {len} characters, limit is {max}")]
    TooLong { len: usize, max: usize },
    #[error("special tokens must be non-empty and pairwise distinct")]
    AmbiguousTokens,
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecialTokens {
    pub demo: String,
    pub trg: String,
    pub sep: String,
    pub sep_arg: String,
    pub input_bos: String,
    pub input_eos: String,
    pub target_bos: String,
    pub target_eos: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        SpecialTokens {
            demo: "[demo]".into(),
            trg: "[trg]".into(),
            sep: "[sep]".into(),
            sep_arg: "[sep_arg]".into(),
            input_bos: "<S>".into(),
            input_eos: "</S>".into(),
            target_bos: "<s>".into(),
            target_eos: "</s>".into(),
        }
    }
}

pub const ANSWER_PREFIX: &str = "The answer is:";

impl SpecialTokens {
    pub fn all(&self) -> [&str; 8] {
        [
            &self.demo,
            &self.trg,
            &self.sep,
            &self.sep_arg,
            &self.input_bos,
            &self.input_eos,
            &self.target_bos,
            &self.target_eos,
        ]
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let all = self.all();
        for (i, a) in all.iter().enumerate() {
            if a.is_empty() || all[i + 1..].contains(a) {
                return Err(PromptError::AmbiguousTokens);
            }
        }
        Ok(())
    }

    /// First reserved token occurring in `text`.
    pub fn find_in(&self, text: &str) -> Option<&str> {
        self.all().into_iter().find(|t| text.contains(t))
    }

    fn guard(
        &self,
        component: &'static str,
        text: &str,
        allowed: &[&str],
    ) -> Result<(), PromptError> {
        for token in self.all() {
            if allowed.contains(&token) {
                continue;
            }
            // "[sep]" must not be mistaken for a prefix of "[sep_arg]".
            let hits = text.matches(token).count();
            let shadowed = if token == self.sep && self.sep_arg.contains(&self.sep) {
                text.matches(self.sep_arg.as_str()).count()
            } else {
                0
            };
            if hits > shadowed {
                return Err(PromptError::TokenCollision {
                    component,
                    token: token.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Wraps the trigger as `[trg] trigger [trg]`, leaving the rest untouched.
pub fn mark_trigger(
    context: &str,
    trigger: &Span,
    tokens: &SpecialTokens,
) -> Result<String, PromptError> {
    trigger.validate(context)?;
    let chars: Vec<char> = context.chars().collect();
    let before: String = chars[..trigger.start].iter().collect();
    let after: String = chars[trigger.end..].iter().collect();
    Ok(format!(
        "{before}{t} {text} {t}{after}",
        t = tokens.trg,
        text = trigger.text
    ))
}

/// `Q [sep] C [sep] The answer is: A`, answers joined by ` [sep_arg] `.
pub fn render_demonstration(demo: &Demonstration, tokens: &SpecialTokens) -> String {
    let joiner = format!(" {} ", tokens.sep_arg);
    format!(
        "{q} {sep} {c} {sep} {ANSWER_PREFIX} {a}",
        q = demo.question,
        c = demo.context,
        sep = tokens.sep,
        a = demo.answers.join(&joiner)
    )
}

/// `<S> [demo] D [demo] Q [sep] C </S>`, or `<S> Q [sep] C </S>` when the
/// demonstration is empty.
pub fn build_input(
    demo_text: &str,
    question: &str,
    marked_context: &str,
    tokens: &SpecialTokens,
) -> Result<String, PromptError> {
    tokens.guard("question", question, &[])?;
    tokens.guard("context", marked_context, &[&tokens.trg])?;
    tokens.guard("demonstration", demo_text, &[&tokens.sep, &tokens.sep_arg])?;
    let (bos, eos, sep) = (&tokens.input_bos, &tokens.input_eos, &tokens.sep);
    Ok(if demo_text.is_empty() {
        format!("{bos} {question} {sep} {marked_context} {eos}")
    } else {
        let d = &tokens.demo;
        format!("{bos} {d} {demo_text} {d} {question} {sep} {marked_context} {eos}")
    })
}

/// `<s> a1 [sep_arg] a2 </s>` over the argument texts in document order;
/// `<s> </s>` when there are none.
pub fn build_target(gold_args: &[Span], tokens: &SpecialTokens) -> Result<String, PromptError> {
    let mut args: Vec<&Span> = gold_args.iter().collect();
    args.sort_by_key(|s| (s.start, s.end));
    let texts: Vec<&str> = args.iter().map(|s| s.text.as_str()).collect();
    build_target_texts(&texts, tokens)
}

pub fn build_target_texts(texts: &[&str], tokens: &SpecialTokens) -> Result<String, PromptError> {
    for t in texts {
        tokens.guard("argument", t, &[])?;
    }
    let (bos, eos) = (&tokens.target_bos, &tokens.target_eos);
    if texts.is_empty() {
        return Ok(format!("{bos} {eos}"));
    }
    Ok(format!(
        "{bos} {} {eos}",
        texts.join(&format!(" {} ", tokens.sep_arg))
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPair {
    pub input_seq: String,
    pub target_seq: String,
    pub analogy_label: u8,
}

/// One line of the prompt dump consumed by external trainers and decoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub instance_id: String,
    pub demo_id: Option<String>,
    pub similarity: Option<f64>,
    pub analogy_label: u8,
    pub input_seq: String,
    pub target_seq: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptOptions {
    pub tokens: SpecialTokens,
    pub threshold: f64,
    pub max_input_chars: Option<usize>,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            tokens: SpecialTokens::default(),
            threshold: crate::demo_store::DEFAULT_ANALOGY_THRESHOLD,
            max_input_chars: None,
        }
    }
}

/// Builds the input/target pair for `instance` with its retrieved
/// demonstration, if any.
pub fn build_prompt(
    instance: &RoleInstance,
    retrieved: Option<&RetrievalResult>,
    options: &PromptOptions,
) -> Result<PromptRecord, PromptError> {
    let tokens = &options.tokens;
    let marked = mark_trigger(&instance.context, &instance.trigger, tokens)?;
    let demo_text = retrieved
        .map(|r| render_demonstration(&r.demo, tokens))
        .unwrap_or_default();
    let input_seq = build_input(&demo_text, &instance.question, &marked, tokens)?;
    if let Some(max) = options.max_input_chars {
        let len = input_seq.chars().count();
        if len > max {
            return Err(PromptError::TooLong { len, max });
        }
    }
    let label = retrieved.map_or(0, |r| {
        analogy_label(
            r.score,
            options.threshold,
            !r.demo.answers.is_empty(),
            !instance.gold_args.is_empty(),
        )
    });
    Ok(PromptRecord {
        instance_id: instance.id.clone(),
        demo_id: retrieved.map(|r| r.demo.id.clone()),
        similarity: retrieved.map(|r| r.score),
        analogy_label: label,
        input_seq,
        target_seq: build_target(&instance.gold_args, tokens)?,
    })
}

pub fn load_prompts(path: impl AsRef<Path>) -> Result<Vec<PromptRecord>, PromptError> {
    Ok(jsonl::read_records(path)?)
}

pub fn write_prompts(path: impl AsRef<Path>, prompts: &[PromptRecord]) -> Result<(), PromptError> {
    Ok(jsonl::write(path, prompts)?)
}
