//! Generation backends. Decoding itself happens in an external model; this
//! module only routes input sequences to a backend and collects outputs.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::RoleInstance;
use crate::jsonl::{self, JsonlError};
use crate::prompt::{build_target, PromptError, PromptRecord, SpecialTokens};
use crate::remote::{self, HttpTransport, RemoteConfig, RemoteError, Transport};

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("no stored output for instance {0:?}")]
    ReplayMiss(String),
    #[error("no gold instance {0:?} for the oracle backend")]
    OracleMiss(String),
    #[error("request for {0:?} has an empty input sequence")]
    EmptyInput(String),
    #[error("duplicate instance id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub instance_id: String,
    pub input_seq: String,
}

impl From<&PromptRecord> for GenerationRequest {
    fn from(p: &PromptRecord) -> Self {
        GenerationRequest {
            instance_id: p.instance_id.clone(),
            input_seq: p.input_seq.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub instance_id: String,
    pub output_seq: String,
    #[serde(default)]
    pub backend_tag: String,
}

pub trait Backend {
    fn tag(&self) -> &'static str;

    /// One output per request, in request order.
    fn outputs(&self, requests: &[GenerationRequest]) -> Result<Vec<String>, GenerateError>;
}

/// Answers every request with the gold target of its instance.
pub struct OracleBackend {
    targets: HashMap<String, String>,
}

impl OracleBackend {
    pub fn new(instances: &[RoleInstance], tokens: &SpecialTokens) -> Result<Self, GenerateError> {
        let mut targets = HashMap::with_capacity(instances.len());
        for inst in instances {
            let target = build_target(&inst.gold_args, tokens)?;
            if targets.insert(inst.id.clone(), target).is_some() {
                return Err(GenerateError::DuplicateId(inst.id.clone()));
            }
        }
        Ok(OracleBackend { targets })
    }
}

impl Backend for OracleBackend {
    fn tag(&self) -> &'static str {
        "oracle"
    }

    fn outputs(&self, requests: &[GenerationRequest]) -> Result<Vec<String>, GenerateError> {
        requests
            .iter()
            .map(|r| {
                self.targets
                    .get(&r.instance_id)
                    .cloned()
                    .ok_or_else(|| GenerateError::OracleMiss(r.instance_id.clone()))
            })
            .collect()
    }
}

/// Replays outputs recorded in a `{instance_id, output_seq}` file.
pub struct ReplayBackend {
    outputs: HashMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct ReplayLine {
    instance_id: String,
    output_seq: String,
}

impl ReplayBackend {
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, GenerateError> {
        let mut outputs = HashMap::new();
        for (id, out) in pairs {
            if outputs.contains_key(&id) {
                return Err(GenerateError::DuplicateId(id));
            }
            outputs.insert(id, out);
        }
        Ok(ReplayBackend { outputs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GenerateError> {
        let lines: Vec<ReplayLine> = jsonl::read_records(path)?;
        Self::from_pairs(lines.into_iter().map(|l| (l.instance_id, l.output_seq)))
    }
}

impl Backend for ReplayBackend {
    fn tag(&self) -> &'static str {
        "replay"
    }

    fn outputs(&self, requests: &[GenerationRequest]) -> Result<Vec<String>, GenerateError> {
        requests
            .iter()
            .map(|r| {
                self.outputs
                    .get(&r.instance_id)
                    .cloned()
                    .ok_or_else(|| GenerateError::ReplayMiss(r.instance_id.clone()))
            })
            .collect()
    }
}

/// Inference service speaking `{inputs: [..]} → {outputs: [..]}`.
pub struct RemoteBackend {
    config: RemoteConfig,
    transport: Box<dyn Transport>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let transport = Box::new(HttpTransport::from_config(&config));
        RemoteBackend { config, transport }
    }

    pub fn with_transport(config: RemoteConfig, transport: Box<dyn Transport>) -> Self {
        RemoteBackend { config, transport }
    }
}

impl Backend for RemoteBackend {
    fn tag(&self) -> &'static str {
        "remote"
    }

    fn outputs(&self, requests: &[GenerationRequest]) -> Result<Vec<String>, GenerateError> {
        Ok(remote::post_batched(
            self.transport.as_ref(),
            &self.config,
            requests,
            |batch| json!({ "inputs": batch.iter().map(|r| r.input_seq.as_str()).collect::<Vec<_>>() }),
            |reply, _| {
                remote::reply_array(reply, "outputs")?
                    .into_iter()
                    .map(|v| match v {
                        Value::String(s) => Ok(s),
                        other => Err(RemoteError::Protocol(format!(
                            "output is not a string: {other}"
                        ))),
                    })
                    .collect()
            },
        )?)
    }
}

pub fn generate(
    requests: &[GenerationRequest],
    backend: &dyn Backend,
) -> Result<Vec<GenerationResult>, GenerateError> {
    if let Some(r) = requests.iter().find(|r| r.input_seq.is_empty()) {
        return Err(GenerateError::EmptyInput(r.instance_id.clone()));
    }
    let outputs = backend.outputs(requests)?;
    Ok(requests
        .iter()
        .zip(outputs)
        .map(|(r, output_seq)| GenerationResult {
            instance_id: r.instance_id.clone(),
            output_seq,
            backend_tag: backend.tag().to_string(),
        })
        .collect())
}

pub fn load_generations(path: impl AsRef<Path>) -> Result<Vec<GenerationResult>, GenerateError> {
    Ok(jsonl::read_records(path)?)
}

pub fn write_generations(
    path: impl AsRef<Path>,
    results: &[GenerationResult],
) -> Result<(), GenerateError> {
    Ok(jsonl::write(path, results)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;
    use std::sync::Mutex;

    fn req(id: &str) -> GenerationRequest {
        GenerationRequest {
            instance_id: id.into(),
            input_seq: format!("<S> {id} </S>"),
        }
    }

    fn inst(id: &str, gold: &[&str]) -> RoleInstance {
        RoleInstance {
            id: id.into(),
            doc_id: "d".into(),
            event_id: "d:0".into(),
            context: "Adam".into(),
            event_type: "T".into(),
            trigger: Span::new(0, 4, "Adam"),
            role: "R".into(),
            question: "q".into(),
            gold_args: gold.iter().map(|g| Span::new(0, 4, *g)).collect(),
        }
    }

    #[test]
    fn oracle_returns_gold_target() {
        let b = OracleBackend::new(
            &[inst("a", &["Adam"]), inst("b", &[])],
            &SpecialTokens::default(),
        )
        .unwrap();
        let out = generate(&[req("a"), req("b")], &b).unwrap();
        assert_eq!(out[0].output_seq, "<s> Adam </s>");
        assert_eq!(out[1].output_seq, "<s> </s>");
        assert_eq!(out[0].backend_tag, "oracle");
    }

    #[test]
    fn replay_is_verbatim_and_misses_are_errors() {
        let b = ReplayBackend::from_pairs([("a".to_string(), "<s>  X </s>".to_string())]).unwrap();
        assert_eq!(
            generate(&[req("a")], &b).unwrap()[0].output_seq,
            "<s>  X </s>"
        );
        match generate(&[req("a"), req("zz")], &b) {
            Err(GenerateError::ReplayMiss(id)) => assert_eq!(id, "zz"),
            other => panic!("{other:?}"),
        }
    }

    struct Canned {
        seen: Mutex<Vec<Vec<String>>>,
    }

    impl Transport for Canned {
        fn post(&self, _: &str, body: &Value) -> Result<Value, RemoteError> {
            let inputs: Vec<String> = serde_json::from_value(body["inputs"].clone()).unwrap();
            let outputs: Vec<String> = inputs
                .iter()
                .map(|i| format!("<s> {} </s>", i.len()))
                .collect();
            self.seen.lock().unwrap().push(inputs);
            Ok(json!({ "outputs": outputs }))
        }
    }

    #[test]
    fn remote_preserves_order() {
        let t = Canned {
            seen: Mutex::new(Vec::new()),
        };
        let cfg = RemoteConfig {
            max_batch: 2,
            ..RemoteConfig::new("stub")
        };
        let b = RemoteBackend::with_transport(cfg, Box::new(t));
        let reqs = [req("a"), req("bbbb"), req("cc")];
        let out = generate(&reqs, &b).unwrap();
        let expected: Vec<String> = reqs
            .iter()
            .map(|r| format!("<s> {} </s>", r.input_seq.len()))
            .collect();
        assert_eq!(
            out.iter().map(|o| o.output_seq.clone()).collect::<Vec<_>>(),
            expected
        );
        assert!(out.iter().all(|o| o.backend_tag == "remote"));
    }

    #[test]
    fn empty_input_rejected() {
        let b = ReplayBackend::from_pairs([]).unwrap();
        let bad = GenerationRequest {
            instance_id: "x".into(),
            input_seq: String::new(),
        };
        assert!(matches!(
            generate(&[bad], &b),
            Err(GenerateError::EmptyInput(_))
        ));
    }
}
