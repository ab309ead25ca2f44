//! JSON request/response plumbing for the remote embedding and generation
//! services.
//!
//! Inputs are cut into batches of at most `max_batch` items. Up to
//! `concurrency` batches are in flight at once and results are reassembled in
//! input order. Retryable failures are retried `max_retries` times.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RemoteError {
    #[error("transport failure talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{endpoint} answered HTTP {status}")]
    Status { endpoint: String, status: u16 },
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl RemoteError {
    /// Transport failures and 5xx/429 responses may succeed on a later try.
    pub fn is_retryable(&self) -> bool {
        match self {
            RemoteError::Transport { .. } => true,
            RemoteError::Status { status, .. } => *status >= 500 || *status == 429,
            RemoteError::Protocol(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout_secs: f64,
    pub max_batch: usize,
    pub concurrency: usize,
    pub max_retries: u32,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: String::new(),
            timeout_secs: 30.0,
            max_batch: 32,
            concurrency: 4,
            max_retries: 2,
        }
    }
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            ..Default::default()
        }
    }
}

/// Posts a JSON body and returns the decoded JSON reply.
pub trait Transport: Send + Sync {
    fn post(&self, endpoint: &str, body: &Value) -> Result<Value, RemoteError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        HttpTransport {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    pub fn from_config(config: &RemoteConfig) -> Self {
        Self::new(Duration::from_secs_f64(config.timeout_secs.max(0.001)))
    }
}

impl Transport for HttpTransport {
    fn post(&self, endpoint: &str, body: &Value) -> Result<Value, RemoteError> {
        match self.agent.post(endpoint).send_json(body) {
            Ok(resp) => resp
                .into_json()
                .map_err(|e| RemoteError::Protocol(format!("undecodable reply: {e}"))),
            Err(ureq::Error::Status(status, _)) => Err(RemoteError::Status {
                endpoint: endpoint.to_string(),
                status,
            }),
            Err(ureq::Error::Transport(t)) => Err(RemoteError::Transport {
                endpoint: endpoint.to_string(),
                message: t.to_string(),
            }),
        }
    }
}

fn post_with_retry(
    transport: &dyn Transport,
    config: &RemoteConfig,
    body: &Value,
) -> Result<Value, RemoteError> {
    let mut attempt = 0;
    loop {
        match transport.post(&config.endpoint, body) {
            Err(e) if e.is_retryable() && attempt < config.max_retries => {
                attempt += 1;
                log::warn!("{e}; retry {attempt}/{}", config.max_retries);
                std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
            }
            other => return other,
        }
    }
}

/// Sends `items` in batches and concatenates the per-batch outputs in input
/// order. `decode` receives the reply and the batch length and must return
/// exactly that many outputs.
pub(crate) fn post_batched<T, O, E, D>(
    transport: &dyn Transport,
    config: &RemoteConfig,
    items: &[T],
    encode: E,
    decode: D,
) -> Result<Vec<O>, RemoteError>
where
    T: Sync,
    O: Send,
    E: Fn(&[T]) -> Value + Sync,
    D: Fn(Value, usize) -> Result<Vec<O>, RemoteError> + Sync,
{
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let batches: Vec<&[T]> = items.chunks(config.max_batch.max(1)).collect();
    let run = |batch: &[T]| -> Result<Vec<O>, RemoteError> {
        let reply = post_with_retry(transport, config, &encode(batch))?;
        let outputs = decode(reply, batch.len())?;
        if outputs.len() != batch.len() {
            return Err(RemoteError::Protocol(format!(
                "sent {} items, received {}",
                batch.len(),
                outputs.len()
            )));
        }
        Ok(outputs)
    };

    let mut out = Vec::with_capacity(items.len());
    for wave in batches.chunks(config.concurrency.max(1)) {
        let results: Vec<Result<Vec<O>, RemoteError>> = if wave.len() == 1 {
            vec![run(wave[0])]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = wave.iter().map(|b| scope.spawn(|| run(b))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("remote batch worker panicked"))
                    .collect()
            })
        };
        for r in results {
            out.extend(r?);
        }
    }
    Ok(out)
}

/// Pulls `key` out of a reply object as an array.
pub(crate) fn reply_array(reply: Value, key: &str) -> Result<Vec<Value>, RemoteError> {
    match reply {
        Value::Object(mut map) => match map.remove(key) {
            Some(Value::Array(items)) => Ok(items),
            _ => Err(RemoteError::Protocol(format!("reply has no {key:?} array"))),
        },
        _ => Err(RemoteError::Protocol("reply is not a JSON object".into())),
    }
}
