//! Talk to embedding and generation services over HTTP. A tiny in-process
//! server stands in for both: it answers `{texts}` with `{vectors}` and
//! `{inputs}` with `{outputs}`.
//!
//! ```bash
//! cargo run --example remote_backends
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;

use argqa::embedding::{EmbeddingProvider, RemoteEmbedder};
use argqa::generator::{generate, GenerationRequest, RemoteBackend};
use argqa::remote::RemoteConfig;
use serde_json::{json, Value};

fn reply(body: &Value) -> Value {
    if let Some(texts) = body["texts"].as_array() {
        let vectors: Vec<Vec<f64>> = texts
            .iter()
            .map(|t| {
                let s = t.as_str().unwrap_or_default();
                vec![s.len() as f64, s.matches(' ').count() as f64 + 1.0]
            })
            .collect();
        json!({ "vectors": vectors })
    } else {
        let outputs: Vec<String> = body["inputs"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|i| {
                format!(
                    "<s> {} </s>",
                    i.as_str()
                        .unwrap_or_default()
                        .split_whitespace()
                        .nth(1)
                        .unwrap_or("")
                )
            })
            .collect();
        json!({ "outputs": outputs })
    }
}

/// Serves `requests` POSTs, then stops. Returns the base URL.
fn serve(requests: usize) -> std::io::Result<String> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let url = format!("http://{}", listener.local_addr()?);
    std::thread::spawn(move || {
        for stream in listener.incoming().take(requests).flatten() {
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            let mut line = String::new();
            while reader.read_line(&mut line).is_ok_and(|n| n > 2) {
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                }
                line.clear();
            }
            let mut body = vec![0; length];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            let answer = reply(&serde_json::from_slice(&body).unwrap_or(Value::Null)).to_string();
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{answer}",
                answer.len()
            );
        }
    });
    Ok(url)
}

pub fn run_example() -> anyhow::Result<()> {
    let texts: Vec<String> = [
        "Who is convicted? [sep] The court convicted Vell.",
        "Who is the attacker?",
    ]
    .map(String::from)
    .to_vec();
    let requests: Vec<GenerationRequest> = ["Adam", "Vell", "Rebels"]
        .iter()
        .enumerate()
        .map(|(i, a)| GenerationRequest {
            instance_id: format!("q{i}"),
            input_seq: format!("<S> {a} [sep] ... </S>"),
        })
        .collect();

    // one embedding request, two generation batches
    let url = serve(3)?;
    let embedder = RemoteEmbedder::new(RemoteConfig::new(format!("{url}/embed")));
    for (t, v) in texts.iter().zip(embedder.embed(&texts)?) {
        println!("{:?} -> {:?}", t, v.as_slice());
    }

    let config = RemoteConfig {
        max_batch: 2,
        ..RemoteConfig::new(format!("{url}/generate"))
    };
    let outputs = generate(&requests, &RemoteBackend::new(config))?;
    for o in &outputs {
        println!("{} [{}] {}", o.instance_id, o.backend_tag, o.output_seq);
    }
    anyhow::ensure!(outputs[2].output_seq == "<s> Rebels </s>");
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
