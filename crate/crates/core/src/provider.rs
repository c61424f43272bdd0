//! JSON-over-HTTP clients for an external embedding and summarization service.
//!
//! Embed: `{"texts": [..]}` answered with `{"vectors": [[..], ..]}`.
//! Summarize: `{"text": .., "max_sentences": n}` answered with `{"summary": ..}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SummarizeRequest<'a> {
    text: &'a str,
    max_sentences: usize,
}

#[derive(Deserialize)]
struct SummarizeResponse {
    summary: String,
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into()
}

fn post<Req: Serialize, Resp: serde::de::DeserializeOwned>(
    agent: &ureq::Agent,
    endpoint: &str,
    body: &Req,
) -> Result<Resp> {
    let mut response = agent
        .post(endpoint)
        .send_json(body)
        .map_err(|e| Error::Provider(format!("{endpoint}: {e}")))?;
    response
        .body_mut()
        .read_json::<Resp>()
        .map_err(|e| Error::Provider(format!("{endpoint}: invalid response: {e}")))
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            agent: agent(timeout),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// One vector per input text, all of one finite dimension.
    pub fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = post(&self.agent, &self.endpoint, &EmbedRequest { texts })?;
        if resp.vectors.len() != texts.len() {
            return Err(Error::Provider(format!(
                "{}: sent {} texts, received {} vectors",
                self.endpoint,
                texts.len(),
                resp.vectors.len()
            )));
        }
        let dim = resp.vectors[0].len();
        if dim == 0
            || resp
                .vectors
                .iter()
                .any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Provider(format!(
                "{}: vectors are empty, ragged or non-finite",
                self.endpoint
            )));
        }
        Ok(resp.vectors)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteSummarizer {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteSummarizer {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            agent: agent(timeout),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn summarize(&self, text: &str, max_sentences: usize) -> Result<String> {
        let resp: SummarizeResponse = post(
            &self.agent,
            &self.endpoint,
            &SummarizeRequest { text, max_sentences },
        )?;
        if resp.summary.trim().is_empty() {
            return Err(Error::Provider(format!("{}: empty summary", self.endpoint)));
        }
        Ok(resp.summary)
    }
}

/// Minimal single-threaded HTTP responder used by tests in this crate and by
/// integration tests that probe the wire contracts.
#[doc(hidden)]
pub mod testing {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;
    use std::thread;

    /// Serve requests on an ephemeral local port. `handler` maps a parsed JSON
    /// body to `(status, response body)`. Each received body is also sent on
    /// the returned channel. The server thread lives until the process exits.
    pub fn serve<F>(handler: F) -> (String, mpsc::Receiver<serde_json::Value>)
    where
        F: Fn(&serde_json::Value) -> (u16, String) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let url = format!("http://{}/", listener.local_addr().expect("addr"));
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().expect("clone"));
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap_or(0);
                        }
                    }
                }
                let mut body = vec![0u8; len];
                if reader.read_exact(&mut body).is_err() {
                    continue;
                }
                let json: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
                let (status, out) = handler(&json);
                let _ = tx.send(json);
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{out}",
                    out.len()
                );
            }
        });
        (url, rx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn embed_contract() {
        let (url, rx) = testing::serve(|body| {
            let n = body["texts"].as_array().map_or(0, Vec::len);
            let vectors: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 1.0]).collect();
            (200, json!({ "vectors": vectors }).to_string())
        });
        let e = RemoteEmbedder::new(url, DEFAULT_TIMEOUT);
        let v = e.embed(&["a", "b"]).unwrap();
        assert_eq!(v, [vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(rx.recv().unwrap(), json!({"texts": ["a", "b"]}));
    }

    #[test]
    fn embed_count_mismatch_is_provider_error() {
        let (url, _rx) = testing::serve(|_| (200, json!({"vectors": [[1.0, 2.0]]}).to_string()));
        let e = RemoteEmbedder::new(url, DEFAULT_TIMEOUT);
        assert!(matches!(e.embed(&["a", "b"]), Err(Error::Provider(_))));
    }

    #[test]
    fn summarize_contract() {
        let (url, rx) = testing::serve(|body| {
            let text = body["text"].as_str().unwrap_or("");
            (200, json!({ "summary": text.to_uppercase() }).to_string())
        });
        let s = RemoteSummarizer::new(url, DEFAULT_TIMEOUT);
        assert_eq!(s.summarize("one. two.", 1).unwrap(), "ONE. TWO.");
        assert_eq!(rx.recv().unwrap(), json!({"text": "one. two.", "max_sentences": 1}));
    }

    #[test]
    fn http_failure_and_bad_json_are_provider_errors() {
        let (url, _rx) = testing::serve(|_| (500, "{}".to_string()));
        let s = RemoteSummarizer::new(url, DEFAULT_TIMEOUT);
        assert!(matches!(s.summarize("x", 1), Err(Error::Provider(_))));
        let (url, _rx) = testing::serve(|_| (200, "not json".to_string()));
        let s = RemoteSummarizer::new(url, DEFAULT_TIMEOUT);
        assert!(matches!(s.summarize("x", 1), Err(Error::Provider(_))));
        let dead = RemoteSummarizer::new("http://127.0.0.1:9/", Duration::from_secs(2));
        assert!(matches!(dead.summarize("x", 1), Err(Error::Provider(_))));
    }
}
