//! Text-generation client: the one external dependency of the pipeline.
//!
//! Both the adversarial candidate generator and the remote answer generator
//! speak the same minimal HTTP protocol — request `{model, prompt, n,
//! temperature}`, response `{choices: [{text}]}` — so any OpenAI-compatible
//! completion endpoint works. Everything else in the crate is deterministic;
//! this module fences off the only nondeterministic boundary and audits it.
//!
//! The API key is read from an environment variable (named in the settings),
//! never from a flag or config value, so it cannot leak into shell history,
//! run manifests, or audit logs.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Connection settings for the completion endpoint. `endpoint: None` means
/// no remote is configured; pipelines then require the deterministic mock
/// components instead.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientSettings {
    /// Completion URL, e.g. `https://api.example.com/v1/completions`.
    pub endpoint: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub temperature: f64,
    /// Completions requested per call (`n` in the request body).
    pub completions_per_round: u32,
    /// Maximum concurrent in-flight requests across all worker threads.
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    /// Base delay for exponential backoff between retry attempts. Kept
    /// configurable so tests exercising the retry path stay fast.
    pub backoff_ms: u64,
    /// JSONL audit file receiving every raw prompt and completion.
    pub audit_log: Option<PathBuf>,
}

impl Default for ClientSettings {
    fn default() -> Self {
        ClientSettings {
            endpoint: None,
            model: "gpt-4o-mini".to_string(),
            api_key_env: "KGPOISON_API_KEY".to_string(),
            temperature: 0.7,
            completions_per_round: 1,
            max_in_flight: 4,
            timeout_secs: 60,
            backoff_ms: 250,
            audit_log: None,
        }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    n: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

/// Anything that can turn a prompt into completions. Implemented by the
/// HTTP client here and by scripted stand-ins in tests.
pub trait TextGenClient: Send + Sync {
    /// Request `n` completions for `prompt`, returning their raw texts.
    fn complete(&self, prompt: &str, n: u32) -> Result<Vec<String>>;
}

/// Counting semaphore bounding concurrent requests. Plain Mutex + Condvar:
/// the blocking client has no async runtime to lean on.
struct InFlightGate {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlightGate {
    fn new(max: usize) -> Self {
        InFlightGate {
            max: max.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().unwrap();
        while *active >= self.max {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        InFlightGuard { gate: self }
    }
}

struct InFlightGuard<'a> {
    gate: &'a InFlightGate,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.gate.active.lock().unwrap();
        *active -= 1;
        self.gate.freed.notify_one();
    }
}

/// Blocking HTTP client with bounded retries, bounded concurrency, and a
/// JSONL audit trail of every exchange.
pub struct HttpTextGenClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
    temperature: f64,
    backoff_ms: u64,
    gate: InFlightGate,
    audit: Option<Mutex<std::fs::File>>,
}

/// Redacts the API key: the one field that must never reach logs or panics.
impl std::fmt::Debug for HttpTextGenClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTextGenClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &"<redacted>")
            .finish_non_exhaustive()
    }
}

const MAX_ATTEMPTS: usize = 3;

impl HttpTextGenClient {
    /// Build a client from settings, reading the API key from the named
    /// environment variable. Fails fast on missing endpoint or key so the
    /// first question is not the one to discover a misconfiguration.
    pub fn new(settings: &ClientSettings) -> Result<Self> {
        let endpoint = settings
            .endpoint
            .clone()
            .ok_or_else(|| Error::InvalidConfig("remote generation requires an endpoint".into()))?;
        let api_key = std::env::var(&settings.api_key_env).map_err(|_| {
            Error::InvalidConfig(format!(
                "API key environment variable {} is not set",
                settings.api_key_env
            ))
        })?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| Error::Client {
                attempts: 0,
                message: e.to_string(),
            })?;
        let audit = match &settings.audit_log {
            Some(path) => {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                Some(Mutex::new(
                    OpenOptions::new().create(true).append(true).open(path)?,
                ))
            }
            None => None,
        };
        Ok(HttpTextGenClient {
            http,
            endpoint,
            model: settings.model.clone(),
            api_key,
            temperature: settings.temperature,
            backoff_ms: settings.backoff_ms,
            gate: InFlightGate::new(settings.max_in_flight),
            audit,
        })
    }

    fn audit_record(&self, record: serde_json::Value) {
        if let Some(file) = &self.audit {
            let mut file = file.lock().unwrap();
            // Audit failures must not fail the run; the audit log is a
            // reproducibility aid, not a correctness dependency.
            let _ = serde_json::to_writer(&mut *file, &record)
                .map_err(std::io::Error::other)
                .and_then(|_| file.write_all(b"\n"));
        }
    }

    fn try_once(&self, prompt: &str, n: u32) -> std::result::Result<Vec<String>, String> {
        let request = CompletionRequest {
            model: &self.model,
            prompt,
            n,
            temperature: self.temperature,
        };
        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&request)
            .send()
            .map_err(|e| format!("transport: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("status {status}"));
        }
        let body: CompletionResponse = response
            .json()
            .map_err(|e| format!("malformed response body: {e}"))?;
        Ok(body.choices.into_iter().map(|c| c.text).collect())
    }
}

impl TextGenClient for HttpTextGenClient {
    fn complete(&self, prompt: &str, n: u32) -> Result<Vec<String>> {
        let _slot = self.gate.acquire();
        self.audit_record(serde_json::json!({
            "event": "request",
            "model": self.model,
            "prompt": prompt,
            "n": n,
            "temperature": self.temperature,
        }));
        let mut last_error = String::new();
        for attempt in 1..=MAX_ATTEMPTS {
            match self.try_once(prompt, n) {
                Ok(texts) => {
                    self.audit_record(serde_json::json!({
                        "event": "response",
                        "attempt": attempt,
                        "completions": texts,
                    }));
                    return Ok(texts);
                }
                Err(message) => {
                    self.audit_record(serde_json::json!({
                        "event": "error",
                        "attempt": attempt,
                        "message": message,
                    }));
                    last_error = message;
                    if attempt < MAX_ATTEMPTS {
                        std::thread::sleep(Duration::from_millis(self.backoff_ms << (attempt - 1)));
                    }
                }
            }
        }
        Err(Error::Client {
            attempts: MAX_ATTEMPTS,
            message: last_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn gate_bounds_concurrent_holders() {
        let gate = Arc::new(InFlightGate::new(2));
        let peak = Arc::new(AtomicUsize::new(0));
        let current = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let gate = Arc::clone(&gate);
            let peak = Arc::clone(&peak);
            let current = Arc::clone(&current);
            handles.push(std::thread::spawn(move || {
                let _slot = gate.acquire();
                let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                current.fetch_sub(1, Ordering::SeqCst);
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn missing_endpoint_or_key_fails_fast() {
        let settings = ClientSettings::default();
        assert!(matches!(
            HttpTextGenClient::new(&settings),
            Err(Error::InvalidConfig(_))
        ));
        let settings = ClientSettings {
            endpoint: Some("http://127.0.0.1:1/v1/completions".to_string()),
            api_key_env: "KGPOISON_TEST_KEY_THAT_IS_NOT_SET".to_string(),
            ..ClientSettings::default()
        };
        let err = HttpTextGenClient::new(&settings).unwrap_err();
        assert!(err
            .to_string()
            .contains("KGPOISON_TEST_KEY_THAT_IS_NOT_SET"));
    }

    #[test]
    fn request_body_shape_is_stable() {
        let request = CompletionRequest {
            model: "m",
            prompt: "p",
            n: 2,
            temperature: 0.5,
        };
        let value = serde_json::to_value(&request).unwrap();
        assert_eq!(
            value,
            serde_json::json!({"model": "m", "prompt": "p", "n": 2, "temperature": 0.5})
        );
        let body: CompletionResponse =
            serde_json::from_str(r#"{"choices":[{"text":"a"},{"text":"b"}]}"#).unwrap();
        let texts: Vec<String> = body.choices.into_iter().map(|c| c.text).collect();
        assert_eq!(texts, vec!["a", "b"]);
    }
}
