use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROMPT_INSTRUCTION: &str = "Paraphrase the sentence below";
pub const URL_ENV: &str = "LANGSUP_PARAPHRASE_URL";
pub const TOKEN_ENV: &str = "LANGSUP_PARAPHRASE_TOKEN";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextPair {
    pub input: String,
    pub output: String,
}

/// The four in-context demonstrations used by default.
pub fn default_context_pairs() -> Vec<ContextPair> {
    [
        (
            "A little boy standing next to a dog in a field.",
            "A dog parked filled with people and a bunch of different dogs.",
        ),
        ("Some people are on the sandy beach flying kites.", "a sunny day at the beach with colorful kites in the sky"),
        ("A living room filled with furniture and a table.", "A living room with a nice couch and a coffee table."),
        ("A couple of people on a surfboard in the ocean.", "A dog is lying on the surfboard as it surfs on a wave."),
    ]
    .into_iter()
    .map(|(i, o)| ContextPair { input: i.into(), output: o.into() })
    .collect()
}

/// One few-shot paraphrase query. Temperature and stop sequences have no
/// defaults and must be chosen by the caller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseRequest {
    pub context_pairs: Vec<ContextPair>,
    pub target: String,
    pub samples: usize,
    pub temperature: f64,
    pub stop: Vec<String>,
}

impl ParaphraseRequest {
    pub fn new(target: impl Into<String>, samples: usize, temperature: f64, stop: Vec<String>) -> Self {
        Self { context_pairs: default_context_pairs(), target: target.into(), samples, temperature, stop }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_pairs.len() != 4 {
            return Err(Error::Parameter(format!(
                "expected exactly 4 context pairs, got {}",
                self.context_pairs.len()
            )));
        }
        if self.samples == 0 {
            return Err(Error::Parameter("samples must be >= 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Parameter(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        Ok(())
    }

    /// Four demonstration blocks separated by blank lines, then the target
    /// block ending in a bare `Output:`.
    pub fn prompt(&self) -> String {
        let mut s = String::new();
        for p in &self.context_pairs {
            s.push_str(&format!("{PROMPT_INSTRUCTION}\nInput: {}\nOutput: {}\n\n", p.input, p.output));
        }
        s.push_str(&format!("{PROMPT_INSTRUCTION}\nInput: {}\nOutput:", self.target));
        s
    }
}

/// Wire format of a completion call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub n: usize,
    pub stop: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub completions: Vec<String>,
}

/// Anything that can sample text completions.
pub trait CompletionBackend: Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>>;
}

/// Samples paraphrases and keeps the trimmed first line of each non-empty
/// completion.
pub fn remote_paraphrase(req: &ParaphraseRequest, backend: &dyn CompletionBackend) -> Result<Vec<String>> {
    req.validate()?;
    let wire = CompletionRequest {
        prompt: req.prompt(),
        temperature: req.temperature,
        n: req.samples,
        stop: req.stop.clone(),
    };
    let mut out = Vec::with_capacity(req.samples);
    for c in backend.complete(&wire)? {
        let line = c.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
        if line.is_empty() {
            log::warn!("skipping empty paraphrase completion");
        } else {
            out.push(line.to_string());
        }
    }
    Ok(out)
}

#[derive(Debug)]
struct Gate {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut n = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// JSON-over-HTTP completion endpoint with bearer auth, bounded
/// concurrency, per-request timeout and retries.
#[derive(Debug)]
pub struct HttpEndpoint {
    pub url: String,
    pub token: Option<String>,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub retry_delay: Duration,
    agent: ureq::Agent,
    gate: Gate,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration, max_in_flight: usize) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self {
            url: url.into(),
            token,
            timeout,
            max_attempts: 3,
            retry_delay: Duration::from_millis(250),
            agent,
            gate: Gate { limit: max_in_flight.max(1), active: Mutex::new(0), freed: Condvar::new() },
        }
    }

    /// Endpoint from the environment; `None` when no URL is configured.
    pub fn from_env(timeout: Duration, max_in_flight: usize) -> Option<Self> {
        let url = std::env::var(URL_ENV).ok().filter(|u| !u.is_empty())?;
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Some(Self::new(url, token, timeout, max_in_flight))
    }

    pub fn with_retries(mut self, max_attempts: u32, delay: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.retry_delay = delay;
        self
    }

    fn attempt(&self, request: &CompletionRequest) -> std::result::Result<Vec<String>, String> {
        let mut call = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            call = call.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = call.send_json(request).map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("endpoint returned HTTP {}", status.as_u16()));
        }
        resp.body_mut()
            .read_json::<CompletionResponse>()
            .map(|r| r.completions)
            .map_err(|e| format!("malformed reply: {e}"))
    }
}

impl CompletionBackend for HttpEndpoint {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>> {
        let _slot = self.gate.enter();
        let mut last = String::new();
        for attempt in 1..=self.max_attempts {
            match self.attempt(request) {
                Ok(c) => return Ok(c),
                Err(e) => {
                    log::warn!("paraphrase request attempt {attempt} failed: {e}");
                    last = e;
                    if attempt < self.max_attempts {
                        std::thread::sleep(self.retry_delay);
                    }
                }
            }
        }
        Err(Error::Transport { attempts: self.max_attempts, message: last })
    }
}
