//! HTTP adapter for an external entailment judge.
//!
//! Wire format: `POST {"premise": .., "hypothesis": ..}`, reply
//! `{"relation": "entailment"|"neutral"|"contradiction", "confidence": 0.9?}`.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EntailmentOracle, EntailmentVerdict, Relation};
use crate::error::{Error, OracleError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleBackend {
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub backend: OracleBackend,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
    /// First backoff delay; doubled after each failed attempt.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            backend: OracleBackend::Synthetic,
            endpoint: None,
            timeout_ms: 10_000,
            retries: 3,
            backoff_ms: 100,
            max_in_flight: 8,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.backend == OracleBackend::Remote && self.endpoint.as_deref().unwrap_or("").is_empty() {
            return Err(Error::Config("remote oracle backend requires an endpoint".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("oracle max_in_flight must be positive".into()));
        }
        if self.retries > 16 {
            return Err(Error::Config("oracle retries must be at most 16".into()));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Request<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Deserialize)]
struct Reply {
    relation: String,
    #[serde(default)]
    confidence: Option<f64>,
}

/// Counting semaphore bounding concurrent requests.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteOracle {
    endpoint: String,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
    permits: Permits,
}

impl RemoteOracle {
    pub fn new(config: &OracleConfig) -> Result<Self> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config("remote oracle requires an endpoint".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            endpoint,
            agent,
            retries: config.retries,
            backoff: Duration::from_millis(config.backoff_ms),
            permits: Permits {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            },
        })
    }

    fn attempt(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, OracleError> {
        let _permit = self.permits.acquire();
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(Request { premise, hypothesis })
            .map_err(map_transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(OracleError::Status(status));
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(map_transport)?;
        parse_reply(&body)
    }
}

fn map_transport(e: ureq::Error) -> OracleError {
    match e {
        ureq::Error::Timeout(_) => OracleError::Timeout,
        ureq::Error::Io(io)
            if matches!(
                io.kind(),
                std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
            ) =>
        {
            OracleError::Timeout
        }
        other => OracleError::Transport(other.to_string()),
    }
}

/// Decodes a reply body into a verdict.
pub fn parse_reply(body: &str) -> Result<EntailmentVerdict, OracleError> {
    let reply: Reply = serde_json::from_str(body)
        .map_err(|e| OracleError::Protocol(format!("bad reply body: {e}")))?;
    let relation = Relation::parse(&reply.relation)
        .ok_or_else(|| OracleError::Protocol(format!("unknown relation `{}`", reply.relation)))?;
    if let Some(c) = reply.confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(OracleError::Protocol(format!("confidence {c} outside [0, 1]")));
        }
    }
    Ok(EntailmentVerdict {
        relation,
        confidence: reply.confidence,
    })
}

impl EntailmentOracle for RemoteOracle {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, OracleError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(premise, hypothesis) {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < self.retries => {
                    attempt += 1;
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
                Err(e) => return Err(e),
            }
        }
    }
}
