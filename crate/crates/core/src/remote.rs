//! Plain JSON-over-HTTP transport shared by the remote perception backend
//! and the remote language-model client.
//!
//! The endpoint URL comes from configuration or the `ESPATIAL_ENDPOINT`
//! environment variable; a bearer token, when needed, is read from the
//! environment variable named by `token_env` (default `ESPATIAL_TOKEN`).

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const ENDPOINT_ENV: &str = "ESPATIAL_ENDPOINT";
pub const DEFAULT_TOKEN_ENV: &str = "ESPATIAL_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RemoteError {
    #[error("no endpoint configured (set `endpoint` or {ENDPOINT_ENV})")]
    NoEndpoint,
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("malformed response from {url}: {message}")]
    BadResponse { url: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: Option<String>,
    pub token_env: String,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            token_env: DEFAULT_TOKEN_ENV.into(),
            max_in_flight: 4,
            timeout_ms: 30_000,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InflightLimiter {
    max: usize,
    in_flight: Mutex<usize>,
    released: Condvar,
}

pub struct Permit<'a> {
    limiter: &'a InflightLimiter,
}

impl InflightLimiter {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            in_flight: Mutex::new(0),
            released: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock poisoned");
        while *n >= self.max {
            n = self.released.wait(n).expect("limiter lock poisoned");
        }
        *n += 1;
        Permit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().expect("limiter lock poisoned")
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self
            .limiter
            .in_flight
            .lock()
            .expect("limiter lock poisoned");
        *n -= 1;
        self.limiter.released.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct JsonEndpoint {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
    limiter: Arc<InflightLimiter>,
}

impl JsonEndpoint {
    pub fn from_config(
        cfg: &RemoteConfig,
        limiter: Arc<InflightLimiter>,
    ) -> Result<Self, RemoteError> {
        let url = cfg
            .endpoint
            .clone()
            .or_else(|| std::env::var(ENDPOINT_ENV).ok())
            .filter(|u| !u.is_empty())
            .ok_or(RemoteError::NoEndpoint)?;
        let token = std::env::var(&cfg.token_env).ok().filter(|t| !t.is_empty());
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build();
        Ok(Self {
            url,
            token,
            agent,
            limiter,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        body: &Req,
    ) -> Result<Resp, RemoteError> {
        let _permit = self.limiter.acquire();
        let mut req = self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json");
        if let Some(token) = &self.token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let payload = serde_json::to_string(body).expect("request bodies always serialize");
        let resp = req
            .send_string(&payload)
            .map_err(|e| RemoteError::Transport {
                url: self.url.clone(),
                message: e.to_string(),
            })?;
        let text = resp.into_string().map_err(|e| RemoteError::Transport {
            url: self.url.clone(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| RemoteError::BadResponse {
            url: self.url.clone(),
            message: e.to_string(),
        })
    }
}
