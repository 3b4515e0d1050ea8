//! Blocking JSON-over-HTTP client with bounded retries.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::scoring::ScoreError;

/// Retry schedule for transport failures and 5xx responses.
///
/// `retries` additional attempts follow the first one, waiting
/// `base_delay * 2^k` before retry `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn run<T>(&self, mut attempt: impl FnMut() -> Result<T, ScoreError>) -> Result<T, ScoreError> {
        let mut tries = 0;
        loop {
            match attempt() {
                Err(e) if e.is_retryable() && tries < self.retries => {
                    let delay = self.base_delay * 2u32.pow(tries);
                    log::warn!("request failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    tries += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct JsonClient {
    base: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl JsonClient {
    pub fn new(base: &str, retry: RetryPolicy) -> Self {
        let base = normalize_base(base);
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(retry.timeout))
            .build()
            .into();
        Self { base, agent, retry }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ScoreError> {
        self.retry.run(|| {
            let resp = self
                .agent
                .get(format!("{}{path}", self.base))
                .call()
                .map_err(|e| self.unreachable(e))?;
            self.decode(resp)
        })
    }

    pub fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ScoreError> {
        self.retry.run(|| {
            let resp = self
                .agent
                .post(format!("{}{path}", self.base))
                .send_json(body)
                .map_err(|e| self.unreachable(e))?;
            self.decode(resp)
        })
    }

    fn unreachable(&self, e: ureq::Error) -> ScoreError {
        ScoreError::Unreachable {
            endpoint: self.base.clone(),
            message: e.to_string(),
        }
    }

    fn decode<T: DeserializeOwned>(&self, mut resp: ureq::http::Response<ureq::Body>) -> Result<T, ScoreError> {
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ScoreError::Unreachable {
                endpoint: self.base.clone(),
                message: e.to_string(),
            })?;
        if !(200..300).contains(&status) {
            return Err(ScoreError::Http { status, body });
        }
        serde_json::from_str(&body).map_err(|e| ScoreError::Protocol(e.to_string()))
    }
}

fn normalize_base(base: &str) -> String {
    let base = base.trim().trim_end_matches('/');
    if base.starts_with("http://") || base.starts_with("https://") {
        base.to_string()
    } else {
        format!("http://{base}")
    }
}
