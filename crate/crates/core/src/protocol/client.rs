//! Blocking HTTP client for remote backends.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::wire::{ControllerTextResponse, ControllerTurnRequest, PerceptionQueryRequest, PerceptionQueryResponse};
use crate::engine::{BackendError, ControllerBackend, Mode, PerceptionBackend};
use crate::protocol::wire::Message;

pub const CONTROLLER_TURN_PATH: &str = "/controller/turn";
pub const CONTROLLER_SUMMARY_PATH: &str = "/controller/summary";
pub const PERCEPTION_QUERY_PATH: &str = "/perception/query";
pub const IDEMPOTENCY_HEADER: &str = "Idempotency-Key";
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendEndpoint {
    /// Base URL such as `http://127.0.0.1:8080`.
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_multiplier: f64,
    /// Sent verbatim as `Authorization: Bearer <token>`.
    pub bearer_token: Option<String>,
}

impl BackendEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_retries: 2,
            backoff_initial_ms: 50,
            backoff_multiplier: 2.0,
            bearer_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if self.timeout_ms == 0 {
            return Err(ClientError::Config("timeout must be positive".into()));
        }
        if !(self.backoff_multiplier >= 1.0 && self.backoff_multiplier.is_finite()) {
            return Err(ClientError::Config("backoff multiplier must be at least 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ClientError::Config(format!("unsupported base URL {:?}", self.base_url)));
        }
        Ok(())
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let ms = self.backoff_initial_ms as f64 * self.backoff_multiplier.powi(retry.saturating_sub(1) as i32);
        Duration::from_millis(ms.min(60_000.0) as u64)
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid endpoint: {0}")]
    Config(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("server rejected request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response envelope: {0}")]
    Envelope(String),
    #[error("response violates schema: {0}")]
    Schema(String),
}

impl From<ClientError> for BackendError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Envelope(_) | ClientError::Schema(_) => BackendError::Schema(e.to_string()),
            ClientError::Rejected { .. } => BackendError::Rejected(e.to_string()),
            ClientError::Config(_) | ClientError::Exhausted { .. } => BackendError::Transport(e.to_string()),
        }
    }
}

/// A decoded response and the number of HTTP attempts it took.
#[derive(Clone, Debug, PartialEq)]
pub struct Called<T> {
    pub value: T,
    pub attempts: u32,
}

/// Shareable across threads; every call is independent.
#[derive(Clone, Debug)]
pub struct ProtocolClient {
    endpoint: BackendEndpoint,
    agent: ureq::Agent,
}

impl ProtocolClient {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self, ClientError> {
        endpoint.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(endpoint.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { endpoint, agent })
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }

    /// POSTs `body`, retrying transport failures and 5xx responses. All
    /// attempts share one idempotency key.
    pub fn post_json<B: Serialize>(&self, path: &str, body: &B) -> Result<Called<String>, ClientError> {
        let payload = serde_json::to_string(body).expect("request types serialize");
        let url = format!("{}{}", self.endpoint.base_url, path);
        let key = uuid::Uuid::new_v4().to_string();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let mut req = self
                .agent
                .post(&url)
                .header("Content-Type", "application/json")
                .header(IDEMPOTENCY_HEADER, &key);
            if let Some(token) = &self.endpoint.bearer_token {
                req = req.header("Authorization", &format!("Bearer {token}"));
            }
            let failure = match req.send(payload.as_str()) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    match status {
                        200..=299 => return Ok(Called { value: text, attempts }),
                        500..=599 => format!("status {status}: {text}"),
                        _ => return Err(ClientError::Rejected { status, body: text }),
                    }
                }
                Err(e) => e.to_string(),
            };
            if attempts > self.endpoint.max_retries {
                return Err(ClientError::Exhausted {
                    attempts,
                    last: failure,
                });
            }
            log::debug!("{url}: attempt {attempts} failed ({failure}), retrying");
            std::thread::sleep(self.endpoint.backoff(attempts));
        }
    }

    fn post_decode<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<Called<T>, ClientError> {
        let Called { value, attempts } = self.post_json(path, body)?;
        let de = &mut serde_json::Deserializer::from_str(&value);
        let value = serde_path_to_error::deserialize(de)
            .map_err(|e| ClientError::Envelope(format!("at `{}`: {}", e.path(), e.inner())))?;
        Ok(Called { value, attempts })
    }

    /// One controller call; `path` is the turn or summary endpoint. The text
    /// comes back verbatim for the grammar parser.
    pub fn call_controller(&self, path: &str, request: &ControllerTurnRequest) -> Result<Called<String>, ClientError> {
        if request.history.is_empty() {
            return Err(ClientError::Config("controller history must not be empty".into()));
        }
        let c: Called<ControllerTextResponse> = self.post_decode(path, request)?;
        Ok(Called {
            value: c.value.text,
            attempts: c.attempts,
        })
    }

    pub fn call_perception(
        &self,
        request: &PerceptionQueryRequest,
    ) -> Result<Called<PerceptionQueryResponse>, ClientError> {
        let c: Called<PerceptionQueryResponse> = self.post_decode(PERCEPTION_QUERY_PATH, request)?;
        check_perception_response(&c.value)?;
        Ok(c)
    }
}

/// Range checks the serde types cannot express.
pub fn check_perception_response(r: &PerceptionQueryResponse) -> Result<(), ClientError> {
    if !(0.0..=1.0).contains(&r.match_score) {
        return Err(ClientError::Schema(format!(
            "match_score {} outside [0, 1]",
            r.match_score
        )));
    }
    if let Some(grid) = &r.salience {
        if !grid.is_well_formed() {
            return Err(ClientError::Schema("salience grid is malformed".into()));
        }
    }
    Ok(())
}

/// A controller reached over HTTP.
#[derive(Clone, Debug)]
pub struct RemoteController {
    client: ProtocolClient,
    preamble_id: String,
}

impl RemoteController {
    pub fn new(client: ProtocolClient, preamble_id: impl Into<String>) -> Self {
        Self {
            client,
            preamble_id: preamble_id.into(),
        }
    }

    fn call(&self, path: &str, mode: Mode, history: &[Message]) -> Result<String, BackendError> {
        let request = ControllerTurnRequest {
            history: history.to_vec(),
            mode,
            preamble_id: self.preamble_id.clone(),
        };
        Ok(self.client.call_controller(path, &request)?.value)
    }
}

impl ControllerBackend for RemoteController {
    fn next_turn(&self, history: &[Message]) -> Result<String, BackendError> {
        self.call(CONTROLLER_TURN_PATH, Mode::ActivePerception, history)
    }

    fn summary(&self, history: &[Message]) -> Result<String, BackendError> {
        self.call(CONTROLLER_SUMMARY_PATH, Mode::Validation, history)
    }
}

/// A perception model reached over HTTP.
#[derive(Clone, Debug)]
pub struct RemotePerception {
    client: ProtocolClient,
}

impl RemotePerception {
    pub fn new(client: ProtocolClient) -> Self {
        Self { client }
    }
}

impl PerceptionBackend for RemotePerception {
    fn query(&self, request: &PerceptionQueryRequest) -> Result<PerceptionQueryResponse, BackendError> {
        Ok(self.client.call_perception(request)?.value)
    }
}
