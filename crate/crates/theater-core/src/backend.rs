//! Judge transport abstraction.
//!
//! The runner hands a whole batch of prompts to a [`JudgeBackend`] and gets
//! responses back in request order; how the batch is fanned out (and at
//! what parallelism) is the backend's concern. The deterministic
//! [`crate::mock::MockJudge`] lives in this crate; the HTTP chat-endpoint
//! backend lives in the client crate and consumes [`EndpointConfig`].

use serde::{Deserialize, Serialize};

use crate::inject::BiasedTask;
use crate::protocol::{ChatMessage, JudgeResponse};

/// One unit of judging work: the realized task plus the exact messages to
/// send. HTTP backends use the messages; the mock judge uses the task.
#[derive(Debug, Clone)]
pub struct JudgeRequest {
    pub task: BiasedTask,
    pub messages: Vec<ChatMessage>,
}

/// Failure to obtain a judge response for one request.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{message}")]
pub struct BackendError {
    pub message: String,
}

impl BackendError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// A judge model reachable for batch evaluation. Implementations must be
/// safe to share across threads and must return one result per request,
/// in request order.
pub trait JudgeBackend: Send + Sync {
    fn evaluate_batch(&self, requests: &[JudgeRequest])
        -> Vec<Result<JudgeResponse, BackendError>>;
}

/// Connection parameters for a chat-completions style endpoint.
///
/// `auth_env` names an environment variable holding the API key; the key
/// itself never appears in configs or manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
}

fn default_max_tokens() -> u32 {
    1024
}

fn default_parallelism() -> usize {
    4
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            auth_env: None,
            parallelism: default_parallelism(),
            retry: RetryPolicy::default(),
            seed: None,
            timeout_ms: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.base_url.trim().is_empty() {
            return Err("endpoint base_url is empty".to_string());
        }
        if self.model_name.trim().is_empty() {
            return Err("endpoint model_name is empty".to_string());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!(
                "temperature {} outside [0, 2] for {}",
                self.temperature, self.model_name
            ));
        }
        if self.parallelism == 0 {
            return Err(format!("parallelism must be >= 1 for {}", self.model_name));
        }
        if self.max_tokens == 0 {
            return Err(format!("max_tokens must be >= 1 for {}", self.model_name));
        }
        if self.retry.max_attempts == 0 {
            return Err(format!(
                "retry.max_attempts must be >= 1 for {}",
                self.model_name
            ));
        }
        Ok(())
    }
}

/// Retry budget for transient failures (timeouts, 429, 5xx). The backoff
/// schedule is consumed in order; the last entry repeats if attempts
/// outnumber entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: Vec<u64>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff_ms: vec![500, 2000],
        }
    }
}

impl RetryPolicy {
    /// Backoff before retry number `retry_index` (0-based).
    pub fn backoff_for(&self, retry_index: usize) -> u64 {
        match self.backoff_ms.last() {
            None => 0,
            Some(&last) => *self.backoff_ms.get(retry_index).unwrap_or(&last),
        }
    }
}
