//! HTTP transport to chat-completions style judge/generator endpoints.
//!
//! [`ChatClient`] owns its own tokio runtime, so callers stay synchronous:
//! a batch is fanned out concurrently up to the endpoint's configured
//! parallelism and results come back in request order. Each request is
//! tried up to the retry budget on timeouts, 429s, and 5xx replies, with
//! the configured backoff schedule between attempts; other non-2xx codes
//! fail immediately with the status and a body excerpt. Responses are
//! cached on disk by content digest, so identical requests never touch the
//! network twice and reruns are byte-reproducible.

mod cache;

pub use cache::{CacheEntry, ResponseCache};

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use theater_core::{
    BackendError, ChatMessage, EndpointConfig, FakeCotGenerator, GeneratorError, JudgeBackend,
    JudgeRequest, JudgeResponse,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned {status}: {body_excerpt}")]
    Endpoint { status: u16, body_excerpt: String },
    #[error("malformed endpoint reply: {message}")]
    MalformedReply { message: String },
    #[error("cache I/O at {path}: {source}")]
    Cache {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("environment variable {var} is not set (expected the API key)")]
    MissingKey { var: String },
    #[error("client initialization failed: {message}")]
    Init { message: String },
}

#[derive(Serialize)]
struct ChatRequestBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct ChatReplyBody {
    choices: Vec<ChatReplyChoice>,
}

#[derive(Deserialize)]
struct ChatReplyChoice {
    message: ChatReplyMessage,
}

#[derive(Deserialize)]
struct ChatReplyMessage {
    content: String,
}

struct ClientInner {
    cfg: EndpointConfig,
    http: reqwest::Client,
    cache: Option<ResponseCache>,
    api_key: Option<String>,
}

/// Synchronous client for one endpoint, usable as a [`JudgeBackend`] and
/// as a [`FakeCotGenerator`].
pub struct ChatClient {
    inner: Arc<ClientInner>,
    runtime: tokio::runtime::Runtime,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("base_url", &self.inner.cfg.base_url)
            .field("model_name", &self.inner.cfg.model_name)
            .field("cached", &self.inner.cache.is_some())
            .finish_non_exhaustive()
    }
}

const DEFAULT_TIMEOUT_MS: u64 = 60_000;
const BODY_EXCERPT_LEN: usize = 400;

fn excerpt(body: &str) -> String {
    let trimmed = body.trim();
    let mut cut = trimmed.len().min(BODY_EXCERPT_LEN);
    while !trimmed.is_char_boundary(cut) {
        cut -= 1;
    }
    trimmed[..cut].to_string()
}

impl ChatClient {
    /// Build a client for `cfg`, reading the API key from the configured
    /// environment variable and caching responses under `cache_dir`.
    pub fn new(
        cfg: EndpointConfig,
        cache_dir: Option<std::path::PathBuf>,
    ) -> Result<Self, ClientError> {
        cfg.validate()
            .map_err(|message| ClientError::Init { message })?;
        let api_key = match &cfg.auth_env {
            None => None,
            Some(var) => {
                Some(std::env::var(var).map_err(|_| ClientError::MissingKey { var: var.clone() })?)
            }
        };
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(
                cfg.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
            ))
            .build()
            .map_err(|e| ClientError::Init {
                message: e.to_string(),
            })?;
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(|e| ClientError::Init {
                message: e.to_string(),
            })?;
        Ok(Self {
            inner: Arc::new(ClientInner {
                cache: cache_dir.map(ResponseCache::new),
                cfg,
                http,
                api_key,
            }),
            runtime,
        })
    }

    pub fn model_name(&self) -> &str {
        &self.inner.cfg.model_name
    }

    /// Submit one message sequence: cache hit, or request with retries.
    pub fn submit(&self, messages: &[ChatMessage]) -> Result<JudgeResponse, ClientError> {
        let inner = self.inner.clone();
        let messages = messages.to_vec();
        self.runtime
            .block_on(async move { inner.submit_with_cache(&messages).await })
    }
}

impl ClientInner {
    async fn submit_with_cache(
        &self,
        messages: &[ChatMessage],
    ) -> Result<JudgeResponse, ClientError> {
        let key = ResponseCache::key(
            &self.cfg.model_name,
            messages,
            self.cfg.temperature,
            self.cfg.seed,
        );
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.load(&self.cfg.model_name, &key) {
                return Ok(hit);
            }
        }
        let response = self.request_with_retries(messages).await?;
        if let Some(cache) = &self.cache {
            cache.store(&self.cfg.model_name, &key, &response)?;
        }
        Ok(response)
    }

    fn url(&self) -> String {
        let base = self.cfg.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    async fn request_with_retries(
        &self,
        messages: &[ChatMessage],
    ) -> Result<JudgeResponse, ClientError> {
        let body = ChatRequestBody {
            model: &self.cfg.model_name,
            messages,
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
            seed: self.cfg.seed,
        };
        let url = self.url();
        let max_attempts = self.cfg.retry.max_attempts.max(1);
        let mut last_failure = String::new();
        for attempt in 1..=max_attempts {
            let started = Instant::now();
            let mut request = self.http.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send().await {
                Err(e) => {
                    // Connect errors and timeouts are transient.
                    last_failure = e.to_string();
                }
                Ok(response) => {
                    let status = response.status();
                    let text = response.text().await.unwrap_or_default();
                    if status.is_success() {
                        let parsed: ChatReplyBody = serde_json::from_str(&text).map_err(|e| {
                            ClientError::MalformedReply {
                                message: format!("{e} in {}", excerpt(&text)),
                            }
                        })?;
                        let content = parsed
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| ClientError::MalformedReply {
                                message: "reply has no choices".to_string(),
                            })?;
                        return Ok(JudgeResponse {
                            raw: content,
                            reasoning_trace: None,
                            latency_ms: started.elapsed().as_millis() as u64,
                            model_id: self.cfg.model_name.clone(),
                        });
                    }
                    let retriable = status.as_u16() == 429 || status.is_server_error();
                    if !retriable {
                        return Err(ClientError::Endpoint {
                            status: status.as_u16(),
                            body_excerpt: excerpt(&text),
                        });
                    }
                    last_failure = format!("{status}: {}", excerpt(&text));
                }
            }
            if attempt < max_attempts {
                let backoff = self.cfg.retry.backoff_for(attempt as usize - 1);
                tokio::time::sleep(Duration::from_millis(backoff)).await;
            }
        }
        Err(ClientError::Transport {
            attempts: max_attempts,
            message: last_failure,
        })
    }
}

impl JudgeBackend for ChatClient {
    fn evaluate_batch(
        &self,
        requests: &[JudgeRequest],
    ) -> Vec<Result<JudgeResponse, BackendError>> {
        let parallelism = self.inner.cfg.parallelism.max(1);
        let semaphore = Arc::new(Semaphore::new(parallelism));
        self.runtime.block_on(async {
            let mut join_set = JoinSet::new();
            for (index, request) in requests.iter().enumerate() {
                let inner = self.inner.clone();
                let semaphore = semaphore.clone();
                let messages = request.messages.clone();
                join_set.spawn(async move {
                    let _permit = semaphore.acquire_owned().await.expect("semaphore open");
                    (index, inner.submit_with_cache(&messages).await)
                });
            }
            let mut results: Vec<Option<Result<JudgeResponse, BackendError>>> =
                (0..requests.len()).map(|_| None).collect();
            while let Some(joined) = join_set.join_next().await {
                match joined {
                    Ok((index, result)) => {
                        results[index] = Some(result.map_err(|e| BackendError::new(e.to_string())));
                    }
                    Err(e) => {
                        eprintln!("judge task panicked: {e}");
                    }
                }
            }
            results
                .into_iter()
                .map(|r| r.unwrap_or_else(|| Err(BackendError::new("judge task panicked"))))
                .collect()
        })
    }
}

impl FakeCotGenerator for ChatClient {
    fn model_id(&self) -> &str {
        &self.inner.cfg.model_name
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, GeneratorError> {
        self.submit(messages)
            .map(|r| r.raw)
            .map_err(|e| GeneratorError {
                message: e.to_string(),
            })
    }
}
