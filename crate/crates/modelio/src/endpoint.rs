use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::{ChatBackend, RequestError};

pub const DEFAULT_GENERATION_SEED: u64 = 42;
pub const ALLOWED_TEMPERATURES: [f64; 2] = [0.0, 0.001];

/// Connection settings. `auth` names the environment variable that holds the
/// credential; the credential itself is never stored here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_seed")]
    pub generation_seed: u64,
    #[serde(default)]
    pub auth: Option<String>,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_backoff")]
    pub initial_backoff_ms: u64,
}

fn default_seed() -> u64 {
    DEFAULT_GENERATION_SEED
}
fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_parallelism() -> usize {
    4
}
fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("temperature must be 0 or 0.001, got {0}")]
    Temperature(f64),
    #[error("parallelism must be at least 1")]
    Parallelism,
    #[error("request timeout must be positive, got {0}")]
    Timeout(f64),
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("cannot build HTTP client: {0}")]
    Client(String),
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            generation_seed: DEFAULT_GENERATION_SEED,
            auth: None,
            request_timeout_secs: default_timeout(),
            max_retries: default_retries(),
            parallelism: default_parallelism(),
            initial_backoff_ms: default_backoff(),
        }
    }

    pub fn validate(&self) -> Result<(), EndpointError> {
        if !ALLOWED_TEMPERATURES.contains(&self.temperature) {
            return Err(EndpointError::Temperature(self.temperature));
        }
        if self.parallelism == 0 {
            return Err(EndpointError::Parallelism);
        }
        if !(self.request_timeout_secs > 0.0 && self.request_timeout_secs.is_finite()) {
            return Err(EndpointError::Timeout(self.request_timeout_secs));
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs)
    }

    /// JSON body for one prompt.
    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "seed": self.generation_seed,
        })
    }
}

/// OpenAI-style `/chat/completions` client.
pub struct HttpBackend {
    endpoint: ModelEndpoint,
    client: reqwest::blocking::Client,
    credential: Option<String>,
}

impl HttpBackend {
    /// Reads the credential from the environment now, so a missing variable
    /// fails before any request is sent.
    pub fn new(endpoint: ModelEndpoint) -> Result<Self, EndpointError> {
        endpoint.validate()?;
        let credential = match &endpoint.auth {
            Some(var) => Some(std::env::var(var).map_err(|_| EndpointError::MissingCredential(var.clone()))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(endpoint.request_timeout())
            .build()
            .map_err(|e| EndpointError::Client(e.to_string()))?;
        Ok(Self {
            endpoint,
            client,
            credential,
        })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'))
    }
}

/// `choices[0].message.content` of a chat-completion response.
pub fn extract_content(body: &Value) -> Result<String, RequestError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| RequestError::Malformed("no choices[0].message.content".into()))
}

impl ChatBackend for HttpBackend {
    fn source(&self) -> String {
        self.endpoint.model_name.clone()
    }

    fn complete(&self, prompt: &str) -> Result<String, RequestError> {
        let mut req = self.client.post(self.url()).json(&self.endpoint.request_body(prompt));
        if let Some(key) = &self.credential {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() || e.is_connect() || e.is_request() {
                RequestError::Transient(e.to_string())
            } else {
                RequestError::Permanent(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| RequestError::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(RequestError::Transient(format!("HTTP {status}")));
        }
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(RequestError::Auth(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(RequestError::Permanent(format!("HTTP {status}: {text}")));
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| RequestError::Malformed(e.to_string()))?;
        extract_content(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let mut e = ModelEndpoint::new("http://x", "m");
        assert!(e.validate().is_ok());
        e.temperature = 0.001;
        assert!(e.validate().is_ok());
        e.temperature = 0.7;
        assert!(matches!(e.validate(), Err(EndpointError::Temperature(_))));
        e.temperature = 0.0;
        e.parallelism = 0;
        assert!(matches!(e.validate(), Err(EndpointError::Parallelism)));
    }

    #[test]
    fn body_carries_protocol_settings() {
        let mut e = ModelEndpoint::new("http://x", "gpt");
        e.temperature = 0.001;
        let b = e.request_body("hello");
        assert_eq!(b["temperature"], 0.001);
        assert_eq!(b["seed"], 42);
        assert_eq!(b["messages"][0]["content"], "hello");
    }

    #[test]
    fn missing_credential_fails_early() {
        let mut e = ModelEndpoint::new("http://127.0.0.1:9", "m");
        e.auth = Some("POVSENT_TEST_SURELY_UNSET_VAR".into());
        assert!(matches!(HttpBackend::new(e), Err(EndpointError::MissingCredential(_))));
    }

    #[test]
    fn content_extraction() {
        let v: Value = serde_json::from_str(r#"{"choices":[{"message":{"content":"Neutral"}}]}"#).unwrap();
        assert_eq!(extract_content(&v).unwrap(), "Neutral");
        assert!(extract_content(&json!({"choices": []})).is_err());
    }
}
