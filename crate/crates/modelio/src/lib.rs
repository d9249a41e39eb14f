//! Model access for sentiment classification: a chat-completion HTTP client,
//! a deterministic mock, label parsing, a bounded-parallel batch runner and
//! import of externally produced predictions.

pub mod batch;
pub mod endpoint;
pub mod import;
pub mod mock;
pub mod parse;

use thiserror::Error;

pub use batch::{BatchRunner, RetryPolicy};
pub use endpoint::{EndpointError, HttpBackend, ModelEndpoint};
pub use import::{import_predictions, ImportError};
pub use mock::{MockBehavior, MockEndpoint};
pub use parse::{parse_label, ParseFallback, ParseFailure};

/// Why a single request failed.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RequestError {
    /// Timeouts, rate limits, 5xx. Retried.
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("request failed: {0}")]
    Permanent(String),
}

impl RequestError {
    pub fn is_transient(&self) -> bool {
        matches!(self, RequestError::Transient(_))
    }
}

/// Something that answers one prompt with raw text.
pub trait ChatBackend: Send + Sync {
    /// Recorded as the `source` of every prediction.
    fn source(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<String, RequestError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn source(&self) -> String {
        (**self).source()
    }

    fn complete(&self, prompt: &str) -> Result<String, RequestError> {
        (**self).complete(prompt)
    }
}
