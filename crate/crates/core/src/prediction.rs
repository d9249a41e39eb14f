//! Model predictions as recorded by the batch runner or imported from files.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotation::{Pov, Sentiment};
use crate::ids::SentenceId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    ZeroShot,
    Icl,
    /// Predictions produced outside this tool.
    Import,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::ZeroShot => "zero-shot",
            PromptMode::Icl => "icl",
            PromptMode::Import => "import",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of asking for one label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Parsed { label: Sentiment },
    /// The model answered but no single label could be read from it.
    ParseFailure { reason: String },
    /// The request itself failed after retries.
    RequestFailure { error: String },
}

impl Outcome {
    pub fn label(&self) -> Option<Sentiment> {
        match self {
            Outcome::Parsed { label } => Some(*label),
            _ => None,
        }
    }

    pub fn is_request_failure(&self) -> bool {
        matches!(self, Outcome::RequestFailure { .. })
    }
}

/// One model answer for one sentence. `raw_output` is kept byte-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sentence_id: SentenceId,
    pub pov: Pov,
    pub dataset: String,
    pub prompt_mode: PromptMode,
    /// Model name, or `external:<tag>` for imported predictions.
    pub source: String,
    pub raw_output: String,
    pub outcome: Outcome,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

impl PredictionRecord {
    /// Copy with timing fields zeroed, for comparing runs.
    pub fn without_latency(&self) -> Self {
        Self {
            latency_ms: 0,
            ..self.clone()
        }
    }
}
