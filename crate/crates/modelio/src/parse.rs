use povsent::Sentiment;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Appended to the prompt on the one stricter retry.
pub const STRICT_SUFFIX: &str = "\n\nRespond with exactly one word, negative, neutral, or positive, and nothing else.";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseFallback {
    /// Record the failure.
    Error,
    /// Ask once more with [`STRICT_SUFFIX`], then record the failure.
    #[default]
    RetryStricter,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("no label word in output")]
    NoLabel,
    #[error("several label words in output: {0:?}")]
    Ambiguous(Vec<Sentiment>),
}

/// Succeeds iff exactly one distinct label word occurs, ignoring case.
/// Words are maximal runs of ASCII letters, so "non-negative" still counts
/// as "negative" but "negatively" does not.
pub fn parse_label(raw: &str) -> Result<Sentiment, ParseFailure> {
    let mut found: Vec<Sentiment> = Vec::new();
    for word in raw.split(|c: char| !c.is_ascii_alphabetic()).filter(|w| !w.is_empty()) {
        if let Ok(s) = word.parse::<Sentiment>() {
            if !found.contains(&s) {
                found.push(s);
            }
        }
    }
    match found.len() {
        0 => Err(ParseFailure::NoLabel),
        1 => Ok(found[0]),
        _ => {
            found.sort();
            Err(ParseFailure::Ambiguous(found))
        }
    }
}
