use std::collections::BTreeMap;

use povsent::Sentiment;
use serde::{Deserialize, Serialize};

use crate::{ChatBackend, RequestError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockBehavior {
    /// Answers the target's gold label.
    Echo,
    /// Answers "neutral" unless the prompt also contains a fixture sentence
    /// whose gold label is negative, then echoes gold.
    Biased,
    /// Always answers this label.
    Constant(Sentiment),
}

/// Offline endpoint keyed by sentence text. The target of a prompt is the
/// fixture sentence whose last occurrence ends latest; examples come before
/// the target in every template, so this picks the target even when an
/// example text contains it.
#[derive(Clone, Debug)]
pub struct MockEndpoint {
    behavior: MockBehavior,
    gold: BTreeMap<String, Sentiment>,
    /// Raw replies returned verbatim for a target, overriding `behavior`.
    scripted: BTreeMap<String, String>,
}

impl MockEndpoint {
    pub fn new(behavior: MockBehavior, gold: impl IntoIterator<Item = (String, Sentiment)>) -> Self {
        Self {
            behavior,
            gold: gold.into_iter().collect(),
            scripted: BTreeMap::new(),
        }
    }

    pub fn with_reply(mut self, text: impl Into<String>, reply: impl Into<String>) -> Self {
        self.scripted.insert(text.into(), reply.into());
        self
    }

    pub fn behavior(&self) -> &MockBehavior {
        &self.behavior
    }

    fn target<'a>(&'a self, prompt: &str) -> Option<&'a str> {
        self.gold
            .keys()
            .chain(self.scripted.keys())
            .filter_map(|k| prompt.rfind(k.as_str()).map(|at| (at + k.len(), k.len(), k)))
            .max_by_key(|(end, len, _)| (*end, *len))
            .map(|(_, _, k)| k.as_str())
    }
}

impl ChatBackend for MockEndpoint {
    fn source(&self) -> String {
        match &self.behavior {
            MockBehavior::Echo => "mock:echo".into(),
            MockBehavior::Biased => "mock:biased".into(),
            MockBehavior::Constant(s) => format!("mock:constant-{s}"),
        }
    }

    fn complete(&self, prompt: &str) -> Result<String, RequestError> {
        let target = self
            .target(prompt)
            .ok_or_else(|| RequestError::Permanent("mock: no fixture sentence in prompt".into()))?;
        if let Some(reply) = self.scripted.get(target) {
            return Ok(reply.clone());
        }
        let gold = self.gold[target];
        let label = match self.behavior {
            MockBehavior::Echo => gold,
            MockBehavior::Constant(s) => s,
            MockBehavior::Biased => {
                let has_negative_example = self
                    .gold
                    .iter()
                    .any(|(text, l)| *l == Sentiment::Negative && text != target && prompt.contains(text.as_str()));
                if has_negative_example {
                    gold
                } else {
                    Sentiment::Neutral
                }
            }
        };
        Ok(label.to_string())
    }
}
