use std::collections::BTreeMap;

use povsent::Sentiment;
use povsent_modelio::{BatchRunner, ChatBackend, HttpBackend, MockEndpoint, RetryPolicy};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub type Runner = BatchRunner<Box<dyn ChatBackend>>;

/// Gold labels keyed by sentence text, for the mock.
#[derive(Default)]
pub struct MockGold(pub BTreeMap<String, Sentiment>);

impl MockGold {
    pub fn add(&mut self, text: &str, label: Sentiment) {
        self.0.insert(text.to_owned(), label);
    }
}

pub fn runner(cfg: &RunConfig, mock: bool, gold: MockGold) -> CliResult<Runner> {
    let fallback = cfg.eval.parse_fallback;
    if mock {
        let parallelism = cfg.endpoint.as_ref().map_or(4, |e| e.parallelism);
        let backend: Box<dyn ChatBackend> = Box::new(MockEndpoint::new(cfg.mock.behavior.clone(), gold.0));
        return Ok(BatchRunner::new(backend, RetryPolicy::default(), parallelism, fallback));
    }
    let ep = cfg
        .endpoint
        .clone()
        .ok_or_else(|| CliError::Config("no [endpoint] configured; pass --mock to use the offline mock".into()))?;
    let retry = RetryPolicy::from_endpoint(&ep);
    let parallelism = ep.parallelism;
    let backend: Box<dyn ChatBackend> = Box::new(HttpBackend::new(ep).map_err(|e| CliError::Config(format!("endpoint: {e}")))?);
    Ok(BatchRunner::new(backend, retry, parallelism, fallback))
}
