use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use povsent::prompting::{BatchClassifier, BatchContext, PromptJob};
use povsent::{Outcome, PredictionRecord};
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::parse::{parse_label, ParseFallback, STRICT_SUFFIX};
use crate::{ChatBackend, ModelEndpoint, RequestError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn from_endpoint(e: &ModelEndpoint) -> Self {
        Self {
            max_retries: e.max_retries,
            initial_backoff: Duration::from_millis(e.initial_backoff_ms),
            ..Self::default()
        }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.saturating_sub(1));
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

/// Sends prompts through a backend with retries, label parsing and bounded
/// parallelism. Records come back in job order.
pub struct BatchRunner<B> {
    backend: B,
    retry: RetryPolicy,
    parallelism: usize,
    fallback: ParseFallback,
}

impl<B: ChatBackend> BatchRunner<B> {
    pub fn new(backend: B, retry: RetryPolicy, parallelism: usize, fallback: ParseFallback) -> Self {
        Self {
            backend,
            retry,
            parallelism: parallelism.max(1),
            fallback,
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    /// One prompt with transient-failure retries. Returns the reply and the
    /// number of attempts spent.
    pub fn classify(&self, prompt: &str) -> (Result<String, RequestError>, u32) {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.backend.complete(prompt) {
                Err(e) if e.is_transient() && attempts <= self.retry.max_retries => {
                    let wait = self.retry.backoff(attempts);
                    debug!(attempt = attempts, ?wait, error = %e, "retrying");
                    thread::sleep(wait);
                }
                other => return (other, attempts),
            }
        }
    }

    fn run_one(&self, ctx: &BatchContext, job: &PromptJob) -> PredictionRecord {
        let start = Instant::now();
        let (mut reply, mut attempts) = self.classify(&job.prompt);
        if self.fallback == ParseFallback::RetryStricter {
            if let Ok(raw) = &reply {
                if parse_label(raw).is_err() {
                    let strict = format!("{}{}", job.prompt, STRICT_SUFFIX);
                    let (again, more) = self.classify(&strict);
                    reply = again;
                    attempts += more;
                }
            }
        }
        let (raw_output, outcome) = match reply {
            Ok(raw) => {
                let outcome = match parse_label(&raw) {
                    Ok(label) => Outcome::Parsed { label },
                    Err(e) => Outcome::ParseFailure { reason: e.to_string() },
                };
                (raw, outcome)
            }
            Err(e) => {
                warn!(sentence = %job.sentence_id, error = %e, "request failed");
                (String::new(), Outcome::RequestFailure { error: e.to_string() })
            }
        };
        PredictionRecord {
            sentence_id: job.sentence_id.clone(),
            pov: ctx.pov,
            dataset: ctx.dataset.clone(),
            prompt_mode: ctx.mode,
            source: self.backend.source(),
            raw_output,
            outcome,
            latency_ms: start.elapsed().as_millis() as u64,
            attempt_count: attempts,
        }
    }

    pub fn run_batch(&self, ctx: &BatchContext, jobs: &[PromptJob]) -> Vec<PredictionRecord> {
        let workers = self.parallelism.min(jobs.len());
        if workers <= 1 {
            return jobs.iter().map(|j| self.run_one(ctx, j)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<PredictionRecord>>> = Mutex::new(vec![None; jobs.len()]);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let rec = self.run_one(ctx, job);
                    slots.lock().expect("no worker panics while holding the lock")[i] = Some(rec);
                });
            }
        });
        slots
            .into_inner()
            .expect("workers joined")
            .into_iter()
            .map(|r| r.expect("every job ran"))
            .collect()
    }
}

impl<B: ChatBackend> BatchClassifier for BatchRunner<B> {
    fn classify(&self, ctx: &BatchContext, jobs: &[PromptJob]) -> Vec<PredictionRecord> {
        self.run_batch(ctx, jobs)
    }
}
