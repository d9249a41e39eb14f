use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use povsent::prompting::BatchContext;
use povsent::{Outcome, PredictionRecord, PromptMode, SentenceId, Sentiment};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("predictions file: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: unknown label {value:?}")]
    UnknownLabel { row: usize, value: String },
    #[error("sentence {0} predicted more than once")]
    Duplicate(SentenceId),
    #[error("predictions missing for {0:?}")]
    Missing(Vec<SentenceId>),
    #[error("predictions for unexpected sentences {0:?}")]
    Extra(Vec<SentenceId>),
}

#[derive(Deserialize)]
struct Row {
    sentence_id: String,
    label: String,
}

/// Reads `sentence_id,label` rows from an external classifier. The ids must
/// equal `expected` exactly. Records come back in sentence id order with
/// source `external:<tag>`.
pub fn import_predictions(
    reader: impl Read,
    tag: &str,
    ctx: &BatchContext,
    expected: &BTreeSet<SentenceId>,
) -> Result<Vec<PredictionRecord>, ImportError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let mut got: BTreeMap<SentenceId, (String, Sentiment)> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let label: Sentiment = row.label.parse().map_err(|_| ImportError::UnknownLabel {
            row: i + 2,
            value: row.label.clone(),
        })?;
        let id = SentenceId::new(row.sentence_id.trim());
        if got.insert(id.clone(), (row.label, label)).is_some() {
            return Err(ImportError::Duplicate(id));
        }
    }
    let missing: Vec<SentenceId> = expected.iter().filter(|id| !got.contains_key(*id)).cloned().collect();
    if !missing.is_empty() {
        return Err(ImportError::Missing(missing));
    }
    let extra: Vec<SentenceId> = got.keys().filter(|id| !expected.contains(*id)).cloned().collect();
    if !extra.is_empty() {
        return Err(ImportError::Extra(extra));
    }
    Ok(got
        .into_iter()
        .map(|(sentence_id, (raw_output, label))| PredictionRecord {
            sentence_id,
            pov: ctx.pov,
            dataset: ctx.dataset.clone(),
            prompt_mode: PromptMode::Import,
            source: format!("external:{tag}"),
            raw_output,
            outcome: Outcome::Parsed { label },
            latency_ms: 0,
            attempt_count: 0,
        })
        .collect())
}
