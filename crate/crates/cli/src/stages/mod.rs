pub mod agreement;
pub mod eval;
pub mod report;
pub mod search;
pub mod stratify;

use std::collections::BTreeMap;

use povsent::annotation::{load_annotations, read_annotations};
use povsent::corpus::{load_lexicon, load_sentences};
use povsent::datasets::{Split, StratifiedDataset};
use povsent::prompting::LabeledExample;
use povsent::scalar::round_half_up_to;
use povsent::{AnnotationRecord, Lexicon, Pov, Rational, Scalar, Sentence, SentenceId};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{config_err, validation_err, CliError, CliResult};
use crate::manifest::Stage;

/// A statistic as written to reports: full precision, the exact fraction
/// when there is one, and the two-decimal display value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reported {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    pub display: String,
}

pub fn exact_str(r: Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn two_dp(r: Rational) -> String {
    format!("{:.2}", round_half_up_to(r, 2).as_f64())
}

impl Reported {
    pub fn exact(r: Rational) -> Self {
        Self {
            value: r.as_f64(),
            exact: Some(exact_str(r)),
            display: two_dp(r),
        }
    }

    pub fn float(v: f64) -> Self {
        Self {
            value: v,
            exact: None,
            display: format!("{v:.2}"),
        }
    }
}

pub fn dataset_path(name: &str) -> String {
    format!("datasets/{name}.json")
}

pub fn prompt_split_path(name: &str) -> String {
    format!("splits/{name}.prompt.json")
}

pub fn classification_split_path(name: &str) -> String {
    format!("splits/{name}.classification.json")
}

pub fn load_corpus(stage: &mut Stage, cfg: &RunConfig) -> CliResult<(Lexicon, Vec<Sentence>)> {
    stage.note_input(&cfg.paths.lexicon)?;
    stage.note_input(&cfg.paths.sentences)?;
    let lexicon = load_lexicon(&cfg.paths.lexicon).map_err(|e| CliError::Config(format!("paths.lexicon: {e}")))?;
    let sentences = load_sentences(&cfg.paths.sentences, &lexicon).map_err(|e| CliError::Config(format!("paths.sentences: {e}")))?;
    Ok((lexicon, sentences))
}

pub fn load_records(stage: &mut Stage, cfg: &RunConfig) -> CliResult<Vec<AnnotationRecord>> {
    let bytes = stage.read(&cfg.paths.annotations)?;
    match &cfg.annotation_import {
        Some(mapping) => read_annotations(bytes.as_slice(), mapping),
        None => load_annotations(&cfg.paths.annotations),
    }
    .map_err(|e| CliError::Validation(format!("paths.annotations: {e}")))
}

pub fn texts(sentences: &[Sentence]) -> BTreeMap<SentenceId, String> {
    sentences.iter().map(|s| (s.sentence_id.clone(), s.text.clone())).collect()
}

/// Labeled examples for `ids` under `pov`, in id order.
pub fn labeled(
    dataset: &StratifiedDataset,
    ids: &[SentenceId],
    pov: Pov,
    text: &BTreeMap<SentenceId, String>,
) -> CliResult<Vec<LabeledExample>> {
    ids.iter()
        .map(|id| {
            let item = dataset
                .item(id)
                .ok_or_else(|| validation_err(format!("{id} is in the split but not in dataset {}", dataset.name)))?;
            let t = text
                .get(id)
                .ok_or_else(|| validation_err(format!("{id} has no sentence text")))?;
            Ok(LabeledExample {
                sentence_id: id.clone(),
                text: t.clone(),
                label: item.label(pov),
            })
        })
        .collect()
}

pub fn load_dataset(stage: &mut Stage, name: &str) -> CliResult<StratifiedDataset> {
    stage.read_json(&dataset_path(name))
}

pub fn load_prompt_split(stage: &mut Stage, name: &str) -> CliResult<Split> {
    stage.read_json(&prompt_split_path(name))
}

pub fn parse_pov(s: &str) -> CliResult<Pov> {
    s.parse().map_err(config_err)
}
