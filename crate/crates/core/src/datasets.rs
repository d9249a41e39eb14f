//! Agreement-stratified datasets, train/validation splits and the external
//! test set.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{Pov, RaterGroup, Sentiment, UnifiedLabel};
use crate::corpus::{Lexicon, Sentence};
use crate::ids::SentenceId;
use crate::scalar::{fraction_from_f64, round_half_up, Rational};

pub const BASELINE: &str = "baseline";
pub const NO_AGREEMENT: &str = "no-agreement";
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.7, 0.8, 0.9];
pub const DEFAULT_SPLIT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unified labels cover different sentences: {0} only has {1}")]
    MismatchedSentences(&'static str, SentenceId),
    #[error("unified labels for {0} contain {1} more than once")]
    DuplicateUnified(&'static str, SentenceId),
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("train fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("dataset {name} has {n} sentences; a {fraction} split leaves train or validation empty")]
    EmptySplitSide { name: String, n: usize, fraction: f64 },
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed test set file: {0}")]
    Csv(#[from] csv::Error),
    #[error("test sentence {0}: {1}")]
    InvalidTestRow(String, String),
    #[error("test sentence {test} overlaps study sentence {study}")]
    Overlap { test: SentenceId, study: SentenceId },
    #[error("test sentence {0} contains no lexicon term")]
    NoLexiconTerm(SentenceId),
}

/// One sentence with both groups' unified labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub sentence_id: SentenceId,
    pub physician: Sentiment,
    pub non_physician: Sentiment,
    pub physician_agreement: Rational,
    pub non_physician_agreement: Rational,
}

impl DatasetItem {
    pub fn label(&self, pov: Pov) -> Sentiment {
        match pov {
            RaterGroup::Physician => self.physician,
            RaterGroup::NonPhysician => self.non_physician,
        }
    }

    pub fn agreement(&self, pov: Pov) -> Rational {
        match pov {
            RaterGroup::Physician => self.physician_agreement,
            RaterGroup::NonPhysician => self.non_physician_agreement,
        }
    }

    /// Best within-group agreement.
    pub fn max_agreement(&self) -> Rational {
        self.physician_agreement.max(self.non_physician_agreement)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedDataset {
    pub name: String,
    pub threshold: Option<f64>,
    /// Ordered by sentence id.
    pub items: Vec<DatasetItem>,
}

impl StratifiedDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sentence_ids(&self) -> Vec<SentenceId> {
        self.items.iter().map(|i| i.sentence_id.clone()).collect()
    }

    pub fn id_set(&self) -> BTreeSet<SentenceId> {
        self.items.iter().map(|i| i.sentence_id.clone()).collect()
    }

    pub fn gold(&self, pov: Pov) -> BTreeMap<SentenceId, Sentiment> {
        self.items.iter().map(|i| (i.sentence_id.clone(), i.label(pov))).collect()
    }

    pub fn item(&self, id: &SentenceId) -> Option<&DatasetItem> {
        self.items.iter().find(|i| &i.sentence_id == id)
    }
}

/// Dataset name for an agreement threshold: `0.7` → `agree70`.
pub fn threshold_name(threshold: f64) -> String {
    let pct = threshold * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("agree{}", pct.round() as i64)
    } else {
        let s = format!("{pct:.6}");
        format!("agree{}", s.trim_end_matches('0').trim_end_matches('.'))
    }
}

fn join_groups(phys: &[UnifiedLabel], nonphys: &[UnifiedLabel]) -> Result<Vec<DatasetItem>, DatasetError> {
    fn index<'a>(labels: &'a [UnifiedLabel], who: &'static str) -> Result<BTreeMap<SentenceId, &'a UnifiedLabel>, DatasetError> {
        let mut map = BTreeMap::new();
        for u in labels {
            if map.insert(u.sentence_id.clone(), u).is_some() {
                return Err(DatasetError::DuplicateUnified(who, u.sentence_id.clone()));
            }
        }
        Ok(map)
    }
    let p = index(phys, "physician")?;
    let n = index(nonphys, "non-physician")?;
    if let Some(id) = p.keys().find(|k| !n.contains_key(*k)) {
        return Err(DatasetError::MismatchedSentences("physician", id.clone()));
    }
    if let Some(id) = n.keys().find(|k| !p.contains_key(*k)) {
        return Err(DatasetError::MismatchedSentences("non-physician", id.clone()));
    }
    Ok(p.into_iter()
        .map(|(id, pu)| {
            let nu = n[&id];
            DatasetItem {
                sentence_id: id,
                physician: pu.label,
                non_physician: nu.label,
                physician_agreement: pu.agreement,
                non_physician_agreement: nu.agreement,
            }
        })
        .collect())
}

/// Baseline (all sentences) followed by one dataset per threshold, in
/// ascending threshold order. A sentence enters a threshold dataset when
/// either group's agreement reaches the threshold.
pub fn stratify(
    unified_phys: &[UnifiedLabel],
    unified_nonphys: &[UnifiedLabel],
    thresholds: &[f64],
) -> Result<Vec<StratifiedDataset>, DatasetError> {
    let items = join_groups(unified_phys, unified_nonphys)?;
    let mut ts = Vec::new();
    for &t in thresholds {
        let exact = fraction_from_f64(t)
            .filter(|r| *r > Rational::from_integer(0) && *r <= Rational::from_integer(1))
            .ok_or(DatasetError::InvalidThreshold(t))?;
        ts.push((t, exact));
    }
    ts.sort_by(|a, b| a.1.cmp(&b.1));
    ts.dedup_by(|a, b| a.1 == b.1);
    let mut out = vec![StratifiedDataset {
        name: BASELINE.into(),
        threshold: None,
        items: items.clone(),
    }];
    for (t, exact) in ts {
        out.push(StratifiedDataset {
            name: threshold_name(t),
            threshold: Some(t),
            items: items.iter().filter(|i| i.max_agreement() >= exact).cloned().collect(),
        });
    }
    Ok(out)
}

/// Sentences whose two unified labels differ.
pub fn no_agreement(unified_phys: &[UnifiedLabel], unified_nonphys: &[UnifiedLabel]) -> Result<StratifiedDataset, DatasetError> {
    let items = join_groups(unified_phys, unified_nonphys)?;
    Ok(StratifiedDataset {
        name: NO_AGREEMENT.into(),
        threshold: None,
        items: items.into_iter().filter(|i| i.physician != i.non_physician).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub dataset: String,
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
    /// Both sides ordered by sentence id.
    pub train_ids: Vec<SentenceId>,
    pub val_ids: Vec<SentenceId>,
}

/// `round_half_up(fraction * n)`.
pub fn train_size(n: usize, fraction: Rational) -> usize {
    round_half_up(fraction * Rational::from_integer(n as i128)) as usize
}

fn check_fraction(f: f64) -> Result<Rational, DatasetError> {
    fraction_from_f64(f)
        .filter(|r| *r > Rational::from_integer(0) && *r < Rational::from_integer(1))
        .ok_or(DatasetError::InvalidFraction(f))
}

fn finish(dataset: &StratifiedDataset, fraction: f64, seed: u64, stratified: bool, mut train: Vec<SentenceId>) -> Result<Split, DatasetError> {
    let n = dataset.len();
    if train.is_empty() || train.len() >= n {
        return Err(DatasetError::EmptySplitSide {
            name: dataset.name.clone(),
            n,
            fraction,
        });
    }
    train.sort();
    let chosen: BTreeSet<&SentenceId> = train.iter().collect();
    let val_ids = dataset
        .items
        .iter()
        .map(|i| &i.sentence_id)
        .filter(|id| !chosen.contains(id))
        .cloned()
        .collect();
    Ok(Split {
        dataset: dataset.name.clone(),
        train_fraction: fraction,
        seed,
        stratified,
        train_ids: train,
        val_ids,
    })
}

/// Seeded uniform shuffle of the sentence ids, then a prefix split. Labels
/// are not consulted.
pub fn split(dataset: &StratifiedDataset, train_fraction: f64, seed: u64) -> Result<Split, DatasetError> {
    let fraction = check_fraction(train_fraction)?;
    let mut ids = dataset.sentence_ids();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids.truncate(train_size(dataset.len(), fraction));
    finish(dataset, train_fraction, seed, false, ids)
}

/// Like [`split`], but shuffles and rounds within each label of `pov`.
pub fn split_stratified(dataset: &StratifiedDataset, pov: Pov, train_fraction: f64, seed: u64) -> Result<Split, DatasetError> {
    let fraction = check_fraction(train_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    for label in Sentiment::ALL {
        let mut ids: Vec<SentenceId> = dataset
            .items
            .iter()
            .filter(|i| i.label(pov) == label)
            .map(|i| i.sentence_id.clone())
            .collect();
        ids.sort();
        ids.shuffle(&mut rng);
        let k = train_size(ids.len(), fraction);
        train.extend(ids.into_iter().take(k));
    }
    finish(dataset, train_fraction, seed, true, train)
}

/// An external test sentence with both groups' expected labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestItem {
    pub sentence: Sentence,
    pub physician: Sentiment,
    pub non_physician: Sentiment,
}

impl TestItem {
    pub fn label(&self, pov: Pov) -> Sentiment {
        match pov {
            RaterGroup::Physician => self.physician,
            RaterGroup::NonPhysician => self.non_physician,
        }
    }
}

#[derive(Debug, Deserialize)]
struct TestRow {
    sentence_id: String,
    text: String,
    physician: String,
    #[serde(alias = "non-physician")]
    non_physician: String,
}

/// Reads `sentence_id,text,physician,non_physician`. Every sentence must
/// contain a lexicon term and must not repeat a study sentence (by id or text).
pub fn load_test_set(path: impl AsRef<Path>, lexicon: &Lexicon, study: &[Sentence]) -> Result<Vec<TestItem>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_test_set(file, lexicon, study)
}

pub fn read_test_set(reader: impl Read, lexicon: &Lexicon, study: &[Sentence]) -> Result<Vec<TestItem>, DatasetError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: TestRow = row?;
        let id = SentenceId(row.sentence_id.trim().to_owned());
        let parse = |s: &str| {
            s.parse::<Sentiment>()
                .map_err(|e| DatasetError::InvalidTestRow(id.to_string(), e.to_string()))
        };
        let (physician, non_physician) = (parse(&row.physician)?, parse(&row.non_physician)?);
        let norm = row.text.trim();
        if let Some(s) = study
            .iter()
            .find(|s| s.sentence_id == id || s.text.trim() == norm)
        {
            return Err(DatasetError::Overlap {
                test: id,
                study: s.sentence_id.clone(),
            });
        }
        let sentence = Sentence::new(id.clone(), row.text).annotate(lexicon);
        if sentence.matched_terms.is_empty() {
            return Err(DatasetError::NoLexiconTerm(id));
        }
        out.push(TestItem {
            sentence,
            physician,
            non_physician,
        });
    }
    Ok(out)
}
