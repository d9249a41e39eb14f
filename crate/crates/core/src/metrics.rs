//! Confusion matrices, macro precision/recall/F1 and neutrality diagnostics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::Sentiment;
use crate::ids::SentenceId;
use crate::prediction::PredictionRecord;
use crate::scalar::{mean, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("gold and predicted sequences differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no items to score")]
    Empty,
    #[error("{} prediction(s) without a parsed label: {}", .0.len(), join(.0))]
    UnresolvedPredictions(Vec<SentenceId>),
    #[error("no gold label for prediction {0}")]
    UnknownSentence(SentenceId),
    #[error("no prediction for gold sentence {0}")]
    MissingPrediction(SentenceId),
}

fn join(ids: &[SentenceId]) -> String {
    ids.iter().map(SentenceId::as_str).collect::<Vec<_>>().join(", ")
}

/// 3×3 counts indexed by (gold, predicted), plus predictions that produced
/// no label. Unlabeled predictions count against recall only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
    #[serde(default)]
    pub unresolved: [u64; 3],
}

impl ConfusionMatrix {
    pub fn add(&mut self, gold: Sentiment, pred: Sentiment) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    pub fn add_unresolved(&mut self, gold: Sentiment) {
        self.unresolved[gold.index()] += 1;
    }

    pub fn get(&self, gold: Sentiment, pred: Sentiment) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.unresolved.iter().sum::<u64>()
    }

    /// Items with this gold label.
    pub fn support(&self, gold: Sentiment) -> u64 {
        self.counts[gold.index()].iter().sum::<u64>() + self.unresolved[gold.index()]
    }

    /// Items predicted as this label.
    pub fn predicted(&self, pred: Sentiment) -> u64 {
        self.counts.iter().map(|row| row[pred.index()]).sum()
    }
}

/// Counts (gold, predicted) pairs.
pub fn confusion(gold: &[Sentiment], pred: &[Sentiment]) -> Result<ConfusionMatrix, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut m = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        m.add(*g, *p);
    }
    Ok(m)
}

/// What to do with predictions that carry no label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnresolvedPolicy {
    Reject,
    /// Keep them as misses: they lower recall of their gold class.
    CountAsMiss,
}

/// Builds a matrix from prediction records keyed by sentence id. Every gold
/// sentence needs exactly one record.
pub fn confusion_from_records(
    gold: &BTreeMap<SentenceId, Sentiment>,
    records: &[PredictionRecord],
    policy: UnresolvedPolicy,
) -> Result<ConfusionMatrix, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut m = ConfusionMatrix::default();
    let mut unresolved = Vec::new();
    let mut seen = BTreeMap::new();
    for r in records {
        let g = *gold
            .get(&r.sentence_id)
            .ok_or_else(|| MetricsError::UnknownSentence(r.sentence_id.clone()))?;
        seen.insert(&r.sentence_id, ());
        match r.outcome.label() {
            Some(p) => m.add(g, p),
            None => {
                unresolved.push(r.sentence_id.clone());
                m.add_unresolved(g);
            }
        }
    }
    if let Some(missing) = gold.keys().find(|id| !seen.contains_key(id)) {
        return Err(MetricsError::MissingPrediction(missing.clone()));
    }
    if policy == UnresolvedPolicy::Reject && !unresolved.is_empty() {
        return Err(MetricsError::UnresolvedPredictions(unresolved));
    }
    Ok(m)
}

/// Which classes enter the macro average.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Classes with gold support > 0.
    #[default]
    PresentInGold,
    AllClasses,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassMetrics<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub support: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricReport<T> {
    pub per_class: [ClassMetrics<T>; 3],
    pub macro_precision: T,
    pub macro_recall: T,
    pub macro_f1: T,
    pub too_neutral_rate: T,
    pub polarized_rate: T,
    pub averaging: Averaging,
}

impl<T: Scalar> MetricReport<T> {
    pub fn class(&self, s: Sentiment) -> &ClassMetrics<T> {
        &self.per_class[s.index()]
    }

    pub fn to_f64(&self) -> MetricReport<f64> {
        let conv = |c: &ClassMetrics<T>| ClassMetrics {
            precision: c.precision.as_f64(),
            recall: c.recall.as_f64(),
            f1: c.f1.as_f64(),
            support: c.support,
        };
        MetricReport {
            per_class: [conv(&self.per_class[0]), conv(&self.per_class[1]), conv(&self.per_class[2])],
            macro_precision: self.macro_precision.as_f64(),
            macro_recall: self.macro_recall.as_f64(),
            macro_f1: self.macro_f1.as_f64(),
            too_neutral_rate: self.too_neutral_rate.as_f64(),
            polarized_rate: self.polarized_rate.as_f64(),
            averaging: self.averaging,
        }
    }
}

fn safe_ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::ratio(num, den)
    }
}

pub fn class_metrics<T: Scalar>(m: &ConfusionMatrix, class: Sentiment) -> ClassMetrics<T> {
    let tp = m.get(class, class);
    let precision: T = safe_ratio(tp, m.predicted(class));
    let recall: T = safe_ratio(tp, m.support(class));
    let sum = precision + recall;
    let f1 = if sum == T::zero() {
        T::zero()
    } else {
        (precision + precision) * recall / sum
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: m.support(class),
    }
}

/// Per-class and macro-averaged precision, recall and F1. Zero denominators
/// give 0.
pub fn macro_metrics<T: Scalar>(m: &ConfusionMatrix, averaging: Averaging) -> Result<MetricReport<T>, MetricsError> {
    if m.total() == 0 {
        return Err(MetricsError::Empty);
    }
    let per_class = Sentiment::ALL.map(|s| class_metrics::<T>(m, s));
    let included = || {
        per_class
            .iter()
            .filter(move |c| averaging == Averaging::AllClasses || c.support > 0)
    };
    let (too_neutral_rate, polarized_rate) = neutrality_diagnostics(m);
    Ok(MetricReport {
        macro_precision: mean(included().map(|c| c.precision)).unwrap_or_else(T::zero),
        macro_recall: mean(included().map(|c| c.recall)).unwrap_or_else(T::zero),
        macro_f1: mean(included().map(|c| c.f1)).unwrap_or_else(T::zero),
        per_class,
        too_neutral_rate,
        polarized_rate,
        averaging,
    })
}

/// `(too_neutral_rate, polarized_rate)`: the share of gold negative/positive
/// items predicted neutral, and of gold neutral items predicted
/// negative/positive. Each is 0 when its gold group is empty.
pub fn neutrality_diagnostics<T: Scalar>(m: &ConfusionMatrix) -> (T, T) {
    use Sentiment::*;
    let polar_gold = m.support(Negative) + m.support(Positive);
    let polar_to_neutral = m.get(Negative, Neutral) + m.get(Positive, Neutral);
    let neutral_to_polar = m.get(Neutral, Negative) + m.get(Neutral, Positive);
    (
        safe_ratio(polar_to_neutral, polar_gold),
        safe_ratio(neutral_to_polar, m.support(Neutral)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use Sentiment::*;

    #[test]
    fn confusion_counts_pairs() {
        let m = confusion(&[Negative, Negative, Neutral, Positive], &[Negative, Neutral, Neutral, Positive]).unwrap();
        assert_eq!((m.get(Negative, Negative), m.get(Neutral, Neutral), m.get(Positive, Positive)), (1, 1, 1));
        assert_eq!(m.get(Negative, Neutral), 1);
        assert_eq!(m.total(), 4);
        assert!(matches!(confusion(&[], &[]), Err(MetricsError::Empty)));
        assert!(matches!(confusion(&[Negative], &[]), Err(MetricsError::LengthMismatch { .. })));
    }

    // Frozen from oracles/fixture_oracle.py.
    #[test]
    fn macro_metrics_match_counting_oracle() {
        let m = confusion(&[Negative, Negative, Neutral, Positive], &[Negative, Neutral, Neutral, Positive]).unwrap();
        let r = macro_metrics::<Rational>(&m, Averaging::PresentInGold).unwrap();
        let f1: Vec<_> = r.per_class.iter().map(|c| c.f1).collect();
        assert_eq!(f1, [Rational::new(2, 3), Rational::new(2, 3), Rational::from_integer(1)]);
        assert_eq!(r.macro_f1, Rational::new(7, 9));
        assert_eq!(r.macro_precision, Rational::new(5, 6));
        assert_eq!(r.macro_recall, Rational::new(5, 6));
        let f = macro_metrics::<f64>(&m, Averaging::PresentInGold).unwrap();
        assert!((f.macro_f1 - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let g = [Negative, Neutral, Positive, Neutral];
        let r = macro_metrics::<f64>(&confusion(&g, &g).unwrap(), Averaging::PresentInGold).unwrap();
        assert_eq!((r.macro_f1, r.macro_precision, r.macro_recall), (1.0, 1.0, 1.0));
        assert_eq!((r.too_neutral_rate, r.polarized_rate), (0.0, 0.0));
    }

    #[test]
    fn averaging_modes_differ_when_a_class_is_absent() {
        let g = [Negative, Neutral];
        let m = confusion(&g, &g).unwrap();
        let present = macro_metrics::<Rational>(&m, Averaging::PresentInGold).unwrap();
        let all = macro_metrics::<Rational>(&m, Averaging::AllClasses).unwrap();
        assert_eq!(present.macro_f1, Rational::from_integer(1));
        assert_eq!(all.macro_f1, Rational::new(2, 3));
    }

    #[test]
    fn imbalance_can_push_f1_below_precision_and_recall() {
        // one rare positive mislabeled neutral, many correct neutrals
        let mut gold = vec![Neutral; 8];
        gold.extend([Negative, Negative, Positive]);
        let mut pred = vec![Neutral; 8];
        pred.extend([Negative, Neutral, Positive]);
        pred[0] = Positive;
        let r = macro_metrics::<f64>(&confusion(&gold, &pred).unwrap(), Averaging::PresentInGold).unwrap();
        assert!(r.macro_f1 < r.macro_precision && r.macro_f1 < r.macro_recall, "{r:?}");
    }

    #[test]
    fn neutrality_rates() {
        let m = confusion(&[Negative, Positive, Neutral, Neutral], &[Neutral, Neutral, Neutral, Negative]).unwrap();
        assert_eq!(neutrality_diagnostics::<Rational>(&m), (Rational::from_integer(1), Rational::new(1, 2)));

        let g = [Negative, Neutral, Positive];
        let all_neutral = confusion(&g, &[Neutral; 3]).unwrap();
        assert_eq!(neutrality_diagnostics::<f64>(&all_neutral), (1.0, 0.0));
    }

    #[test]
    fn unresolved_records_lower_recall_only() {
        let mut m = ConfusionMatrix::default();
        m.add(Negative, Negative);
        m.add_unresolved(Negative);
        let c = class_metrics::<Rational>(&m, Negative);
        assert_eq!((c.precision, c.recall), (Rational::from_integer(1), Rational::new(1, 2)));
    }
}
