//! Inter-rater reliability.
//!
//! Fleiss' kappa over item-by-category count matrices, Cohen's kappa between
//! two label sequences, and the percent-agreement tables built from unified
//! labels. Point estimates are generic over [`Scalar`] so they can be
//! evaluated exactly; significance needs a float type.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Float;
use serde::Serialize;
use libm::erfc;
use thiserror::Error;

use crate::annotation::{AnnotationRecord, RaterGroup, Sentiment, UnifiedLabel, VoteCounts};
use crate::corpus::{Lexicon, Sentence};
use crate::ids::{SentenceId, TermId};
use crate::scalar::{is_zero, mean, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("count matrix has no items")]
    TooFewItems(usize),
    #[error("count matrix needs at least 2 raters per item, got {0}")]
    TooFewRaters(u32),
    #[error("count matrix needs at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("row {row} sums to {found}, expected {expected}")]
    UnequalRowSum { row: usize, expected: u32, found: u32 },
    #[error("row {row} has {found} categories, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("kappa undefined: chance agreement is 1 (all mass in one category)")]
    UndefinedKappa,
    #[error("label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label sequences need at least 2 items, got {0}")]
    TooShort(usize),
}

/// Item-by-category counts of rater assignments; every row sums to the
/// number of raters per item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountMatrix {
    rows: Vec<Vec<u32>>,
    raters_per_item: u32,
}

impl CountMatrix {
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self, AgreementError> {
        let width = rows.first().map_or(0, Vec::len);
        let n = rows.first().map_or(0, |r| r.iter().sum());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(AgreementError::RaggedRow {
                    row: i,
                    expected: width,
                    found: r.len(),
                });
            }
            let s: u32 = r.iter().sum();
            if s != n {
                return Err(AgreementError::UnequalRowSum {
                    row: i,
                    expected: n,
                    found: s,
                });
            }
        }
        Ok(Self {
            rows,
            raters_per_item: n,
        })
    }

    pub fn from_votes<'a>(votes: impl IntoIterator<Item = &'a VoteCounts>) -> Result<Self, AgreementError> {
        Self::new(votes.into_iter().map(|v| v.0.to_vec()).collect())
    }

    /// Pools the ratings of the given groups per sentence (sentence id order).
    pub fn from_records(records: &[AnnotationRecord], groups: &[RaterGroup]) -> Result<Self, AgreementError> {
        let mut per: BTreeMap<&SentenceId, VoteCounts> = BTreeMap::new();
        for r in records.iter().filter(|r| groups.contains(&r.group)) {
            per.entry(&r.sentence_id).or_default().add(r.label);
        }
        Self::from_votes(per.values())
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn items(&self) -> usize {
        self.rows.len()
    }

    pub fn categories(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn raters_per_item(&self) -> u32 {
        self.raters_per_item
    }
}

/// Kappa with its null-hypothesis z statistic and two-sided p-value.
///
/// `observed` and `expected` are the observed and chance agreement the
/// kappa was built from (P̄ and P̄e for Fleiss, po and pe for Cohen).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KappaResult<T> {
    pub kappa: T,
    pub z: T,
    pub p: T,
    pub observed: T,
    pub expected: T,
}

/// Point estimate and null variance of a kappa statistic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaComponents<T> {
    pub observed: T,
    pub expected: T,
    pub kappa: T,
    pub null_variance: T,
}

impl<T: Scalar + Float> KappaComponents<T> {
    fn into_result(self) -> KappaResult<T> {
        let se = self.null_variance.sqrt();
        let z = if se > T::zero() {
            self.kappa / se
        } else {
            T::infinity() * self.kappa.signum()
        };
        let p = erfc(z.abs().as_f64() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
        KappaResult {
            kappa: self.kappa,
            z,
            p: T::from_f64(p).unwrap_or_else(T::nan),
            observed: self.observed,
            expected: self.expected,
        }
    }
}

/// Fleiss' kappa point estimate and its large-sample null variance
/// (Fleiss, Nee & Landis form).
pub fn fleiss_components<T: Scalar>(matrix: &CountMatrix) -> Result<KappaComponents<T>, AgreementError> {
    let items = matrix.items();
    let n = matrix.raters_per_item;
    let k = matrix.categories();
    if items == 0 {
        return Err(AgreementError::TooFewItems(items));
    }
    if n < 2 {
        return Err(AgreementError::TooFewRaters(n));
    }
    if k < 2 {
        return Err(AgreementError::TooFewCategories(k));
    }
    let n64 = n as u64;
    let pair_den = n64 * (n64 - 1);
    let per_item = matrix.rows.iter().map(|row| {
        let sq: u64 = row.iter().map(|&c| (c as u64) * (c as u64)).sum();
        T::ratio(sq - n64, pair_den)
    });
    let observed = mean(per_item).expect("non-empty");

    let total = items as u64 * n64;
    let shares: Vec<T> = (0..k)
        .map(|j| T::ratio(matrix.rows.iter().map(|r| r[j] as u64).sum(), total))
        .collect();
    let expected = shares.iter().fold(T::zero(), |acc, &p| acc + p * p);
    let one = T::one();
    if is_zero(one - expected) {
        return Err(AgreementError::UndefinedKappa);
    }
    let kappa = (observed - expected) / (one - expected);

    let two = one + one;
    let spread = shares.iter().fold(T::zero(), |acc, &p| acc + p * (one - p));
    let skew = shares
        .iter()
        .fold(T::zero(), |acc, &p| acc + p * (one - p) * (one - two * p));
    let null_variance = two / T::from_count(total * (n64 - 1)) * (spread * spread - skew) / (spread * spread);
    Ok(KappaComponents {
        observed,
        expected,
        kappa,
        null_variance,
    })
}

/// Fleiss' kappa with a two-sided z-test against zero.
pub fn fleiss_kappa<T: Scalar + Float>(matrix: &CountMatrix) -> Result<KappaResult<T>, AgreementError> {
    fleiss_components::<T>(matrix).map(KappaComponents::into_result)
}

/// Cohen's kappa point estimate with the asymptotic null variance
/// (Fleiss, Cohen & Everitt).
pub fn cohen_components<T: Scalar>(a: &[Sentiment], b: &[Sentiment]) -> Result<KappaComponents<T>, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len() as u64;
    if n < 2 {
        return Err(AgreementError::TooShort(a.len()));
    }
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u64;
    let observed = T::ratio(agree, n);
    let mut ma = [0u64; 3];
    let mut mb = [0u64; 3];
    for (x, y) in a.iter().zip(b) {
        ma[x.index()] += 1;
        mb[y.index()] += 1;
    }
    let one = T::one();
    let (mut expected, mut cross) = (T::zero(), T::zero());
    for j in 0..3 {
        let (pa, pb) = (T::ratio(ma[j], n), T::ratio(mb[j], n));
        expected = expected + pa * pb;
        cross = cross + pa * pb * (pa + pb);
    }
    if is_zero(one - expected) {
        return Err(AgreementError::UndefinedKappa);
    }
    let kappa = (observed - expected) / (one - expected);
    let null_variance = (expected + expected * expected - cross) / (T::from_count(n) * (one - expected) * (one - expected));
    Ok(KappaComponents {
        observed,
        expected,
        kappa,
        null_variance,
    })
}

/// Cohen's kappa between two label sequences; `observed` is the raw agreement.
pub fn cohen_kappa<T: Scalar + Float>(a: &[Sentiment], b: &[Sentiment]) -> Result<KappaResult<T>, AgreementError> {
    cohen_components::<T>(a, b).map(KappaComponents::into_result)
}

/// Qualitative band for a kappa value: poor < 0.20, fair ≤ 0.40,
/// moderate ≤ 0.60, good ≤ 0.80, very good above.
pub fn agreement_band(kappa: f64) -> &'static str {
    if kappa <= 0.20 {
        "poor"
    } else if kappa <= 0.40 {
        "fair"
    } else if kappa <= 0.60 {
        "moderate"
    } else if kappa <= 0.80 {
        "good"
    } else {
        "very good"
    }
}

/// Mean agreement per (group, unified label). Cells with no sentences are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelAgreementTable<T> {
    pub cells: BTreeMap<RaterGroup, [Option<T>; 3]>,
}

impl<T: Copy> LabelAgreementTable<T> {
    pub fn get(&self, group: RaterGroup, label: Sentiment) -> Option<T> {
        self.cells.get(&group).and_then(|row| row[label.index()])
    }
}

pub fn percent_agreement_by_label<T: Scalar>(unified: &[UnifiedLabel]) -> LabelAgreementTable<T> {
    let mut cells = BTreeMap::new();
    for group in RaterGroup::ALL {
        let of_group: Vec<&UnifiedLabel> = unified.iter().filter(|u| u.group == group).collect();
        if of_group.is_empty() {
            continue;
        }
        let row = Sentiment::ALL.map(|s| mean(of_group.iter().filter(|u| u.label == s).map(|u| u.agreement_as::<T>())));
        cells.insert(group, row);
    }
    LabelAgreementTable { cells }
}

/// Mean agreement with the unified label over the sentences containing one term.
#[derive(Clone, Debug, PartialEq)]
pub struct WordAgreement<T> {
    pub term_id: TermId,
    pub sentences: usize,
    pub by_group: BTreeMap<RaterGroup, T>,
}

impl<T: Scalar> WordAgreement<T> {
    /// Mean over the groups present.
    pub fn combined(&self) -> Option<T> {
        mean(self.by_group.values().copied())
    }
}

/// Per-term agreement, ordered from lowest to highest combined mean (ties in
/// lexicon order). Terms without sentences are omitted.
pub fn word_level_agreement<T: Scalar>(
    unified: &[UnifiedLabel],
    sentences: &[Sentence],
    lexicon: &Lexicon,
) -> Vec<WordAgreement<T>> {
    let mut rows = Vec::new();
    for term in lexicon.term_ids() {
        let ids: BTreeSet<&SentenceId> = sentences
            .iter()
            .filter(|s| s.contains_term(term))
            .map(|s| &s.sentence_id)
            .collect();
        if ids.is_empty() {
            continue;
        }
        let mut by_group = BTreeMap::new();
        for group in RaterGroup::ALL {
            let vals = unified
                .iter()
                .filter(|u| u.group == group && ids.contains(&u.sentence_id))
                .map(|u| u.agreement_as::<T>());
            if let Some(m) = mean(vals) {
                by_group.insert(group, m);
            }
        }
        if !by_group.is_empty() {
            rows.push(WordAgreement {
                term_id: term.clone(),
                sentences: ids.len(),
                by_group,
            });
        }
    }
    // stable sort keeps lexicon order among equal means
    rows.sort_by(|a, b| {
        a.combined()
            .partial_cmp(&b.combined())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows
}

/// Mean of the per-term means for `terms` in one group.
pub fn term_subset_mean<T: Scalar>(rows: &[WordAgreement<T>], terms: &[TermId], group: RaterGroup) -> Option<T> {
    mean(
        rows.iter()
            .filter(|r| terms.contains(&r.term_id))
            .filter_map(|r| r.by_group.get(&group).copied()),
    )
}

/// Unified label counts for one group, optionally restricted to `ids`.
pub fn label_distribution(unified: &[UnifiedLabel], group: RaterGroup, ids: Option<&BTreeSet<SentenceId>>) -> [u32; 3] {
    let mut counts = [0u32; 3];
    for u in unified
        .iter()
        .filter(|u| u.group == group && ids.is_none_or(|ids| ids.contains(&u.sentence_id)))
    {
        counts[u.label.index()] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use Sentiment::*;

    fn matrix(rows: &[[u32; 3]]) -> CountMatrix {
        CountMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    // Frozen from oracles/fixture_oracle.py (direct formula, exact fractions).
    #[test]
    fn fleiss_small_fixture_matches_oracle() {
        let m = matrix(&[[3, 0, 0], [0, 3, 0], [2, 1, 0], [1, 1, 1]]);
        let exact = fleiss_components::<Rational>(&m).unwrap();
        assert_eq!(exact.observed, Rational::new(7, 12));
        assert_eq!(exact.expected, Rational::new(31, 72));
        assert_eq!(exact.kappa, Rational::new(11, 41));
        let r = fleiss_kappa::<f64>(&m).unwrap();
        assert!((r.kappa - 0.2682926829268293).abs() < 1e-12);
        assert!((r.z - 1.1280815231509962).abs() < 1e-9);
        assert!((r.p - 0.25928549157028746).abs() < 1e-9);
    }

    #[test]
    fn fleiss_perfect_agreement_is_one() {
        let m = matrix(&[[3, 0, 0], [0, 3, 0], [0, 0, 3]]);
        assert_eq!(fleiss_components::<Rational>(&m).unwrap().kappa, Rational::from_integer(1));
        assert_eq!(fleiss_kappa::<f64>(&m).unwrap().kappa, 1.0);
    }

    #[test]
    fn fleiss_errors() {
        let single = matrix(&[[3, 0, 0], [3, 0, 0]]);
        assert_eq!(fleiss_kappa::<f64>(&single).unwrap_err(), AgreementError::UndefinedKappa);
        assert!(matches!(CountMatrix::new(vec![]).map(|m| fleiss_kappa::<f64>(&m)), Ok(Err(AgreementError::TooFewItems(0)))));
        let one = fleiss_components::<Rational>(&matrix(&[[1, 1, 1]])).unwrap();
        assert_eq!(one.kappa, Rational::new(-1, 2));
        assert!(matches!(
            CountMatrix::new(vec![vec![3, 0, 0], vec![2, 0, 0]]),
            Err(AgreementError::UnequalRowSum { row: 1, .. })
        ));
        assert!(matches!(
            fleiss_kappa::<f64>(&matrix(&[[1, 0, 0], [0, 1, 0]])),
            Err(AgreementError::TooFewRaters(1))
        ));
    }

    #[test]
    fn cohen_small_fixture_matches_oracle() {
        let a = [Negative, Negative, Neutral, Positive];
        let b = [Negative, Neutral, Neutral, Positive];
        let exact = cohen_components::<Rational>(&a, &b).unwrap();
        assert_eq!(exact.observed, Rational::new(3, 4));
        assert_eq!(exact.expected, Rational::new(5, 16));
        assert_eq!(exact.kappa, Rational::new(7, 11));
        let r = cohen_kappa::<f64>(&a, &b).unwrap();
        assert!((r.z - 2.0).abs() < 1e-12);
        assert!((r.p - 0.04550026389635844).abs() < 1e-12);
    }

    #[test]
    fn cohen_identity_and_errors() {
        let a = [Negative, Neutral, Positive, Neutral];
        let r = cohen_kappa::<f64>(&a, &a).unwrap();
        assert_eq!((r.kappa, r.observed), (1.0, 1.0));
        let same = [Neutral, Neutral];
        assert_eq!(cohen_kappa::<f64>(&same, &same).unwrap_err(), AgreementError::UndefinedKappa);
        assert!(matches!(cohen_kappa::<f64>(&a, &a[..2]), Err(AgreementError::LengthMismatch(4, 2))));
    }

    #[test]
    fn f32_and_f64_agree() {
        let m = matrix(&[[3, 0, 0], [0, 3, 0], [2, 1, 0], [1, 1, 1]]);
        let a = fleiss_kappa::<f32>(&m).unwrap().kappa as f64;
        let b = fleiss_kappa::<f64>(&m).unwrap().kappa;
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn bands() {
        assert_eq!(agreement_band(0.323), "fair");
        assert_eq!(agreement_band(0.673), "good");
    }

    fn unified(id: &str, group: RaterGroup, counts: [u32; 3], label: Sentiment) -> UnifiedLabel {
        let vc = VoteCounts(counts);
        UnifiedLabel {
            sentence_id: id.into(),
            group,
            label,
            agreement: Rational::new(vc.max() as i128, vc.total() as i128),
            vote_counts: vc,
            tie_broken: false,
        }
    }

    #[test]
    fn label_table_reports_absent_cells() {
        let u = vec![
            unified("a", RaterGroup::Physician, [10, 0, 0], Negative),
            unified("b", RaterGroup::Physician, [7, 3, 0], Negative),
            unified("c", RaterGroup::Physician, [0, 6, 4], Neutral),
        ];
        let t = percent_agreement_by_label::<Rational>(&u);
        assert_eq!(t.get(RaterGroup::Physician, Negative), Some(Rational::new(17, 20)));
        assert_eq!(t.get(RaterGroup::Physician, Neutral), Some(Rational::new(3, 5)));
        assert_eq!(t.get(RaterGroup::Physician, Positive), None);
        assert_eq!(t.get(RaterGroup::NonPhysician, Negative), None);
    }
}
