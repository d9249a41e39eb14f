//! Multi-rater sentiment annotations and per-group unified labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{RaterId, SentenceId};
use crate::scalar::{Rational, Scalar};

/// Three-way sentiment. Reports order it negative < neutral < positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }

    pub fn is_polar(self) -> bool {
        self != Sentiment::Neutral
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown sentiment label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for Sentiment {
    type Err = UnknownLabel;

    /// Case-insensitive; surrounding whitespace is ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" => Ok(Sentiment::Negative),
            "neutral" => Ok(Sentiment::Neutral),
            "positive" => Ok(Sentiment::Positive),
            _ => Err(UnknownLabel(s.to_owned())),
        }
    }
}

/// Rater cohort, which is also the point of view a label is judged from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RaterGroup {
    #[serde(rename = "physician")]
    Physician,
    #[serde(rename = "non-physician", alias = "non_physician", alias = "nonphysician")]
    NonPhysician,
}

/// Point of view under which a sentence is judged.
pub type Pov = RaterGroup;

impl RaterGroup {
    pub const ALL: [RaterGroup; 2] = [RaterGroup::Physician, RaterGroup::NonPhysician];

    pub fn as_str(self) -> &'static str {
        match self {
            RaterGroup::Physician => "physician",
            RaterGroup::NonPhysician => "non-physician",
        }
    }
}

impl fmt::Display for RaterGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rater group {0:?}")]
pub struct UnknownGroup(pub String);

impl FromStr for RaterGroup {
    type Err = UnknownGroup;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match norm.as_str() {
            "physician" | "phys" | "md" => Ok(RaterGroup::Physician),
            "nonphysician" | "nonphys" | "patient" => Ok(RaterGroup::NonPhysician),
            _ => Err(UnknownGroup(s.to_owned())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sentence_id: SentenceId,
    pub rater_id: RaterId,
    pub group: RaterGroup,
    pub label: Sentiment,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed annotation file: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("import mapping: {0}")]
    Mapping(String),
    #[error("sentence {sentence_id}: {group} raters tie between {tied:?} without neutral")]
    NonNeutralTie {
        sentence_id: SentenceId,
        group: RaterGroup,
        tied: Vec<Sentiment>,
    },
    #[error("sentence {sentence_id}: {group} raters tie between {tied:?}")]
    UnresolvedTie {
        sentence_id: SentenceId,
        group: RaterGroup,
        tied: Vec<Sentiment>,
    },
}

/// Reads the canonical long layout `sentence_id,rater_id,group,label`.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| AnnotationError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_annotations(file, &ImportMapping::default())
}

/// How a third-party annotation file maps onto [`AnnotationRecord`]s.
///
/// `long` files carry one rating per row. `wide` files carry one sentence per
/// row and one column per rater; rater columns are assigned to a group by
/// explicit lists or by column-name prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "lowercase")]
pub enum ImportMapping {
    Long {
        #[serde(default = "default_sentence_col")]
        sentence_id: String,
        #[serde(default = "default_rater_col")]
        rater_id: String,
        #[serde(default = "default_group_col")]
        group: String,
        #[serde(default = "default_label_col")]
        label: String,
        #[serde(default)]
        label_aliases: BTreeMap<String, Sentiment>,
    },
    Wide {
        #[serde(default = "default_sentence_col")]
        sentence_id: String,
        #[serde(default)]
        physician_columns: Vec<String>,
        #[serde(default)]
        non_physician_columns: Vec<String>,
        #[serde(default)]
        physician_prefix: Option<String>,
        #[serde(default)]
        non_physician_prefix: Option<String>,
        #[serde(default)]
        label_aliases: BTreeMap<String, Sentiment>,
    },
}

fn default_sentence_col() -> String {
    "sentence_id".into()
}
fn default_rater_col() -> String {
    "rater_id".into()
}
fn default_group_col() -> String {
    "group".into()
}
fn default_label_col() -> String {
    "label".into()
}

impl Default for ImportMapping {
    fn default() -> Self {
        ImportMapping::Long {
            sentence_id: default_sentence_col(),
            rater_id: default_rater_col(),
            group: default_group_col(),
            label: default_label_col(),
            label_aliases: BTreeMap::new(),
        }
    }
}

fn parse_label(raw: &str, aliases: &BTreeMap<String, Sentiment>) -> Result<Sentiment, UnknownLabel> {
    let key = raw.trim().to_ascii_lowercase();
    if let Some(s) = aliases.iter().find(|(k, _)| k.to_ascii_lowercase() == key).map(|(_, v)| *v) {
        return Ok(s);
    }
    raw.parse()
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, AnnotationError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| AnnotationError::Mapping(format!("column {name:?} not found")))
}

/// Reads annotations through an import mapping.
pub fn read_annotations(reader: impl Read, mapping: &ImportMapping) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    match mapping {
        ImportMapping::Long {
            sentence_id,
            rater_id,
            group,
            label,
            label_aliases,
        } => {
            let (cs, cr, cg, cl) = (
                column(&headers, sentence_id)?,
                column(&headers, rater_id)?,
                column(&headers, group)?,
                column(&headers, label)?,
            );
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let row = i + 2;
                let field = |c: usize| rec.get(c).unwrap_or("").trim().to_owned();
                let err = |message: String| AnnotationError::Row { row, message };
                out.push(AnnotationRecord {
                    sentence_id: SentenceId(field(cs)),
                    rater_id: RaterId(field(cr)),
                    group: field(cg).parse().map_err(|e: UnknownGroup| err(e.to_string()))?,
                    label: parse_label(&field(cl), label_aliases).map_err(|e| err(e.to_string()))?,
                });
            }
        }
        ImportMapping::Wide {
            sentence_id,
            physician_columns,
            non_physician_columns,
            physician_prefix,
            non_physician_prefix,
            label_aliases,
        } => {
            let cs = column(&headers, sentence_id)?;
            let mut raters = Vec::new();
            for (idx, name) in headers.iter().enumerate() {
                let name = name.trim();
                let by_list = if physician_columns.iter().any(|c| c == name) {
                    Some(RaterGroup::Physician)
                } else if non_physician_columns.iter().any(|c| c == name) {
                    Some(RaterGroup::NonPhysician)
                } else {
                    None
                };
                // longer prefix wins so "non_phys" is not swallowed by "phys"
                let mut by_prefix: Vec<(usize, RaterGroup)> = Vec::new();
                if let Some(p) = physician_prefix.as_deref().filter(|p| name.starts_with(*p)) {
                    by_prefix.push((p.len(), RaterGroup::Physician));
                }
                if let Some(p) = non_physician_prefix.as_deref().filter(|p| name.starts_with(*p)) {
                    by_prefix.push((p.len(), RaterGroup::NonPhysician));
                }
                by_prefix.sort();
                if let Some(group) = by_list.or(by_prefix.last().map(|(_, g)| *g)) {
                    raters.push((idx, RaterId(name.to_owned()), group));
                }
            }
            if raters.is_empty() {
                return Err(AnnotationError::Mapping("no rater columns matched".into()));
            }
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let row = i + 2;
                let sid = SentenceId(rec.get(cs).unwrap_or("").trim().to_owned());
                for (idx, rater, group) in &raters {
                    let raw = rec.get(*idx).unwrap_or("").trim();
                    if raw.is_empty() {
                        continue;
                    }
                    let label = parse_label(raw, label_aliases)
                        .map_err(|e| AnnotationError::Row { row, message: e.to_string() })?;
                    out.push(AnnotationRecord {
                        sentence_id: sid.clone(),
                        rater_id: rater.clone(),
                        group: *group,
                        label,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupSizeDeviation {
    pub group: RaterGroup,
    pub expected: usize,
    pub found: usize,
}

/// Completeness check of an annotation set. Passes iff every rater labeled
/// every sentence exactly once and each group has the expected size.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub sentences: usize,
    pub raters: BTreeMap<RaterGroup, usize>,
    pub records: usize,
    pub missing: Vec<(SentenceId, RaterId)>,
    pub duplicates: Vec<(SentenceId, RaterId)>,
    pub multi_group_raters: Vec<RaterId>,
    pub group_size_deviations: Vec<GroupSizeDeviation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.missing.is_empty()
            && self.duplicates.is_empty()
            && self.multi_group_raters.is_empty()
            && self.group_size_deviations.is_empty()
    }
}

pub fn validate_annotations(records: &[AnnotationRecord], expected_raters_per_group: usize) -> ValidationReport {
    let mut sentences = BTreeSet::new();
    let mut groups_of: BTreeMap<&RaterId, BTreeSet<RaterGroup>> = BTreeMap::new();
    let mut seen: BTreeMap<(&SentenceId, &RaterId), usize> = BTreeMap::new();
    for r in records {
        sentences.insert(&r.sentence_id);
        groups_of.entry(&r.rater_id).or_default().insert(r.group);
        *seen.entry((&r.sentence_id, &r.rater_id)).or_default() += 1;
    }
    let mut report = ValidationReport {
        sentences: sentences.len(),
        records: records.len(),
        ..Default::default()
    };
    for (rater, groups) in &groups_of {
        if groups.len() > 1 {
            report.multi_group_raters.push((*rater).clone());
        }
        for g in groups {
            *report.raters.entry(*g).or_default() += 1;
        }
    }
    for group in RaterGroup::ALL {
        let found = report.raters.get(&group).copied().unwrap_or(0);
        if found != expected_raters_per_group {
            report.group_size_deviations.push(GroupSizeDeviation {
                group,
                expected: expected_raters_per_group,
                found,
            });
        }
    }
    for s in &sentences {
        for r in groups_of.keys() {
            match seen.get(&(*s, *r)) {
                None => report.missing.push(((*s).clone(), (*r).clone())),
                Some(&n) if n > 1 => report.duplicates.push(((*s).clone(), (*r).clone())),
                _ => {}
            }
        }
    }
    report
}

/// How to resolve a shared maximum vote count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Choose neutral when it is among the tied labels; fail otherwise.
    #[default]
    PreferNeutral,
    Error,
}

/// Votes per sentiment, indexed by [`Sentiment::index`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoteCounts(pub [u32; 3]);

impl VoteCounts {
    pub fn get(&self, s: Sentiment) -> u32 {
        self.0[s.index()]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn add(&mut self, s: Sentiment) {
        self.0[s.index()] += 1;
    }

    /// Labels attaining the maximum count.
    pub fn modes(&self) -> Vec<Sentiment> {
        let m = self.max();
        Sentiment::ALL.into_iter().filter(|s| self.get(*s) == m).collect()
    }
}

/// Majority label of one group for one sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedLabel {
    pub sentence_id: SentenceId,
    pub group: RaterGroup,
    pub label: Sentiment,
    /// Share of the group's raters that chose `label`.
    pub agreement: Rational,
    pub vote_counts: VoteCounts,
    pub tie_broken: bool,
}

impl UnifiedLabel {
    pub fn agreement_as<T: Scalar>(&self) -> T {
        T::ratio(self.vote_counts.get(self.label) as u64, self.vote_counts.total() as u64)
    }
}

/// Majority label per sentence for one group, ordered by sentence id.
pub fn unify(
    records: &[AnnotationRecord],
    group: RaterGroup,
    tie_policy: TiePolicy,
) -> Result<Vec<UnifiedLabel>, AnnotationError> {
    let mut votes: BTreeMap<&SentenceId, VoteCounts> = BTreeMap::new();
    for r in records.iter().filter(|r| r.group == group) {
        votes.entry(&r.sentence_id).or_default().add(r.label);
    }
    votes
        .into_iter()
        .map(|(sid, counts)| {
            let modes = counts.modes();
            let tie_broken = modes.len() > 1;
            let label = match (tie_broken, tie_policy) {
                (false, _) => modes[0],
                (true, TiePolicy::PreferNeutral) if modes.contains(&Sentiment::Neutral) => Sentiment::Neutral,
                (true, TiePolicy::PreferNeutral) => {
                    return Err(AnnotationError::NonNeutralTie {
                        sentence_id: sid.clone(),
                        group,
                        tied: modes,
                    })
                }
                (true, TiePolicy::Error) => {
                    return Err(AnnotationError::UnresolvedTie {
                        sentence_id: sid.clone(),
                        group,
                        tied: modes,
                    })
                }
            };
            Ok(UnifiedLabel {
                sentence_id: sid.clone(),
                group,
                label,
                agreement: Rational::new(counts.max() as i128, counts.total() as i128),
                vote_counts: counts,
                tie_broken,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn votes(sid: &str, group: RaterGroup, counts: [u32; 3]) -> Vec<AnnotationRecord> {
        let prefix = match group {
            RaterGroup::Physician => "P",
            RaterGroup::NonPhysician => "N",
        };
        let mut out = Vec::new();
        let mut r = 0;
        for s in Sentiment::ALL {
            for _ in 0..counts[s.index()] {
                r += 1;
                out.push(AnnotationRecord {
                    sentence_id: sid.into(),
                    rater_id: RaterId(format!("{prefix}{r:02}")),
                    group,
                    label: s,
                });
            }
        }
        out
    }

    #[test]
    fn sentiment_parsing_and_order() {
        assert_eq!("Positive ".parse::<Sentiment>().unwrap(), Sentiment::Positive);
        assert_eq!("NEGATIVE".parse::<Sentiment>().unwrap(), Sentiment::Negative);
        assert!("mixed".parse::<Sentiment>().is_err());
        assert!(Sentiment::Negative < Sentiment::Neutral && Sentiment::Neutral < Sentiment::Positive);
        assert_eq!("non_physician".parse::<RaterGroup>().unwrap(), RaterGroup::NonPhysician);
        assert_eq!("Non-Physician".parse::<RaterGroup>().unwrap(), RaterGroup::NonPhysician);
    }

    #[test]
    fn even_neutral_negative_split_prefers_neutral() {
        let recs = votes("s1", RaterGroup::NonPhysician, [5, 5, 0]);
        let u = unify(&recs, RaterGroup::NonPhysician, TiePolicy::PreferNeutral).unwrap();
        assert_eq!(u[0].label, Sentiment::Neutral);
        assert_eq!(u[0].agreement, Rational::new(1, 2));
        assert!(u[0].tie_broken);

        let err = unify(&recs, RaterGroup::NonPhysician, TiePolicy::Error).unwrap_err();
        assert!(matches!(err, AnnotationError::UnresolvedTie { .. }));
    }

    #[test]
    fn unanimous_and_plurality() {
        let mut recs = votes("s1", RaterGroup::Physician, [0, 0, 10]);
        recs.extend(votes("s2", RaterGroup::Physician, [6, 3, 1]));
        let u = unify(&recs, RaterGroup::Physician, TiePolicy::PreferNeutral).unwrap();
        assert_eq!((u[0].label, u[0].agreement, u[0].tie_broken), (Sentiment::Positive, Rational::from_integer(1), false));
        assert_eq!((u[1].label, u[1].agreement), (Sentiment::Negative, Rational::new(3, 5)));
        assert_eq!(u[1].agreement_as::<f64>(), 0.6);
    }

    #[test]
    fn non_neutral_tie_is_an_error() {
        let recs = votes("s1", RaterGroup::Physician, [5, 0, 5]);
        let err = unify(&recs, RaterGroup::Physician, TiePolicy::PreferNeutral).unwrap_err();
        assert!(matches!(err, AnnotationError::NonNeutralTie { ref tied, .. } if tied == &[Sentiment::Negative, Sentiment::Positive]));
    }

    /// Exhaustive oracle: every 10-vote distribution, majority computed by
    /// scanning labels directly.
    #[test]
    fn unify_matches_exhaustive_vote_oracle() {
        for neg in 0..=10u32 {
            for neu in 0..=(10 - neg) {
                let pos = 10 - neg - neu;
                let counts = [neg, neu, pos];
                let best = *counts.iter().max().unwrap();
                let tied: Vec<usize> = (0..3).filter(|&i| counts[i] == best).collect();
                let recs = votes("s", RaterGroup::Physician, counts);
                let got = unify(&recs, RaterGroup::Physician, TiePolicy::PreferNeutral);
                if tied.len() > 1 && !tied.contains(&1) {
                    assert!(got.is_err(), "{counts:?}");
                    continue;
                }
                let expect_idx = if tied.len() > 1 { 1 } else { tied[0] };
                let u = &got.unwrap()[0];
                assert_eq!(u.label.index(), expect_idx, "{counts:?}");
                assert_eq!(u.agreement, Rational::new(best as i128, 10));
                assert_eq!(u.tie_broken, tied.len() > 1);
                assert!(u.agreement >= Rational::new(2, 5));
            }
        }
    }

    #[test]
    fn validation_flags_missing_and_duplicates() {
        let mut recs = Vec::new();
        for s in ["s1", "s2"] {
            recs.extend(votes(s, RaterGroup::Physician, [1, 1, 0]));
            recs.extend(votes(s, RaterGroup::NonPhysician, [0, 1, 1]));
        }
        assert!(validate_annotations(&recs, 2).passed());

        let mut missing = recs.clone();
        missing.retain(|r| !(r.sentence_id.as_str() == "s2" && r.rater_id.as_str() == "N01"));
        let report = validate_annotations(&missing, 2);
        assert!(!report.passed());
        assert_eq!(report.missing, vec![(SentenceId::from("s2"), RaterId::from("N01"))]);

        let mut dup = recs.clone();
        dup.push(recs[0].clone());
        let report = validate_annotations(&dup, 2);
        assert_eq!(report.duplicates, vec![(SentenceId::from("s1"), RaterId::from("P01"))]);

        let report = validate_annotations(&recs, 10);
        assert_eq!(report.group_size_deviations.len(), 2);
    }

    #[test]
    fn wide_import_with_prefixes_and_aliases() {
        let src = "sentence_id,text,phys_1,phys_2,non_phys_1,non_phys_2\n\
                   s1,Calm and cooperative,Neutral,positive,pos,Positive\n\
                   s2,Pt angry,negative,Negative,neg,\n";
        let mapping: ImportMapping = toml::from_str(
            r#"
            layout = "wide"
            physician_prefix = "phys_"
            non_physician_prefix = "non_phys_"
            [label_aliases]
            pos = "positive"
            neg = "negative"
            "#,
        )
        .unwrap();
        let recs = read_annotations(src.as_bytes(), &mapping).unwrap();
        assert_eq!(recs.len(), 7);
        let phys = recs.iter().filter(|r| r.group == RaterGroup::Physician).count();
        assert_eq!(phys, 4);
        assert!(recs.iter().any(|r| r.rater_id.as_str() == "non_phys_1" && r.label == Sentiment::Positive));
    }

    #[test]
    fn long_import_rejects_unknown_label() {
        let src = "sentence_id,rater_id,group,label\ns1,P01,physician,mixed\n";
        let err = read_annotations(src.as_bytes(), &ImportMapping::default()).unwrap_err();
        assert!(matches!(err, AnnotationError::Row { row: 2, .. }));
    }
}
