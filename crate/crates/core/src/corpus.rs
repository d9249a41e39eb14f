//! Descriptor lexicon, term matching and sentence corpora.
//!
//! The lexicon is explicit data: every surface form a term may take
//! (affixed, hyphenated or spaced negations, adverbial forms) is listed as a
//! variant. Matching is case-insensitive, respects word boundaries and keeps
//! the longest span at any position, so `not agitated` reports the negated
//! entry and never its base term.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{SentenceId, TermId};
use crate::scalar::{fraction_from_f64, round_half_up, Rational};

/// Default minimum sentence length; selected sentences must be strictly longer.
pub const DEFAULT_MIN_LENGTH: usize = 30;

/// Literal token that replaces protected health information.
pub const PHI_MASK: &str = "XXX";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record file: {0}")]
    Csv(#[from] csv::Error),
    #[error("lexicon has no entries")]
    EmptyLexicon,
    #[error("lexicon entry {term} has no variants")]
    NoVariants { term: TermId },
    #[error("lexicon entry {term} has an empty variant")]
    EmptyVariant { term: TermId },
    #[error("variant {variant:?} is listed under both {first} and {second}")]
    DuplicateVariant {
        variant: String,
        first: TermId,
        second: TermId,
    },
    #[error("term id {0} appears more than once")]
    DuplicateTerm(TermId),
    #[error("{term} negates unknown term {target}")]
    DanglingNegation { term: TermId, target: TermId },
    #[error("sentence id {0} appears more than once")]
    DuplicateSentence(SentenceId),
    #[error("sentence {0} has empty text")]
    EmptySentence(SentenceId),
    #[error("with-term fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
}

/// One descriptor term and all of its surface forms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub term_id: TermId,
    pub display_form: String,
    pub variants: Vec<String>,
    pub negation_of: Option<TermId>,
}

/// A validated lexicon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    /// Validates and normalizes entries. Variants are trimmed and lowercased.
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::EmptyLexicon);
        }
        let mut entries = entries;
        let mut seen_terms = HashMap::new();
        let mut owner: HashMap<String, TermId> = HashMap::new();
        for (idx, entry) in entries.iter_mut().enumerate() {
            if seen_terms.insert(entry.term_id.clone(), idx).is_some() {
                return Err(CorpusError::DuplicateTerm(entry.term_id.clone()));
            }
            if entry.variants.is_empty() {
                return Err(CorpusError::NoVariants {
                    term: entry.term_id.clone(),
                });
            }
            for variant in entry.variants.iter_mut() {
                *variant = variant.trim().to_lowercase();
                if variant.is_empty() {
                    return Err(CorpusError::EmptyVariant {
                        term: entry.term_id.clone(),
                    });
                }
                if let Some(first) = owner.insert(variant.clone(), entry.term_id.clone()) {
                    return Err(CorpusError::DuplicateVariant {
                        variant: variant.clone(),
                        first,
                        second: entry.term_id.clone(),
                    });
                }
            }
        }
        for entry in &entries {
            if let Some(target) = &entry.negation_of {
                if !seen_terms.contains_key(target) {
                    return Err(CorpusError::DanglingNegation {
                        term: entry.term_id.clone(),
                        target: target.clone(),
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term_id: &TermId) -> Option<&LexiconEntry> {
        self.entries.iter().find(|e| &e.term_id == term_id)
    }

    pub fn term_ids(&self) -> impl Iterator<Item = &TermId> {
        self.entries.iter().map(|e| &e.term_id)
    }
}

#[derive(Debug, Deserialize)]
struct LexiconRow {
    term_id: String,
    display_form: String,
    variants: String,
    #[serde(default)]
    negation_of: Option<String>,
}

/// Reads a lexicon record file (`term_id,display_form,variants,negation_of`,
/// variants separated by `;`).
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_lexicon(file)
}

pub fn read_lexicon(reader: impl Read) -> Result<Lexicon, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut entries = Vec::new();
    for row in rdr.deserialize() {
        let row: LexiconRow = row?;
        entries.push(LexiconEntry {
            term_id: TermId(row.term_id),
            display_form: row.display_form,
            variants: row
                .variants
                .split(';')
                .map(str::to_owned)
                .filter(|v| !v.trim().is_empty())
                .collect(),
            negation_of: row.negation_of.filter(|s| !s.is_empty()).map(TermId),
        });
    }
    Lexicon::new(entries)
}

/// Half-open UTF-8 byte range into a sentence's text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermMatch {
    pub term_id: TermId,
    pub span: Span,
}

/// Lowercased copy of a text with a byte map back to the original.
struct Folded {
    lowered: String,
    origin: Vec<usize>,
}

impl Folded {
    fn new(text: &str) -> Self {
        let mut lowered = String::with_capacity(text.len());
        let mut origin = Vec::with_capacity(text.len() + 1);
        for (idx, ch) in text.char_indices() {
            for lc in ch.to_lowercase() {
                let before = lowered.len();
                lowered.push(lc);
                origin.extend(std::iter::repeat(idx).take(lowered.len() - before));
            }
        }
        origin.push(text.len());
        Self { lowered, origin }
    }

    fn is_boundary(&self, at: usize) -> bool {
        let before = self.lowered[..at].chars().next_back();
        !before.is_some_and(char::is_alphanumeric)
    }

    fn is_end_boundary(&self, at: usize) -> bool {
        let after = self.lowered[at..].chars().next();
        !after.is_some_and(char::is_alphanumeric)
    }
}

/// Finds lexicon terms in `text`.
///
/// Overlapping candidates are resolved longest-first; at equal length a
/// negated entry beats its base term. Results are ordered by position.
pub fn match_terms(text: &str, lexicon: &Lexicon) -> Vec<TermMatch> {
    if text.is_empty() {
        return Vec::new();
    }
    let folded = Folded::new(text);
    // (lowered start, lowered end, entry index)
    let mut candidates = Vec::new();
    for (idx, entry) in lexicon.entries.iter().enumerate() {
        for variant in &entry.variants {
            for (start, m) in folded.lowered.match_indices(variant.as_str()) {
                let end = start + m.len();
                if folded.is_boundary(start) && folded.is_end_boundary(end) {
                    candidates.push((start, end, idx));
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        let neg_a = lexicon.entries[a.2].negation_of.is_some();
        let neg_b = lexicon.entries[b.2].negation_of.is_some();
        (b.1 - b.0)
            .cmp(&(a.1 - a.0))
            .then(neg_b.cmp(&neg_a))
            .then(a.0.cmp(&b.0))
            .then(a.2.cmp(&b.2))
    });
    let mut accepted: Vec<(usize, usize, usize)> = Vec::new();
    for cand in candidates {
        if accepted.iter().all(|a| cand.1 <= a.0 || a.1 <= cand.0) {
            accepted.push(cand);
        }
    }
    accepted.sort();
    accepted
        .into_iter()
        .map(|(start, end, idx)| TermMatch {
            term_id: lexicon.entries[idx].term_id.clone(),
            span: Span {
                start: folded.origin[start],
                end: folded.origin[end],
            },
        })
        .collect()
}

/// A PHI-masked sentence with its lexicon matches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sentence_id: SentenceId,
    pub text: String,
    #[serde(default)]
    pub matched_terms: Vec<TermMatch>,
    #[serde(default)]
    pub source_ref: Option<String>,
}

impl Sentence {
    pub fn new(sentence_id: impl Into<SentenceId>, text: impl Into<String>) -> Self {
        Self {
            sentence_id: sentence_id.into(),
            text: text.into(),
            matched_terms: Vec::new(),
            source_ref: None,
        }
    }

    /// Recomputes `matched_terms` against `lexicon`.
    pub fn annotate(mut self, lexicon: &Lexicon) -> Self {
        self.matched_terms = match_terms(&self.text, lexicon);
        self
    }

    /// Character count, whitespace included.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn contains_term(&self, term: &TermId) -> bool {
        self.matched_terms.iter().any(|m| &m.term_id == term)
    }
}

#[derive(Debug, Deserialize)]
struct SentenceRow {
    sentence_id: String,
    text: String,
    #[serde(default)]
    source_ref: Option<String>,
}

/// Reads a sentence record file (`sentence_id,text,source_ref`) and matches
/// each sentence against the lexicon.
pub fn load_sentences(path: impl AsRef<Path>, lexicon: &Lexicon) -> Result<Vec<Sentence>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_sentences(file, lexicon)
}

pub fn read_sentences(reader: impl Read, lexicon: &Lexicon) -> Result<Vec<Sentence>, CorpusError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: SentenceRow = row?;
        let id = SentenceId(row.sentence_id.trim().to_owned());
        if row.text.trim().is_empty() {
            return Err(CorpusError::EmptySentence(id));
        }
        if seen.insert(id.clone(), ()).is_some() {
            return Err(CorpusError::DuplicateSentence(id));
        }
        let sentence = Sentence {
            sentence_id: id,
            text: row.text,
            matched_terms: Vec::new(),
            source_ref: row.source_ref.filter(|s| !s.is_empty()),
        };
        out.push(sentence.annotate(lexicon));
    }
    Ok(out)
}

/// Splits note text into sentences.
pub trait Segmenter {
    fn segment<'a>(&self, text: &'a str) -> Vec<&'a str>;
}

/// Splits after `.`, `?` or `!` when followed by whitespace. Pieces are
/// trimmed and empty pieces dropped; mask tokens are untouched.
#[derive(Clone, Copy, Debug, Default)]
pub struct PunctuationSegmenter;

impl Segmenter for PunctuationSegmenter {
    fn segment<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut start = 0;
        let mut chars = text.char_indices().peekable();
        while let Some((idx, ch)) = chars.next() {
            if matches!(ch, '.' | '?' | '!') {
                if let Some(&(_, next)) = chars.peek() {
                    if next.is_whitespace() {
                        let end = idx + ch.len_utf8();
                        out.push(&text[start..end]);
                        start = end;
                    }
                }
            }
        }
        out.push(&text[start..]);
        out.into_iter().map(str::trim).filter(|s| !s.is_empty()).collect()
    }
}

/// A clinical note to mine for candidate sentences.
#[derive(Clone, Debug)]
pub struct Note {
    pub note_id: String,
    pub text: String,
}

/// Segments notes and keeps sentences with at least one lexicon match and
/// more than `min_length` characters. Ids are `<note_id>:<segment index>`.
pub fn extract_candidates(
    notes: &[Note],
    lexicon: &Lexicon,
    segmenter: &dyn Segmenter,
    min_length: usize,
) -> Vec<Sentence> {
    let mut out = Vec::new();
    for note in notes {
        for (k, piece) in segmenter.segment(&note.text).into_iter().enumerate() {
            if piece.chars().count() <= min_length {
                continue;
            }
            let matched_terms = match_terms(piece, lexicon);
            if matched_terms.is_empty() {
                continue;
            }
            out.push(Sentence {
                sentence_id: SentenceId(format!("{}:{}", note.note_id, k)),
                text: piece.to_owned(),
                matched_terms,
                source_ref: Some(note.note_id.clone()),
            });
        }
    }
    out
}

/// Corpus for task-adaptive pretraining plus the bookkeeping behind it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TaCorpus {
    pub sentences: Vec<Sentence>,
    pub with_term: usize,
    pub without_term_available: usize,
    pub without_term_target: usize,
    pub without_term_sampled: usize,
}

impl TaCorpus {
    /// Sentences missing from the target sample when the without-term group was too small.
    pub fn shortfall(&self) -> usize {
        self.without_term_target - self.without_term_sampled
    }
}

/// Number of without-term sentences that brings the with-term share closest
/// to `fraction`: `round_half_up(n_with * (1 - f) / f)`.
pub fn ta_sample_size(n_with: usize, fraction: Rational) -> usize {
    let one = Rational::from_integer(1);
    let target = Rational::from_integer(n_with as i128) * (one - fraction) / fraction;
    round_half_up(target) as usize
}

/// Keeps every sentence that matches the lexicon and a seeded random sample
/// of the rest. Sampled sentences keep their pool order.
pub fn build_ta_corpus(
    pool: &[Sentence],
    lexicon: &Lexicon,
    with_term_fraction: f64,
    sample_seed: u64,
) -> Result<TaCorpus, CorpusError> {
    let fraction = fraction_from_f64(with_term_fraction)
        .filter(|f| *f > Rational::from_integer(0) && *f <= Rational::from_integer(1))
        .ok_or(CorpusError::InvalidFraction(with_term_fraction))?;
    let (with, without): (Vec<&Sentence>, Vec<&Sentence>) = pool
        .iter()
        .partition(|s| !match_terms(&s.text, lexicon).is_empty());
    let target = ta_sample_size(with.len(), fraction);
    let take = target.min(without.len());
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let mut picked = index::sample(&mut rng, without.len(), take).into_vec();
    picked.sort_unstable();
    let mut sentences: Vec<Sentence> = with.iter().map(|s| (*s).clone().annotate(lexicon)).collect();
    sentences.extend(picked.into_iter().map(|i| without[i].clone()));
    Ok(TaCorpus {
        with_term: with.len(),
        without_term_available: without.len(),
        without_term_target: target,
        without_term_sampled: take,
        sentences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon() -> Lexicon {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/lexicon.csv");
        load_lexicon(path).unwrap()
    }

    fn ids(matches: &[TermMatch]) -> Vec<&str> {
        matches.iter().map(|m| m.term_id.as_str()).collect()
    }

    #[test]
    fn shipped_lexicon_has_thirteen_terms_and_three_negations() {
        let lex = lexicon();
        assert_eq!(lex.len(), 13);
        let mut negations: Vec<_> = lex
            .entries()
            .iter()
            .filter_map(|e| e.negation_of.as_ref().map(|b| (e.display_form.as_str(), b.as_str())))
            .collect();
        negations.sort();
        assert_eq!(
            negations,
            vec![
                ("Non-Adherent", "adherent"),
                ("Non-Compliant", "compliant"),
                ("Not Agitated", "agitated"),
            ]
        );
    }

    #[test]
    fn empty_lexicon_is_rejected() {
        let err = read_lexicon("term_id,display_form,variants,negation_of\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyLexicon));
        assert_eq!(err.to_string(), "lexicon has no entries");
    }

    #[test]
    fn duplicate_variant_is_rejected() {
        let src = "term_id,display_form,variants,negation_of\n\
                   agitated,Agitated,agitated,\n\
                   restless,Restless,restless;Agitated,\n";
        let err = read_lexicon(src.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateVariant { ref variant, .. } if variant == "agitated"));
    }

    #[test]
    fn dangling_negation_is_rejected() {
        let src = "term_id,display_form,variants,negation_of\nnot_calm,Not Calm,not calm,calm\n";
        assert!(matches!(
            read_lexicon(src.as_bytes()).unwrap_err(),
            CorpusError::DanglingNegation { .. }
        ));
    }

    #[test]
    fn matches_table_examples() {
        let lex = lexicon();
        let m = match_terms("Pt remains aggressive and very threatening upon arrival", &lex);
        assert_eq!(ids(&m), ["aggressive"]);

        let m = match_terms("pt remained calm, not agitated, and again is without SI", &lex);
        assert_eq!(ids(&m), ["not_agitated"]);

        let text = "His worsening psychotic symptom secondary to medication non compliance";
        let m = match_terms(text, &lex);
        assert_eq!(ids(&m), ["non_compliant"]);
        assert_eq!(&text[m[0].span.start..m[0].span.end], "non compliance");

        assert!(match_terms("", &lex).is_empty());
    }

    #[test]
    fn matches_published_sample_sentences() {
        let lex = lexicon();
        let cases = [
            ("Patient very adamantly against hospitalization; states she is not suicidal", "adamant"),
            ("States he is adherent w/ his outpatient XXX and HIV meds.", "adherent"),
            ("has become active and hyperv verbal, not overly agitated but mood labile", "agitated"),
            ("He remained irritable with an angry edge but was able to respond", "angry"),
            ("She states that pt has been compliant with meds", "compliant"),
            ("Calm and cooperative, agrees with plan to stay overnight", "cooperative"),
            ("was felt to be malingering re: XXX complaints", "malingering"),
            ("Given recent non-adherence, will restart pt on VPA 500mg BID", "non_adherent"),
            ("He is not cooperative with questions and starts screaming", "uncooperative"),
        ];
        for (text, term) in cases {
            assert_eq!(ids(&match_terms(text, &lex)), [term], "{text}");
        }
        let m = match_terms("MSE: pleasant, cooperative, euthymic, speech wnl", &lex);
        assert_eq!(ids(&m), ["pleasant", "cooperative"]);
    }

    #[test]
    fn word_boundaries_are_respected() {
        let lex = lexicon();
        assert!(match_terms("The visit was unpleasant for everyone involved", &lex).is_empty());
        assert!(match_terms("angrybird", &lex).is_empty());
        assert_eq!(ids(&match_terms("ANGRY!", &lex)), ["angry"]);
    }

    #[test]
    fn spans_map_back_through_case_folding() {
        let lex = lexicon();
        let text = "ÉTAT: Pt NOT AGITATED today";
        let m = match_terms(text, &lex);
        assert_eq!(ids(&m), ["not_agitated"]);
        assert_eq!(&text[m[0].span.start..m[0].span.end], "NOT AGITATED");
    }

    #[test]
    fn segmenter_splits_on_terminal_punctuation() {
        let seg = PunctuationSegmenter;
        let parts = seg.segment("Pt is calm. Seen by XXX! Is he agitated? no.Next");
        assert_eq!(parts, ["Pt is calm.", "Seen by XXX!", "Is he agitated?", "no.Next"]);
        assert!(seg.segment("   ").is_empty());
    }

    #[test]
    fn extraction_filters_by_length_and_match() {
        let lex = lexicon();
        let notes = vec![
            Note {
                note_id: "n1".into(),
                text: "Pt is angry today. Patient remained angry with staff during XXX rounds. \
                       Vitals are stable overnight without events."
                    .into(),
            },
            Note {
                note_id: "n2".into(),
                text: "No descriptor words in this particular note at all.".into(),
            },
        ];
        let out = extract_candidates(&notes, &lex, &PunctuationSegmenter, DEFAULT_MIN_LENGTH);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].sentence_id.as_str(), "n1:1");
        assert_eq!(out[0].text, "Patient remained angry with staff during XXX rounds.");
        assert_eq!(out[0].source_ref.as_deref(), Some("n1"));
        // "Pt is angry today." is 18 characters
        assert!(out.iter().all(|s| s.char_len() > DEFAULT_MIN_LENGTH));
    }

    #[test]
    fn ta_sample_size_matches_arithmetic_oracle() {
        let f = Rational::new(17, 20);
        assert_eq!(ta_sample_size(368, f), 65);
        assert_eq!(ta_sample_size(17, f), 3);
        assert_eq!(ta_sample_size(17, Rational::from_integer(1)), 0);
    }

    fn pool(with: usize, without: usize) -> Vec<Sentence> {
        let mut v = Vec::new();
        for i in 0..with {
            v.push(Sentence::new(format!("w{i:03}"), format!("Patient {i} was angry about the plan")));
        }
        for i in 0..without {
            v.push(Sentence::new(format!("o{i:03}"), format!("Vitals {i} stable, plan unchanged")));
        }
        v
    }

    #[test]
    fn ta_corpus_keeps_all_with_term_sentences() {
        let lex = lexicon();
        let corpus = build_ta_corpus(&pool(17, 100), &lex, 0.85, 7).unwrap();
        assert_eq!(corpus.with_term, 17);
        assert_eq!(corpus.without_term_sampled, 3);
        assert_eq!(corpus.sentences.len(), 20);
        assert_eq!(corpus.shortfall(), 0);
        assert!(corpus.sentences[..17].iter().all(|s| !s.matched_terms.is_empty()));

        let only = build_ta_corpus(&pool(17, 100), &lex, 1.0, 7).unwrap();
        assert_eq!(only.sentences.len(), 17);
    }

    #[test]
    fn ta_corpus_reports_shortfall() {
        let lex = lexicon();
        let corpus = build_ta_corpus(&pool(17, 2), &lex, 0.85, 7).unwrap();
        assert_eq!(corpus.without_term_target, 3);
        assert_eq!(corpus.without_term_sampled, 2);
        assert_eq!(corpus.shortfall(), 1);
    }

    #[test]
    fn ta_corpus_rejects_bad_fraction() {
        let lex = lexicon();
        assert!(build_ta_corpus(&pool(1, 1), &lex, 0.0, 1).is_err());
        assert!(build_ta_corpus(&pool(1, 1), &lex, 1.5, 1).is_err());
    }

    #[test]
    fn ta_corpus_is_seed_deterministic() {
        let lex = lexicon();
        let p = pool(30, 200);
        let a = build_ta_corpus(&p, &lex, 0.85, 11).unwrap();
        let b = build_ta_corpus(&p, &lex, 0.85, 11).unwrap();
        assert_eq!(a, b);
    }
}
