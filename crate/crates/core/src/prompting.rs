//! Prompt rendering and the in-context example search.
//!
//! A template has two bodies. The zero-shot body has no example block. The
//! ICL body always keeps its example scaffold, even with zero examples, so
//! "ICL with no examples" and "zero-shot" are distinct prompts.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{Pov, RaterGroup, Sentiment};
use crate::ids::SentenceId;
use crate::metrics::{confusion_from_records, macro_metrics, Averaging, MetricReport, MetricsError, UnresolvedPolicy};
use crate::prediction::{PredictionRecord, PromptMode};
use crate::scalar::Rational;

pub const PHYSICIAN_INSTRUCTION: &str =
    "If you're the physician who wrote this sentence: what is your attitude towards the patient?";
pub const NON_PHYSICIAN_INSTRUCTION: &str = "If you're the patient: how do you feel reading this description of you?";
pub const ANSWER_CONSTRAINT: &str = "Answer with exactly one word: negative, neutral, or positive.";

const DEFAULT_ZERO_SHOT: &str = "{instruction}\n\
Classify the sentiment of the following sentence from a psychiatric clinical note.\n\
{constraint}\n\n\
Sentence: {sentence}\n\
Sentiment:";

const DEFAULT_ICL: &str = "{instruction}\n\
Classify the sentiment of the following sentence from a psychiatric clinical note.\n\
{constraint}\n\n\
Examples:\n\
{examples}\n\n\
Sentence: {sentence}\n\
Sentiment:";

const DEFAULT_EXAMPLE: &str = "Sentence: {sentence}\nSentiment: {label}";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {field}: unknown placeholder {{{name}}}")]
    UnknownPlaceholder { field: &'static str, name: String },
    #[error("template {field}: unterminated placeholder")]
    Unterminated { field: &'static str },
    #[error("template {field}: placeholder {{{name}}} is not allowed here")]
    Misplaced { field: &'static str, name: &'static str },
    #[error("template {field}: missing required placeholder {{{name}}}")]
    Missing { field: &'static str, name: &'static str },
    #[error("target sentence text is empty")]
    EmptySentence,
    #[error("example {0} is the target sentence")]
    Leakage(SentenceId),
    #[error("cannot read template {path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Instruction,
    Constraint,
    Examples,
    Sentence,
    Label,
}

impl Slot {
    fn name(self) -> &'static str {
        match self {
            Slot::Instruction => "instruction",
            Slot::Constraint => "constraint",
            Slot::Examples => "examples",
            Slot::Sentence => "sentence",
            Slot::Label => "label",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(Slot),
}

/// Parsed template text. `{{` and `}}` escape literal braces.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Pattern {
    source: String,
    pieces: Vec<Piece>,
}

impl Pattern {
    fn parse(field: &'static str, src: &str, allowed: &[Slot], required: &[Slot]) -> Result<Self, PromptError> {
        let mut pieces = Vec::new();
        let mut text = String::new();
        let mut chars = src.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    text.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    text.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(ch) => name.push(ch),
                            None => return Err(PromptError::Unterminated { field }),
                        }
                    }
                    let slot = match name.as_str() {
                        "instruction" => Slot::Instruction,
                        "constraint" => Slot::Constraint,
                        "examples" => Slot::Examples,
                        "sentence" => Slot::Sentence,
                        "label" => Slot::Label,
                        _ => return Err(PromptError::UnknownPlaceholder { field, name }),
                    };
                    if !allowed.contains(&slot) {
                        return Err(PromptError::Misplaced { field, name: slot.name() });
                    }
                    if !text.is_empty() {
                        pieces.push(Piece::Text(std::mem::take(&mut text)));
                    }
                    pieces.push(Piece::Slot(slot));
                }
                _ => text.push(c),
            }
        }
        if !text.is_empty() {
            pieces.push(Piece::Text(text));
        }
        for r in required {
            if !pieces.contains(&Piece::Slot(*r)) {
                return Err(PromptError::Missing { field, name: r.name() });
            }
        }
        Ok(Self {
            source: src.to_owned(),
            pieces,
        })
    }

    fn render(&self, fill: impl Fn(Slot, &mut String)) -> String {
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => fill(*s, &mut out),
            }
        }
        out
    }
}

/// On-disk template form (TOML).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub pov: Pov,
    pub instruction: String,
    #[serde(default = "default_constraint")]
    pub answer_constraint: String,
    #[serde(default = "default_zero_shot")]
    pub zero_shot: String,
    #[serde(default = "default_icl")]
    pub icl: String,
    #[serde(default = "default_example")]
    pub example: String,
    #[serde(default = "default_separator")]
    pub example_separator: String,
}

fn default_constraint() -> String {
    ANSWER_CONSTRAINT.into()
}
fn default_zero_shot() -> String {
    DEFAULT_ZERO_SHOT.into()
}
fn default_icl() -> String {
    DEFAULT_ICL.into()
}
fn default_example() -> String {
    DEFAULT_EXAMPLE.into()
}
fn default_separator() -> String {
    "\n\n".into()
}

impl TemplateSpec {
    pub fn default_for(pov: Pov) -> Self {
        Self {
            pov,
            instruction: match pov {
                RaterGroup::Physician => PHYSICIAN_INSTRUCTION.into(),
                RaterGroup::NonPhysician => NON_PHYSICIAN_INSTRUCTION.into(),
            },
            answer_constraint: default_constraint(),
            zero_shot: default_zero_shot(),
            icl: default_icl(),
            example: default_example(),
            example_separator: default_separator(),
        }
    }
}

/// A labeled sentence usable as an in-context example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub sentence_id: SentenceId,
    pub text: String,
    pub label: Sentiment,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    spec: TemplateSpec,
    zero_shot: Pattern,
    icl: Pattern,
    example: Pattern,
}

impl PromptTemplate {
    pub fn new(spec: TemplateSpec) -> Result<Self, PromptError> {
        use Slot::*;
        let zero_shot = Pattern::parse("zero_shot", &spec.zero_shot, &[Instruction, Constraint, Sentence], &[Sentence])?;
        let icl = Pattern::parse("icl", &spec.icl, &[Instruction, Constraint, Examples, Sentence], &[Examples, Sentence])?;
        let example = Pattern::parse("example", &spec.example, &[Sentence, Label], &[Sentence, Label])?;
        Ok(Self {
            spec,
            zero_shot,
            icl,
            example,
        })
    }

    pub fn default_for(pov: Pov) -> Self {
        Self::new(TemplateSpec::default_for(pov)).expect("built-in template parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let load_err = |message: String| PromptError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        let spec: TemplateSpec = toml::from_str(&text).map_err(|e| load_err(e.to_string()))?;
        Self::new(spec)
    }

    pub fn pov(&self) -> Pov {
        self.spec.pov
    }

    pub fn spec(&self) -> &TemplateSpec {
        &self.spec
    }

    fn fill_common(&self, slot: Slot, out: &mut String, sentence: &str) {
        match slot {
            Slot::Instruction => out.push_str(&self.spec.instruction),
            Slot::Constraint => out.push_str(&self.spec.answer_constraint),
            Slot::Sentence => out.push_str(sentence),
            Slot::Examples | Slot::Label => {}
        }
    }

    /// Instruction, constraint and target sentence; no example scaffold.
    pub fn render_zero_shot(&self, sentence: &str) -> Result<String, PromptError> {
        if sentence.trim().is_empty() {
            return Err(PromptError::EmptySentence);
        }
        Ok(self.zero_shot.render(|slot, out| self.fill_common(slot, out, sentence)))
    }

    fn render_examples(&self, examples: &[LabeledExample]) -> String {
        let rendered: Vec<String> = examples
            .iter()
            .map(|ex| {
                self.example.render(|slot, out| match slot {
                    Slot::Sentence => out.push_str(&ex.text),
                    Slot::Label => out.push_str(ex.label.as_str()),
                    _ => {}
                })
            })
            .collect();
        rendered.join(&self.spec.example_separator)
    }

    /// Examples in the given order inside the ICL scaffold, then the target.
    pub fn render_icl(&self, examples: &[LabeledExample], target_id: &SentenceId, target_text: &str) -> Result<String, PromptError> {
        if target_text.trim().is_empty() {
            return Err(PromptError::EmptySentence);
        }
        if let Some(ex) = examples
            .iter()
            .find(|ex| &ex.sentence_id == target_id || ex.text == target_text)
        {
            return Err(PromptError::Leakage(ex.sentence_id.clone()));
        }
        let block = self.render_examples(examples);
        Ok(self.icl.render(|slot, out| match slot {
            Slot::Examples => out.push_str(&block),
            other => self.fill_common(other, out, target_text),
        }))
    }

    /// The ICL prompt with examples filled and the target left as the
    /// literal `{sentence}` placeholder, for auditing a selected combination.
    pub fn render_icl_skeleton(&self, examples: &[LabeledExample]) -> String {
        let block = self.render_examples(examples);
        self.icl.render(|slot, out| match slot {
            Slot::Examples => out.push_str(&block),
            Slot::Sentence => out.push_str("{sentence}"),
            other => self.fill_common(other, out, ""),
        })
    }

    /// Raw template sources, for manifests.
    pub fn sources(&self) -> [&str; 3] {
        [&self.zero_shot.source, &self.icl.source, &self.example.source]
    }
}

/// Number of examples per label in an ICL prompt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IclCombination {
    pub negative: usize,
    pub neutral: usize,
    pub positive: usize,
}

impl IclCombination {
    pub fn new(negative: usize, neutral: usize, positive: usize) -> Self {
        Self {
            negative,
            neutral,
            positive,
        }
    }

    pub fn total(&self) -> usize {
        self.negative + self.neutral + self.positive
    }

    pub fn count(&self, s: Sentiment) -> usize {
        match s {
            Sentiment::Negative => self.negative,
            Sentiment::Neutral => self.neutral,
            Sentiment::Positive => self.positive,
        }
    }
}

/// Available examples per label.
pub fn label_counts(pool: &[LabeledExample]) -> IclCombination {
    let mut c = IclCombination::default();
    for ex in pool {
        match ex.label {
            Sentiment::Negative => c.negative += 1,
            Sentiment::Neutral => c.neutral += 1,
            Sentiment::Positive => c.positive += 1,
        }
    }
    c
}

/// Every combination from (0,0,0) up to the pool's per-label counts, in
/// lexicographic (negative, neutral, positive) order.
pub fn enumerate_combinations(pool: &[LabeledExample]) -> Vec<IclCombination> {
    let max = label_counts(pool);
    let mut out = Vec::with_capacity((max.negative + 1) * (max.neutral + 1) * (max.positive + 1));
    for negative in 0..=max.negative {
        for neutral in 0..=max.neutral {
            for positive in 0..=max.positive {
                out.push(IclCombination::new(negative, neutral, positive));
            }
        }
    }
    out
}

/// How pool sentences are ordered before the first `n` of each label are taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleOrdering {
    /// Ascending sentence id.
    Identity,
    /// Ascending sentence id, then a seeded shuffle per label.
    Seeded(u64),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("combination {wanted:?} exceeds the pool ({available:?})")]
pub struct InfeasibleCombination {
    pub wanted: IclCombination,
    pub available: IclCombination,
}

/// Fixed per-label example order for one pool. Selecting `n` examples of a
/// label always yields a prefix of the same list.
#[derive(Clone, Debug)]
pub struct ExampleOrder {
    by_label: [Vec<LabeledExample>; 3],
}

impl ExampleOrder {
    pub fn new(pool: &[LabeledExample], ordering: ExampleOrdering) -> Self {
        let mut by_label: [Vec<LabeledExample>; 3] = Default::default();
        for ex in pool {
            by_label[ex.label.index()].push(ex.clone());
        }
        let mut rng = match ordering {
            ExampleOrdering::Identity => None,
            ExampleOrdering::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        for list in by_label.iter_mut() {
            list.sort_by(|a, b| a.sentence_id.cmp(&b.sentence_id));
            if let Some(rng) = rng.as_mut() {
                list.shuffle(rng);
            }
        }
        Self { by_label }
    }

    /// Label blocks in negative, neutral, positive order.
    pub fn select(&self, combination: IclCombination) -> Result<Vec<LabeledExample>, InfeasibleCombination> {
        let available = IclCombination::new(self.by_label[0].len(), self.by_label[1].len(), self.by_label[2].len());
        if Sentiment::ALL.iter().any(|s| combination.count(*s) > available.count(*s)) {
            return Err(InfeasibleCombination {
                wanted: combination,
                available,
            });
        }
        Ok(Sentiment::ALL
            .iter()
            .flat_map(|s| self.by_label[s.index()].iter().take(combination.count(*s)).cloned())
            .collect())
    }
}

pub fn select_examples(
    pool: &[LabeledExample],
    combination: IclCombination,
    ordering: ExampleOrdering,
) -> Result<Vec<LabeledExample>, InfeasibleCombination> {
    ExampleOrder::new(pool, ordering).select(combination)
}

/// One prompt to classify.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptJob {
    pub sentence_id: SentenceId,
    pub prompt: String,
}

/// Labels attached to every record in a batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchContext {
    pub pov: Pov,
    pub dataset: String,
    pub mode: PromptMode,
}

/// Anything that turns prompts into prediction records, one per job, in job order.
pub trait BatchClassifier {
    fn classify(&self, ctx: &BatchContext, jobs: &[PromptJob]) -> Vec<PredictionRecord>;
}

/// Validation score of one combination.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub combination: IclCombination,
    pub report: MetricReport<Rational>,
    pub parse_failures: usize,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// One row per combination, in enumeration order.
    pub scores: Vec<ScoreRow>,
    pub best: IclCombination,
    pub best_examples: Vec<LabeledExample>,
}

impl SearchOutcome {
    pub fn best_row(&self) -> &ScoreRow {
        self.scores
            .iter()
            .find(|r| r.combination == self.best)
            .expect("best combination is scored")
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("validation sentence {0} is also in the example pool")]
    Leakage(SentenceId),
    #[error("validation set is empty")]
    EmptyValidation,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("model requests failed for combination {combination:?} ({} of them, first: {first})", failures)]
    Model {
        combination: IclCombination,
        failures: usize,
        first: String,
        /// Rows scored before the failure.
        partial: Vec<ScoreRow>,
    },
}

/// Settings for [`search`].
#[derive(Clone, Copy, Debug)]
pub struct SearchSettings {
    pub ordering: ExampleOrdering,
    pub averaging: Averaging,
}

/// Scores every combination of pool examples on the full validation set by
/// macro F1 and returns the best. Ties go to the fewest examples, then the
/// lexicographically smallest (negative, neutral, positive).
pub fn search(
    pool: &[LabeledExample],
    validation: &[LabeledExample],
    classifier: &dyn BatchClassifier,
    template: &PromptTemplate,
    dataset: &str,
    settings: SearchSettings,
) -> Result<SearchOutcome, SearchError> {
    if validation.is_empty() {
        return Err(SearchError::EmptyValidation);
    }
    let pool_ids: BTreeSet<&SentenceId> = pool.iter().map(|e| &e.sentence_id).collect();
    if let Some(v) = validation.iter().find(|v| pool_ids.contains(&v.sentence_id)) {
        return Err(SearchError::Leakage(v.sentence_id.clone()));
    }
    let gold = validation.iter().map(|v| (v.sentence_id.clone(), v.label)).collect();
    let order = ExampleOrder::new(pool, settings.ordering);
    let ctx = BatchContext {
        pov: template.pov(),
        dataset: dataset.to_owned(),
        mode: PromptMode::Icl,
    };
    let mut scores = Vec::new();
    for combination in enumerate_combinations(pool) {
        let examples = order.select(combination).expect("enumerated combinations are feasible");
        let jobs = validation
            .iter()
            .map(|v| {
                Ok(PromptJob {
                    sentence_id: v.sentence_id.clone(),
                    prompt: template.render_icl(&examples, &v.sentence_id, &v.text)?,
                })
            })
            .collect::<Result<Vec<_>, PromptError>>()?;
        let records = classifier.classify(&ctx, &jobs);
        let failed: Vec<&PredictionRecord> = records.iter().filter(|r| r.outcome.is_request_failure()).collect();
        if let Some(first) = failed.first() {
            return Err(SearchError::Model {
                combination,
                failures: failed.len(),
                first: format!("{}: {:?}", first.sentence_id, first.outcome),
                partial: scores,
            });
        }
        let matrix = confusion_from_records(&gold, &records, UnresolvedPolicy::CountAsMiss)?;
        scores.push(ScoreRow {
            combination,
            report: macro_metrics::<Rational>(&matrix, settings.averaging)?,
            parse_failures: records.iter().filter(|r| r.outcome.label().is_none()).count(),
        });
    }
    let best = scores
        .iter()
        .max_by(|a, b| {
            a.report
                .macro_f1
                .cmp(&b.report.macro_f1)
                .then_with(|| b.combination.total().cmp(&a.combination.total()))
                .then_with(|| b.combination.cmp(&a.combination))
        })
        .map(|r| r.combination)
        .expect("at least the empty combination is scored");
    let best_examples = order.select(best).expect("feasible");
    Ok(SearchOutcome {
        scores,
        best,
        best_examples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::Outcome;
    use Sentiment::*;

    fn ex(id: &str, label: Sentiment) -> LabeledExample {
        LabeledExample {
            sentence_id: id.into(),
            text: format!("Sentence {id} describing the patient at length."),
            label,
        }
    }

    #[test]
    fn zero_shot_carries_instruction_and_sentence_verbatim() {
        let t = PromptTemplate::default_for(RaterGroup::Physician);
        let p = t.render_zero_shot("Pt seen by XXX, {examples} remains calm").unwrap();
        assert!(p.contains(PHYSICIAN_INSTRUCTION));
        assert!(p.contains("Pt seen by XXX, {examples} remains calm"));
        assert!(p.contains(ANSWER_CONSTRAINT));
        assert!(!p.contains("Examples:"));

        let t = PromptTemplate::default_for(RaterGroup::NonPhysician);
        assert!(t.render_zero_shot("x").unwrap().contains(NON_PHYSICIAN_INSTRUCTION));
        assert!(matches!(t.render_zero_shot("  "), Err(PromptError::EmptySentence)));
    }

    #[test]
    fn icl_with_no_examples_keeps_scaffold() {
        let t = PromptTemplate::default_for(RaterGroup::Physician);
        let icl = t.render_icl(&[], &"t".into(), "Target sentence here.").unwrap();
        let zs = t.render_zero_shot("Target sentence here.").unwrap();
        assert!(icl.contains("Examples:"));
        assert_ne!(icl, zs);
    }

    #[test]
    fn icl_renders_examples_in_order() {
        let t = PromptTemplate::default_for(RaterGroup::Physician);
        let exs = [ex("a", Negative), ex("b", Positive)];
        let p = t.render_icl(&exs, &"t".into(), "Target.").unwrap();
        let ia = p.find(&exs[0].text).unwrap();
        let ib = p.find(&exs[1].text).unwrap();
        let it = p.rfind("Target.").unwrap();
        assert!(ia < ib && ib < it);
        assert!(p.contains("Sentiment: negative") && p.contains("Sentiment: positive"));
    }

    #[test]
    fn icl_rejects_leakage() {
        let t = PromptTemplate::default_for(RaterGroup::Physician);
        let e = ex("a", Negative);
        let err = t.render_icl(&[e.clone()], &"a".into(), &e.text).unwrap_err();
        assert!(matches!(err, PromptError::Leakage(id) if id.as_str() == "a"));
    }

    #[test]
    fn template_validation() {
        let mut spec = TemplateSpec::default_for(RaterGroup::Physician);
        spec.icl = "{instruction} {sentence}".into();
        assert!(matches!(PromptTemplate::new(spec), Err(PromptError::Missing { name: "examples", .. })));

        let mut spec = TemplateSpec::default_for(RaterGroup::Physician);
        spec.zero_shot = "{examples} {sentence}".into();
        assert!(matches!(PromptTemplate::new(spec), Err(PromptError::Misplaced { .. })));

        let mut spec = TemplateSpec::default_for(RaterGroup::Physician);
        spec.zero_shot = "{{json}} {sentence} {bogus}".into();
        assert!(matches!(PromptTemplate::new(spec), Err(PromptError::UnknownPlaceholder { .. })));

        let mut spec = TemplateSpec::default_for(RaterGroup::Physician);
        spec.zero_shot = "{{\"label\": ?}} {sentence}".into();
        let t = PromptTemplate::new(spec).unwrap();
        assert_eq!(t.render_zero_shot("s").unwrap(), "{\"label\": ?} s");
    }

    #[test]
    fn combination_counts() {
        let pool = [ex("a", Negative), ex("b", Neutral), ex("c", Positive)];
        assert_eq!(enumerate_combinations(&pool).len(), 8);
        assert_eq!(enumerate_combinations(&[]), [IclCombination::default()]);
        let pool232 = [
            ex("n1", Negative),
            ex("n2", Negative),
            ex("u1", Neutral),
            ex("u2", Neutral),
            ex("u3", Neutral),
            ex("p1", Positive),
            ex("p2", Positive),
        ];
        let all = enumerate_combinations(&pool232);
        assert_eq!(all.len(), 36);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn select_takes_prefix_per_label() {
        let pool = [ex("s9", Negative), ex("s3", Negative), ex("s7", Negative), ex("s1", Positive)];
        let got = select_examples(&pool, IclCombination::new(2, 0, 0), ExampleOrdering::Identity).unwrap();
        let ids: Vec<_> = got.iter().map(|e| e.sentence_id.as_str()).collect();
        assert_eq!(ids, ["s3", "s7"]);
        assert!(select_examples(&pool, IclCombination::default(), ExampleOrdering::Identity).unwrap().is_empty());
        assert!(select_examples(&pool, IclCombination::new(0, 1, 0), ExampleOrdering::Identity).is_err());

        let a = select_examples(&pool, IclCombination::new(3, 0, 1), ExampleOrdering::Seeded(5)).unwrap();
        let b = select_examples(&pool, IclCombination::new(3, 0, 1), ExampleOrdering::Seeded(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.last().unwrap().label, Positive);
    }

    /// Echoes gold for every validation sentence found in the prompt.
    struct Echo(Vec<LabeledExample>);

    impl BatchClassifier for Echo {
        fn classify(&self, ctx: &BatchContext, jobs: &[PromptJob]) -> Vec<PredictionRecord> {
            jobs.iter()
                .map(|j| {
                    let gold = self.0.iter().find(|v| v.sentence_id == j.sentence_id).unwrap().label;
                    PredictionRecord {
                        sentence_id: j.sentence_id.clone(),
                        pov: ctx.pov,
                        dataset: ctx.dataset.clone(),
                        prompt_mode: ctx.mode,
                        source: "echo".into(),
                        raw_output: gold.to_string(),
                        outcome: Outcome::Parsed { label: gold },
                        latency_ms: 0,
                        attempt_count: 1,
                    }
                })
                .collect()
        }
    }

    #[test]
    fn echo_search_picks_empty_combination() {
        let pool = [ex("n1", Negative), ex("u1", Neutral), ex("p1", Positive)];
        let val = vec![ex("v1", Negative), ex("v2", Neutral)];
        let t = PromptTemplate::default_for(RaterGroup::Physician);
        let settings = SearchSettings {
            ordering: ExampleOrdering::Identity,
            averaging: Averaging::PresentInGold,
        };
        let out = search(&pool, &val, &Echo(val.clone()), &t, "baseline", settings).unwrap();
        assert_eq!(out.scores.len(), 8);
        assert_eq!(out.best, IclCombination::default());
        assert!(out.scores.iter().all(|r| r.report.macro_f1 == Rational::from_integer(1)));

        let leaky = vec![ex("n1", Negative)];
        assert!(matches!(search(&pool, &leaky, &Echo(leaky.clone()), &t, "b", settings), Err(SearchError::Leakage(_))));
    }
}
