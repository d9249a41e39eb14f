//! Point-of-view sentiment analysis for psychiatric clinical notes.
//!
//! Core computations are generic over [`Scalar`], so the same code runs in
//! `f64` or in exact [`Rational`] arithmetic. Aliases below name the common
//! instantiations.

pub mod agreement;
pub mod annotation;
pub mod corpus;
pub mod datasets;
pub mod ids;
pub mod metrics;
pub mod prediction;
pub mod prompting;
pub mod scalar;

pub use annotation::{AnnotationRecord, Pov, RaterGroup, Sentiment, TiePolicy, UnifiedLabel};
pub use corpus::{Lexicon, Sentence};
pub use datasets::{Split, StratifiedDataset, TestItem};
pub use ids::{RaterId, SentenceId, TermId};
pub use metrics::{Averaging, ConfusionMatrix, MetricReport};
pub use prediction::{Outcome, PredictionRecord, PromptMode};
pub use prompting::{BatchClassifier, IclCombination, LabeledExample, PromptTemplate};
pub use scalar::{Rational, Scalar};

pub type KappaF64 = agreement::KappaResult<f64>;
pub type KappaF32 = agreement::KappaResult<f32>;
pub type ExactKappaComponents = agreement::KappaComponents<Rational>;
pub type MetricReportF64 = MetricReport<f64>;
pub type MetricReportF32 = MetricReport<f32>;
pub type ExactMetricReport = MetricReport<Rational>;
pub type WordAgreementF64 = agreement::WordAgreement<f64>;
pub type ExactWordAgreement = agreement::WordAgreement<Rational>;
