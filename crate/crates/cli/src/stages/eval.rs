use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use clap::ValueEnum;
use povsent::datasets::{load_test_set, NO_AGREEMENT};
use povsent::metrics::{confusion_from_records, macro_metrics, ConfusionMatrix, UnresolvedPolicy};
use povsent::prompting::{BatchClassifier, BatchContext, PromptJob, PromptTemplate};
use povsent::{Averaging, Pov, PredictionRecord, PromptMode, Rational, SentenceId, Sentiment};
use povsent_modelio::{import_predictions, ChatBackend};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::search::{search_path, SearchRecord};
use super::{load_corpus, load_dataset, load_prompt_split, texts, Reported};
use crate::backend::{runner, MockGold};
use crate::config::RunConfig;
use crate::error::{config_err, validation_err, CliError, CliResult};
use crate::manifest::Stage;

pub const TEST_TARGET: &str = "test";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    ZeroShot,
    BestIcl,
    Import,
}

pub struct EvalArgs<'a> {
    pub target: &'a str,
    pub pov: Pov,
    pub mode: EvalMode,
    pub mock: bool,
    pub prompt_from: Option<&'a str>,
    pub predictions: Option<&'a Path>,
    pub tag: Option<&'a str>,
}

#[derive(Serialize)]
struct ClassOut {
    label: Sentiment,
    precision: Reported,
    recall: Reported,
    f1: Reported,
    support: u64,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct PlotRow {
    pub dataset: String,
    pub pov: Pov,
    pub model: String,
    pub prompt: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Serialize)]
struct EvalReport {
    target: String,
    pov: Pov,
    mode: EvalMode,
    prompt: String,
    source: String,
    sentences: usize,
    averaging: Averaging,
    macro_f1: Reported,
    macro_precision: Reported,
    macro_recall: Reported,
    per_class: Vec<ClassOut>,
    too_neutral_rate: Reported,
    polarized_rate: Reported,
    /// Rows gold, columns predicted, in negative/neutral/positive order.
    confusion: [[u64; 3]; 3],
    unresolved_by_gold: [u64; 3],
    parse_failures: Vec<SentenceId>,
    request_failures: Vec<SentenceId>,
}

struct Target {
    id: SentenceId,
    text: String,
    gold: Sentiment,
}

#[derive(Serialize)]
struct PromptLine<'a> {
    sentence_id: &'a SentenceId,
    prompt: &'a str,
}

pub fn run(cfg: &RunConfig, a: &EvalArgs) -> CliResult<()> {
    let mut args = BTreeMap::from([
        ("target".to_string(), a.target.to_string()),
        ("pov".to_string(), a.pov.to_string()),
        ("mode".to_string(), format!("{:?}", a.mode)),
        ("mock".to_string(), a.mock.to_string()),
    ]);
    if let Some(p) = a.prompt_from {
        args.insert("prompt_from".into(), p.into());
    }
    if let Some(p) = a.predictions {
        args.insert("predictions".into(), p.display().to_string());
    }
    if let Some(t) = a.tag {
        args.insert("tag".into(), t.into());
    }
    let mut stage = Stage::begin(cfg, "eval", args);
    let (lexicon, sentences) = load_corpus(&mut stage, cfg)?;
    let text = texts(&sentences);

    let targets: Vec<Target> = if a.target == TEST_TARGET {
        let path = cfg
            .paths
            .test_set
            .as_ref()
            .ok_or_else(|| CliError::Config("paths.test_set is not configured".into()))?;
        stage.note_input(path)?;
        load_test_set(path, &lexicon, &sentences)
            .map_err(|e| CliError::Validation(format!("paths.test_set: {e}")))?
            .into_iter()
            .map(|t| Target {
                gold: t.label(a.pov),
                id: t.sentence.sentence_id,
                text: t.sentence.text,
            })
            .collect()
    } else {
        let d = load_dataset(&mut stage, a.target)?;
        let ids = if a.target == NO_AGREEMENT {
            d.sentence_ids()
        } else {
            load_prompt_split(&mut stage, a.target)?.val_ids
        };
        ids.into_iter()
            .map(|id| {
                let item = d.item(&id).ok_or_else(|| validation_err(format!("{id} missing from {}", d.name)))?;
                let t = text.get(&id).ok_or_else(|| validation_err(format!("{id} has no sentence text")))?;
                Ok(Target {
                    gold: item.label(a.pov),
                    text: t.clone(),
                    id,
                })
            })
            .collect::<CliResult<_>>()?
    };
    if targets.is_empty() {
        return Err(validation_err(format!("nothing to evaluate in {}", a.target)));
    }
    let gold: BTreeMap<SentenceId, Sentiment> = targets.iter().map(|t| (t.id.clone(), t.gold)).collect();

    let ctx = |mode| BatchContext {
        pov: a.pov,
        dataset: a.target.to_string(),
        mode,
    };
    let mut prompts: Vec<PromptJob> = Vec::new();
    let (records, prompt_label, stem) = match a.mode {
        EvalMode::Import => {
            let path = a
                .predictions
                .ok_or_else(|| CliError::Config("--mode import needs --predictions".into()))?;
            let bytes = stage.read(path)?;
            let tag = a
                .tag
                .map(str::to_owned)
                .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "external".into());
            let expected: BTreeSet<SentenceId> = gold.keys().cloned().collect();
            let recs = import_predictions(bytes.as_slice(), &tag, &ctx(PromptMode::Import), &expected).map_err(validation_err)?;
            (recs, "import".to_string(), format!("{}.{}.import-{tag}", a.target, a.pov))
        }
        EvalMode::ZeroShot | EvalMode::BestIcl => {
            let mut mock_gold = MockGold::default();
            for t in &targets {
                mock_gold.add(&t.text, t.gold);
            }
            let (mode, label, stem) = if a.mode == EvalMode::ZeroShot {
                let template = cfg.template(a.pov)?;
                for t in &targets {
                    prompts.push(PromptJob {
                        sentence_id: t.id.clone(),
                        prompt: template.render_zero_shot(&t.text).map_err(validation_err)?,
                    });
                }
                (PromptMode::ZeroShot, "zero-shot".to_string(), format!("{}.{}.zero-shot", a.target, a.pov))
            } else {
                let from = match (a.prompt_from, a.target) {
                    (Some(f), _) => f,
                    (None, TEST_TARGET) => return Err(CliError::Config("best-icl on the test set needs --prompt-from <dataset>".into())),
                    (None, t) => t,
                };
                if from == NO_AGREEMENT {
                    return Err(CliError::Validation("the no-agreement dataset has no searched prompt".into()));
                }
                let rec: SearchRecord = stage.read_json(&search_path(from, a.pov))?;
                let template = PromptTemplate::new(rec.template.clone()).map_err(config_err)?;
                for ex in &rec.best_examples {
                    mock_gold.add(&ex.text, ex.label);
                }
                for t in &targets {
                    prompts.push(PromptJob {
                        sentence_id: t.id.clone(),
                        prompt: template.render_icl(&rec.best_examples, &t.id, &t.text).map_err(validation_err)?,
                    });
                }
                (PromptMode::Icl, format!("icl:{from}"), format!("{}.{}.best-icl-{from}", a.target, a.pov))
            };
            let classifier = runner(cfg, a.mock, mock_gold)?;
            let source = classifier.backend().source();
            info!(target = a.target, pov = %a.pov, %source, n = prompts.len(), "classifying");
            (BatchClassifier::classify(&classifier, &ctx(mode), &prompts), label, stem)
        }
    };

    for r in &records {
        stage.record_latency(format!("{stem}:{}", r.sentence_id), r.latency_ms);
    }
    let request_failures: Vec<SentenceId> = records
        .iter()
        .filter(|r| r.outcome.is_request_failure())
        .map(|r| r.sentence_id.clone())
        .collect();
    let parse_failures: Vec<SentenceId> = records
        .iter()
        .filter(|r| r.outcome.label().is_none() && !r.outcome.is_request_failure())
        .map(|r| r.sentence_id.clone())
        .collect();
    let stripped: Vec<PredictionRecord> = records.iter().map(PredictionRecord::without_latency).collect();
    let mut lines = Vec::new();
    for r in &stripped {
        lines.extend(serde_json::to_vec(r).map_err(config_err)?);
        lines.push(b'\n');
    }
    stage.write(&format!("eval/{stem}.predictions.jsonl"), &lines)?;
    if !prompts.is_empty() {
        let mut lines = Vec::new();
        for p in &prompts {
            let line = PromptLine {
                sentence_id: &p.sentence_id,
                prompt: &p.prompt,
            };
            lines.extend(serde_json::to_vec(&line).map_err(config_err)?);
            lines.push(b'\n');
        }
        stage.write(&format!("eval/{stem}.prompts.jsonl"), &lines)?;
    }

    let matrix = confusion_from_records(&gold, &records, UnresolvedPolicy::CountAsMiss).map_err(validation_err)?;
    let source = records.first().map(|r| r.source.clone()).unwrap_or_default();
    let report = build_report(a, &matrix, cfg.eval.averaging, &prompt_label, &source, gold.len(), parse_failures.clone(), request_failures.clone())?;
    let plot: Vec<PlotRow> = [
        ("f1", report.macro_f1.value),
        ("precision", report.macro_precision.value),
        ("recall", report.macro_recall.value),
    ]
    .into_iter()
    .map(|(metric, value)| PlotRow {
        dataset: a.target.to_string(),
        pov: a.pov,
        model: source.clone(),
        prompt: prompt_label.clone(),
        metric: metric.into(),
        value,
    })
    .collect();
    info!(stem, f1 = report.macro_f1.display, "evaluated");
    stage.write_json(&format!("eval/{stem}.json"), &report)?;
    stage.write_csv(&format!("eval/{stem}.plot.csv"), &plot)?;
    let manifest_name = format!("eval.{stem}");

    if !request_failures.is_empty() {
        stage.finish(&manifest_name, "failed: endpoint")?;
        return Err(CliError::Endpoint(format!("{} requests failed: {:?}", request_failures.len(), request_failures)));
    }
    if parse_failures.len() > cfg.eval.max_unresolved {
        warn!(count = parse_failures.len(), "unresolved outputs exceed tolerance");
        stage.finish(&manifest_name, "failed: unresolved outputs")?;
        return Err(CliError::Validation(format!(
            "{} unparseable outputs exceed eval.max_unresolved = {}: {:?}",
            parse_failures.len(),
            cfg.eval.max_unresolved,
            parse_failures
        )));
    }
    stage.finish(&manifest_name, "ok")?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    a: &EvalArgs,
    m: &ConfusionMatrix,
    averaging: Averaging,
    prompt: &str,
    source: &str,
    sentences: usize,
    parse_failures: Vec<SentenceId>,
    request_failures: Vec<SentenceId>,
) -> CliResult<EvalReport> {
    let r = macro_metrics::<Rational>(m, averaging).map_err(validation_err)?;
    Ok(EvalReport {
        target: a.target.into(),
        pov: a.pov,
        mode: a.mode,
        prompt: prompt.into(),
        source: source.into(),
        sentences,
        averaging,
        macro_f1: Reported::exact(r.macro_f1),
        macro_precision: Reported::exact(r.macro_precision),
        macro_recall: Reported::exact(r.macro_recall),
        per_class: Sentiment::ALL
            .iter()
            .map(|s| {
                let c = r.class(*s);
                ClassOut {
                    label: *s,
                    precision: Reported::exact(c.precision),
                    recall: Reported::exact(c.recall),
                    f1: Reported::exact(c.f1),
                    support: c.support,
                }
            })
            .collect(),
        too_neutral_rate: Reported::exact(r.too_neutral_rate),
        polarized_rate: Reported::exact(r.polarized_rate),
        confusion: m.counts,
        unresolved_by_gold: m.unresolved,
        parse_failures,
        request_failures,
    })
}
