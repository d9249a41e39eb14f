use std::collections::BTreeMap;

use povsent::datasets::NO_AGREEMENT;
use povsent::prompting::{search, ExampleOrdering, IclCombination, LabeledExample, ScoreRow, SearchError, SearchSettings, TemplateSpec};
use povsent::{Averaging, Pov, SentenceId};
use povsent_modelio::ChatBackend;
use serde::{Deserialize, Serialize};
use tracing::info;

use super::{exact_str, labeled, load_corpus, load_dataset, load_prompt_split, texts, Reported};
use crate::backend::{runner, MockGold};
use crate::config::RunConfig;
use crate::error::{validation_err, CliError, CliResult};
use crate::manifest::Stage;

/// Persisted result of a search, read back by `eval --mode best-icl`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SearchRecord {
    pub dataset: String,
    pub pov: Pov,
    pub source: String,
    pub ordering: ExampleOrdering,
    pub averaging: Averaging,
    pub pool_ids: Vec<SentenceId>,
    pub validation_ids: Vec<SentenceId>,
    pub combinations: usize,
    pub best: IclCombination,
    pub best_examples: Vec<LabeledExample>,
    pub best_macro_f1: f64,
    pub best_macro_f1_exact: String,
    pub best_macro_precision: f64,
    pub best_macro_recall: f64,
    /// The winning prompt with `{sentence}` left open.
    pub prompt: String,
    pub template: TemplateSpec,
}

#[derive(Serialize)]
struct ScoreCsv {
    negative: usize,
    neutral: usize,
    positive: usize,
    total: usize,
    macro_f1: f64,
    macro_f1_exact: String,
    macro_precision: f64,
    macro_recall: f64,
    parse_failures: usize,
}

fn score_rows(rows: &[ScoreRow]) -> Vec<ScoreCsv> {
    rows.iter()
        .map(|r| ScoreCsv {
            negative: r.combination.negative,
            neutral: r.combination.neutral,
            positive: r.combination.positive,
            total: r.combination.total(),
            macro_f1: Reported::exact(r.report.macro_f1).value,
            macro_f1_exact: exact_str(r.report.macro_f1),
            macro_precision: Reported::exact(r.report.macro_precision).value,
            macro_recall: Reported::exact(r.report.macro_recall).value,
            parse_failures: r.parse_failures,
        })
        .collect()
}

pub fn search_path(dataset: &str, pov: Pov) -> String {
    format!("search/{dataset}.{pov}.json")
}

pub fn run(cfg: &RunConfig, dataset: &str, pov: Pov, mock: bool) -> CliResult<()> {
    let args = BTreeMap::from([
        ("dataset".to_string(), dataset.to_string()),
        ("pov".to_string(), pov.to_string()),
        ("mock".to_string(), mock.to_string()),
    ]);
    let name = format!("search.{dataset}.{pov}");
    let mut stage = Stage::begin(cfg, "search", args);
    if dataset == NO_AGREEMENT {
        return Err(CliError::Validation(
            "the no-agreement dataset is evaluated zero-shot only; it has no example pool to search".into(),
        ));
    }
    let (_, sentences) = load_corpus(&mut stage, cfg)?;
    let text = texts(&sentences);
    let d = load_dataset(&mut stage, dataset)?;
    let sp = load_prompt_split(&mut stage, dataset)?;
    let pool = labeled(&d, &sp.train_ids, pov, &text)?;
    let validation = labeled(&d, &sp.val_ids, pov, &text)?;
    let template = cfg.template(pov)?;

    let mut gold = MockGold::default();
    for ex in pool.iter().chain(&validation) {
        gold.add(&ex.text, ex.label);
    }
    let classifier = runner(cfg, mock, gold)?;
    let settings = SearchSettings {
        ordering: cfg.prompting.example_ordering,
        averaging: cfg.eval.averaging,
    };
    let scores_path = format!("search/{dataset}.{pov}.scores.csv");
    match search(&pool, &validation, &classifier, &template, dataset, settings) {
        Ok(out) => {
            stage.write_csv(&scores_path, &score_rows(&out.scores))?;
            let best = out.best_row();
            info!(dataset, %pov, best = ?out.best, f1 = exact_str(best.report.macro_f1), "search finished");
            let record = SearchRecord {
                dataset: dataset.into(),
                pov,
                source: classifier.backend().source(),
                ordering: settings.ordering,
                averaging: settings.averaging,
                pool_ids: sp.train_ids.clone(),
                validation_ids: sp.val_ids.clone(),
                combinations: out.scores.len(),
                best: out.best,
                best_examples: out.best_examples.clone(),
                best_macro_f1: Reported::exact(best.report.macro_f1).value,
                best_macro_f1_exact: exact_str(best.report.macro_f1),
                best_macro_precision: Reported::exact(best.report.macro_precision).value,
                best_macro_recall: Reported::exact(best.report.macro_recall).value,
                prompt: template.render_icl_skeleton(&out.best_examples),
                template: template.spec().clone(),
            };
            stage.write_json(&search_path(dataset, pov), &record)?;
            stage.finish(&name, "ok")?;
            Ok(())
        }
        Err(SearchError::Model {
            combination,
            failures,
            first,
            partial,
        }) => {
            stage.write_csv(&scores_path, &score_rows(&partial))?;
            let msg = format!("endpoint failed at combination {combination:?} ({failures} requests, first: {first}); partial scores kept");
            stage.finish(&name, &format!("failed: {msg}"))?;
            Err(CliError::Endpoint(msg))
        }
        Err(e) => Err(validation_err(e)),
    }
}
