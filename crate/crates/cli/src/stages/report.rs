use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use povsent::Pov;
use serde::Serialize;

use super::eval::PlotRow;
use super::search::SearchRecord;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::Stage;

#[derive(Serialize)]
struct SummaryRow {
    dataset: String,
    pov: Pov,
    model: String,
    prompt: String,
    f1: String,
    precision: String,
    recall: String,
}

#[derive(Serialize)]
struct CompositionRow {
    dataset: String,
    pov: Pov,
    model: String,
    negative: usize,
    neutral: usize,
    positive: usize,
    validation_macro_f1: f64,
}

fn sorted_files(dir: &Path, suffix: &str) -> CliResult<Vec<std::path::PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    out.sort();
    Ok(out)
}

/// Collects per-evaluation plot rows and search results into report tables.
pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let mut stage = Stage::begin(cfg, "report", BTreeMap::new());
    let root = stage.root().to_path_buf();

    let mut plot: Vec<PlotRow> = Vec::new();
    for path in sorted_files(&root.join("eval"), ".plot.csv")? {
        let bytes = stage.read(&path)?;
        let mut rdr = csv::Reader::from_reader(bytes.as_slice());
        for row in rdr.deserialize() {
            plot.push(row.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
        }
    }
    plot.sort_by(|a, b| {
        (&a.dataset, a.pov, &a.model, &a.prompt, &a.metric).cmp(&(&b.dataset, b.pov, &b.model, &b.prompt, &b.metric))
    });
    let mut summary: BTreeMap<(String, Pov, String, String), BTreeMap<String, f64>> = BTreeMap::new();
    for r in &plot {
        summary
            .entry((r.dataset.clone(), r.pov, r.model.clone(), r.prompt.clone()))
            .or_default()
            .insert(r.metric.clone(), r.value);
    }
    let fmt = |m: &BTreeMap<String, f64>, k: &str| m.get(k).map(|v| format!("{v:.2}")).unwrap_or_default();
    let summary_rows: Vec<SummaryRow> = summary
        .iter()
        .map(|((dataset, pov, model, prompt), m)| SummaryRow {
            dataset: dataset.clone(),
            pov: *pov,
            model: model.clone(),
            prompt: prompt.clone(),
            f1: fmt(m, "f1"),
            precision: fmt(m, "precision"),
            recall: fmt(m, "recall"),
        })
        .collect();

    let mut composition = Vec::new();
    for path in sorted_files(&root.join("search"), ".json")? {
        let bytes = stage.read(&path)?;
        let rec: SearchRecord = serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        composition.push(CompositionRow {
            dataset: rec.dataset,
            pov: rec.pov,
            model: rec.source,
            negative: rec.best.negative,
            neutral: rec.best.neutral,
            positive: rec.best.positive,
            validation_macro_f1: rec.best_macro_f1,
        });
    }

    stage.write_csv("report/plot_data.csv", &plot)?;
    stage.write_csv("report/summary.csv", &summary_rows)?;
    stage.write_csv("report/icl_composition.csv", &composition)?;
    stage.finish("report", "ok")?;
    Ok(())
}
