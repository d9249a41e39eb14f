use std::collections::BTreeMap;

use povsent::datasets::{no_agreement, split, split_stratified, stratify, StratifiedDataset};
use povsent::{RaterGroup, UnifiedLabel};
use tracing::warn;

use super::{classification_split_path, dataset_path, prompt_split_path};
use crate::config::RunConfig;
use crate::error::{validation_err, CliResult};
use crate::manifest::Stage;

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let mut stage = Stage::begin(cfg, "stratify-split", BTreeMap::new());
    let unified: Vec<UnifiedLabel> = stage.read_json("agreement/unified.json")?;
    let (phys, nonphys): (Vec<UnifiedLabel>, Vec<UnifiedLabel>) =
        unified.into_iter().partition(|u| u.group == RaterGroup::Physician);

    let mut sets = stratify(&phys, &nonphys, &cfg.datasets.thresholds).map_err(validation_err)?;
    let na = no_agreement(&phys, &nonphys).map_err(validation_err)?;
    let mut summary = Vec::new();
    for d in sets.iter().chain([&na]) {
        if d.is_empty() {
            warn!(dataset = %d.name, "dataset is empty");
        }
        stage.write_json(&dataset_path(&d.name), d)?;
        summary.push((d.name.clone(), d.len()));
    }
    // the no-agreement set is scored zero-shot on all its sentences, so it gets no split
    for d in sets.drain(..) {
        write_splits(&mut stage, cfg, &d)?;
    }
    stage.write_json("datasets/index.json", &summary)?;
    stage.finish("stratify-split", "ok")?;
    Ok(())
}

fn write_splits(stage: &mut Stage, cfg: &RunConfig, d: &StratifiedDataset) -> CliResult<()> {
    let s = &cfg.splits;
    for (path, fraction) in [
        (classification_split_path(&d.name), s.classification_train_fraction),
        (prompt_split_path(&d.name), s.prompt_train_fraction),
    ] {
        let result = if s.stratified {
            split_stratified(d, RaterGroup::Physician, fraction, s.seed)
        } else {
            split(d, fraction, s.seed)
        };
        match result {
            Ok(sp) => stage.write_json(&path, &sp)?,
            Err(e) => warn!(dataset = %d.name, fraction, error = %e, "split skipped"),
        }
    }
    Ok(())
}
