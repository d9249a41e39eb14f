use std::collections::{BTreeMap, BTreeSet};

use povsent::agreement::{
    agreement_band, cohen_components, cohen_kappa, fleiss_components, fleiss_kappa, label_distribution,
    percent_agreement_by_label, term_subset_mean, word_level_agreement, CountMatrix, KappaComponents, KappaResult,
};
use povsent::annotation::{unify, validate_annotations};
use povsent::datasets::{no_agreement, stratify};
use povsent::scalar::percent_half_up;
use povsent::{Rational, RaterGroup, Sentiment, TermId, UnifiedLabel};
use serde::Serialize;
use tracing::info;

use super::{load_corpus, load_records, Reported};
use crate::config::RunConfig;
use crate::error::{validation_err, CliError, CliResult};
use crate::manifest::Stage;

#[derive(Serialize)]
struct KappaOut {
    raters: String,
    kappa: Reported,
    z: Reported,
    p: f64,
    observed: Reported,
    expected: Reported,
    band: &'static str,
}

fn kappa_out(raters: &str, exact: KappaComponents<Rational>, f: KappaResult<f64>) -> KappaOut {
    KappaOut {
        raters: raters.into(),
        kappa: Reported::exact(exact.kappa),
        z: Reported::float(f.z),
        p: f.p,
        observed: Reported::exact(exact.observed),
        expected: Reported::exact(exact.expected),
        band: agreement_band(f.kappa),
    }
}

#[derive(Serialize)]
struct LabelCell {
    group: RaterGroup,
    label: Sentiment,
    mean_agreement: Option<Reported>,
    percent: Option<i128>,
}

#[derive(Serialize)]
struct CountRow {
    dataset: String,
    pov: RaterGroup,
    label: Sentiment,
    count: u32,
}

#[derive(Serialize)]
struct WordRow {
    term_id: String,
    sentences: usize,
    physician: Option<f64>,
    physician_exact: Option<String>,
    non_physician: Option<f64>,
    non_physician_exact: Option<String>,
    combined: Option<f64>,
}

#[derive(Serialize)]
struct TieRow {
    sentence_id: String,
    group: RaterGroup,
    votes: [u32; 3],
}

#[derive(Serialize)]
struct AgreementReport {
    sentences: usize,
    records: usize,
    fleiss: Vec<KappaOut>,
    cohen_unified: KappaOut,
    label_agreement: Vec<LabelCell>,
    neutral_share_baseline: BTreeMap<RaterGroup, Reported>,
    subset_terms: Vec<String>,
    subset_mean_agreement: BTreeMap<RaterGroup, Option<Reported>>,
    tie_breaks: Vec<TieRow>,
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let mut stage = Stage::begin(cfg, "agreement", BTreeMap::new());
    let (lexicon, sentences) = load_corpus(&mut stage, cfg)?;
    let records = load_records(&mut stage, cfg)?;

    let validation = validate_annotations(&records, cfg.agreement.raters_per_group);
    stage.write_json("agreement/validation.json", &validation)?;
    if !validation.passed() {
        stage.finish("agreement", "failed: annotation validation")?;
        return Err(CliError::Validation(format!(
            "annotation validation failed: {} missing, {} duplicate, {} multi-group raters, group sizes {:?}",
            validation.missing.len(),
            validation.duplicates.len(),
            validation.multi_group_raters.len(),
            validation.group_size_deviations
        )));
    }
    let known: BTreeSet<_> = sentences.iter().map(|s| &s.sentence_id).collect();
    if let Some(r) = records.iter().find(|r| !known.contains(&r.sentence_id)) {
        return Err(validation_err(format!("annotated sentence {} is not in paths.sentences", r.sentence_id)));
    }

    let mut fleiss = Vec::new();
    for (name, groups) in [
        ("all", &RaterGroup::ALL[..]),
        ("physician", &[RaterGroup::Physician][..]),
        ("non-physician", &[RaterGroup::NonPhysician][..]),
    ] {
        let m = CountMatrix::from_records(&records, groups).map_err(validation_err)?;
        let exact = fleiss_components::<Rational>(&m).map_err(validation_err)?;
        let f = fleiss_kappa::<f64>(&m).map_err(validation_err)?;
        fleiss.push(kappa_out(name, exact, f));
    }

    let phys = unify(&records, RaterGroup::Physician, cfg.agreement.tie_policy).map_err(validation_err)?;
    let nonphys = unify(&records, RaterGroup::NonPhysician, cfg.agreement.tie_policy).map_err(validation_err)?;
    let a: Vec<Sentiment> = phys.iter().map(|u| u.label).collect();
    let b: Vec<Sentiment> = nonphys.iter().map(|u| u.label).collect();
    let cohen = kappa_out(
        "unified physician vs non-physician",
        cohen_components::<Rational>(&a, &b).map_err(validation_err)?,
        cohen_kappa::<f64>(&a, &b).map_err(validation_err)?,
    );

    let unified: Vec<UnifiedLabel> = phys.iter().chain(&nonphys).cloned().collect();
    let table = percent_agreement_by_label::<Rational>(&unified);
    let mut label_agreement = Vec::new();
    for group in RaterGroup::ALL {
        for label in Sentiment::ALL {
            let v = table.get(group, label);
            label_agreement.push(LabelCell {
                group,
                label,
                mean_agreement: v.map(Reported::exact),
                percent: v.map(percent_half_up),
            });
        }
    }

    let mut sets = stratify(&phys, &nonphys, &cfg.datasets.thresholds).map_err(validation_err)?;
    sets.insert(0, no_agreement(&phys, &nonphys).map_err(validation_err)?);
    let mut counts = Vec::new();
    for d in &sets {
        let ids = d.id_set();
        for pov in RaterGroup::ALL {
            let c = label_distribution(&unified, pov, Some(&ids));
            for label in Sentiment::ALL {
                counts.push(CountRow {
                    dataset: d.name.clone(),
                    pov,
                    label,
                    count: c[label.index()],
                });
            }
        }
    }
    let neutral_share_baseline = RaterGroup::ALL
        .into_iter()
        .map(|g| {
            let c = label_distribution(&unified, g, None);
            let total: u32 = c.iter().sum();
            (g, Reported::exact(Rational::new(c[1] as i128, total.max(1) as i128)))
        })
        .collect();

    let words = word_level_agreement::<Rational>(&unified, &sentences, &lexicon);
    let word_rows: Vec<WordRow> = words
        .iter()
        .map(|w| {
            let g = |grp| w.by_group.get(&grp).copied();
            WordRow {
                term_id: w.term_id.to_string(),
                sentences: w.sentences,
                physician: g(RaterGroup::Physician).map(|v| Reported::exact(v).value),
                physician_exact: g(RaterGroup::Physician).map(super::exact_str),
                non_physician: g(RaterGroup::NonPhysician).map(|v| Reported::exact(v).value),
                non_physician_exact: g(RaterGroup::NonPhysician).map(super::exact_str),
                combined: w.combined().map(|v| Reported::exact(v).value),
            }
        })
        .collect();
    let subset: Vec<TermId> = cfg.agreement.subset_terms.iter().map(|t| TermId::new(t.as_str())).collect();
    if let Some(t) = subset.iter().find(|t| lexicon.get(t).is_none()) {
        return Err(CliError::Config(format!("agreement.subset_terms: {t} is not a lexicon term")));
    }
    let subset_mean_agreement = RaterGroup::ALL
        .into_iter()
        .map(|g| (g, term_subset_mean(&words, &subset, g).map(Reported::exact)))
        .collect();

    let tie_breaks = unified
        .iter()
        .filter(|u| u.tie_broken)
        .map(|u| TieRow {
            sentence_id: u.sentence_id.to_string(),
            group: u.group,
            votes: u.vote_counts.0,
        })
        .collect();

    let report = AgreementReport {
        sentences: validation.sentences,
        records: records.len(),
        fleiss,
        cohen_unified: cohen,
        label_agreement,
        neutral_share_baseline,
        subset_terms: cfg.agreement.subset_terms.clone(),
        subset_mean_agreement,
        tie_breaks,
    };
    for k in report.fleiss.iter().chain([&report.cohen_unified]) {
        info!(raters = %k.raters, kappa = k.kappa.display, band = k.band, "kappa");
    }
    stage.write_json("agreement/report.json", &report)?;
    stage.write_json("agreement/unified.json", &unified)?;
    stage.write_csv("agreement/label_counts.csv", &counts)?;
    stage.write_csv("agreement/word_agreement.csv", &word_rows)?;
    stage.finish("agreement", "ok")?;
    Ok(())
}
