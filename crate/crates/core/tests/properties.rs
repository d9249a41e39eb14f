use std::path::PathBuf;

use proptest::prelude::*;

use povsent::agreement::{cohen_components, fleiss_components, CountMatrix};
use povsent::annotation::{unify, VoteCounts};
use povsent::corpus::{load_lexicon, match_terms};
use povsent::datasets::{no_agreement, split, stratify, DatasetItem, StratifiedDataset};
use povsent::metrics::{confusion, macro_metrics};
use povsent::{AnnotationRecord, Averaging, Rational, RaterGroup, Sentiment, TiePolicy, UnifiedLabel};

fn label() -> impl Strategy<Value = Sentiment> {
    (0usize..3).prop_map(|i| Sentiment::from_index(i).unwrap())
}

/// Ten votes split across the three labels.
fn votes(n: u32) -> impl Strategy<Value = [u32; 3]> {
    (0..=n).prop_flat_map(move |a| (0..=n - a).prop_map(move |b| [a, b, n - a - b]))
}

fn records_for(id: &str, group: RaterGroup, v: [u32; 3]) -> Vec<AnnotationRecord> {
    let prefix = match group {
        RaterGroup::Physician => "P",
        RaterGroup::NonPhysician => "N",
    };
    let mut out = Vec::new();
    let mut k = 0;
    for s in Sentiment::ALL {
        for _ in 0..v[s.index()] {
            k += 1;
            out.push(AnnotationRecord {
                sentence_id: id.into(),
                rater_id: format!("{prefix}{k:02}").into(),
                group,
                label: s,
            });
        }
    }
    out
}

/// Unified labels for both groups, or None when a non-neutral tie occurs.
fn unified(rows: &[([u32; 3], [u32; 3])]) -> Option<(Vec<UnifiedLabel>, Vec<UnifiedLabel>)> {
    let mut recs = Vec::new();
    for (i, (p, n)) in rows.iter().enumerate() {
        let id = format!("s{i:03}");
        recs.extend(records_for(&id, RaterGroup::Physician, *p));
        recs.extend(records_for(&id, RaterGroup::NonPhysician, *n));
    }
    let p = unify(&recs, RaterGroup::Physician, TiePolicy::PreferNeutral).ok()?;
    let n = unify(&recs, RaterGroup::NonPhysician, TiePolicy::PreferNeutral).ok()?;
    Some((p, n))
}

fn dataset(labels: &[Sentiment]) -> StratifiedDataset {
    StratifiedDataset {
        name: "d".into(),
        threshold: None,
        items: labels
            .iter()
            .enumerate()
            .map(|(i, l)| DatasetItem {
                sentence_id: format!("s{i:03}").into(),
                physician: *l,
                non_physician: *l,
                physician_agreement: Rational::from_integer(1),
                non_physician_agreement: Rational::from_integer(1),
            })
            .collect(),
    }
}

proptest! {
    #[test]
    fn fleiss_is_row_permutation_invariant(rows in prop::collection::vec(votes(6), 2..12), rot in 0usize..12) {
        let m = CountMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap();
        let mut shuffled = rows.clone();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        let m2 = CountMatrix::new(shuffled.iter().map(|r| r.to_vec()).collect()).unwrap();
        match (fleiss_components::<Rational>(&m), fleiss_components::<Rational>(&m2)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.kappa, b.kappa);
                prop_assert!(a.kappa <= Rational::from_integer(1));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one ordering failed"),
        }
    }

    #[test]
    fn fleiss_is_category_permutation_invariant(rows in prop::collection::vec(votes(5), 2..10)) {
        let m = CountMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap();
        let m2 = CountMatrix::new(rows.iter().map(|r| vec![r[2], r[0], r[1]]).collect()).unwrap();
        let a = fleiss_components::<Rational>(&m).ok().map(|c| c.kappa);
        let b = fleiss_components::<Rational>(&m2).ok().map(|c| c.kappa);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cohen_is_symmetric(pairs in prop::collection::vec((label(), label()), 1..40)) {
        let a: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<_> = pairs.iter().map(|p| p.1).collect();
        let ab = cohen_components::<Rational>(&a, &b).ok().map(|c| (c.kappa, c.null_variance));
        let ba = cohen_components::<Rational>(&b, &a).ok().map(|c| (c.kappa, c.null_variance));
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn stratified_sets_nest(rows in prop::collection::vec((votes(10), votes(10)), 1..30)) {
        let Some((p, n)) = unified(&rows) else { return Ok(()) };
        let sets = stratify(&p, &n, &[0.9, 0.5, 0.7, 0.8]).unwrap();
        prop_assert_eq!(sets[0].len(), rows.len());
        for w in sets.windows(2) {
            prop_assert!(w[1].id_set().is_subset(&w[0].id_set()));
        }
        let na = no_agreement(&p, &n).unwrap();
        prop_assert!(na.id_set().is_subset(&sets[0].id_set()));
    }

    #[test]
    fn no_agreement_size_matches_observed_agreement(rows in prop::collection::vec((votes(10), votes(10)), 1..30)) {
        let Some((p, n)) = unified(&rows) else { return Ok(()) };
        let a: Vec<_> = p.iter().map(|u| u.label).collect();
        let b: Vec<_> = n.iter().map(|u| u.label).collect();
        let po = a.iter().zip(&b).filter(|(x, y)| x == y).count();
        let na = no_agreement(&p, &n).unwrap();
        prop_assert_eq!(na.len(), rows.len() - po);
        if let Ok(c) = cohen_components::<Rational>(&a, &b) {
            let expected = Rational::from_integer(rows.len() as i128) * (Rational::from_integer(1) - c.observed);
            prop_assert_eq!(Rational::from_integer(na.len() as i128), expected);
        }
    }

    #[test]
    fn unification_picks_a_mode(v in votes(10)) {
        let recs = records_for("s", RaterGroup::Physician, v);
        let vc = VoteCounts(v);
        match unify(&recs, RaterGroup::Physician, TiePolicy::PreferNeutral) {
            Ok(u) => {
                prop_assert_eq!(vc.get(u[0].label), vc.max());
                prop_assert_eq!(u[0].agreement, Rational::new(vc.max() as i128, 10));
            }
            Err(_) => prop_assert!(vc.modes().len() > 1 && !vc.modes().contains(&Sentiment::Neutral)),
        }
    }

    #[test]
    fn splits_ignore_labels(a in prop::collection::vec(label(), 4..40), relabel in 0usize..3, seed in any::<u64>(), f in 0.2f64..0.8) {
        let f = (f * 100.0).round() / 100.0;
        let b: Vec<_> = a.iter().map(|l| Sentiment::from_index((l.index() + relabel) % 3).unwrap()).collect();
        let (Ok(sa), Ok(sb)) = (split(&dataset(&a), f, seed), split(&dataset(&b), f, seed)) else { return Ok(()) };
        prop_assert_eq!(&sa.train_ids, &sb.train_ids);
        prop_assert_eq!(sa.train_ids.len() + sa.val_ids.len(), a.len());
        prop_assert!(sa.train_ids.iter().all(|id| !sa.val_ids.contains(id)));
        let again = split(&dataset(&a), f, seed).unwrap();
        prop_assert_eq!(sa, again);
    }

    #[test]
    fn macro_f1_bounded_and_perfect_is_one(pairs in prop::collection::vec((label(), label()), 1..30)) {
        let g: Vec<_> = pairs.iter().map(|p| p.0).collect();
        let p: Vec<_> = pairs.iter().map(|p| p.1).collect();
        let one = Rational::from_integer(1);
        let zero = Rational::from_integer(0);
        for avg in [Averaging::PresentInGold, Averaging::AllClasses] {
            let m = macro_metrics::<Rational>(&confusion(&g, &p).unwrap(), avg).unwrap();
            prop_assert!(m.macro_f1 >= zero && m.macro_f1 <= one);
        }
        let perfect = macro_metrics::<Rational>(&confusion(&g, &g).unwrap(), Averaging::PresentInGold).unwrap();
        prop_assert_eq!(perfect.macro_f1, one);
    }

    #[test]
    fn term_spans_are_valid(prefix in "[a-zA-Z ,.]{0,20}", suffix in "[a-zA-Z ,.é]{0,20}", upper in any::<bool>()) {
        let lexicon = load_lexicon(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/lexicon.csv")).unwrap();
        let term = if upper { "NON-COMPLIANT" } else { "agitated" };
        let text = format!("{prefix} {term} {suffix}");
        let ms = match_terms(&text, &lexicon);
        for m in &ms {
            prop_assert!(text.is_char_boundary(m.span.start) && text.is_char_boundary(m.span.end));
            prop_assert!(m.span.start < m.span.end);
        }
        for w in ms.windows(2) {
            prop_assert!(!w[0].span.overlaps(&w[1].span));
        }
        prop_assert!(ms.iter().any(|m| text[m.span.start..m.span.end].eq_ignore_ascii_case(term)));
    }
}
