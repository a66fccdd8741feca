mod common;

use std::collections::BTreeMap;

use common::*;
use cre_core::eval::{
    binarize_multiclass, build_tacred_plus, score_binary, score_items, ConfusionCounts, Polarity,
};
use cre_core::{CandidateInstance, EntityMention, MulticlassInstance, Prediction};
use proptest::prelude::*;

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() < 1e-9,
        (None, None) => true,
        _ => false,
    }
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// `(relation index, gold, predicted kind)` where kind 0 = same relation,
/// 1 = a different relation, 2 = no relation.
fn scored(spec: &[(usize, bool, u8)]) -> (Vec<CandidateInstance>, Vec<Prediction>) {
    let toks = tokens(2);
    let m = |i: usize| EntityMention::from_tokens(&toks, i, i, "PERSON".into(), "x").unwrap();
    let mut instances = Vec::new();
    let mut preds = Vec::new();
    for (n, &(rel, gold, kind)) in spec.iter().enumerate() {
        let inst = CandidateInstance::new(format!("s{n}"), m(0), m(1), format!("r{rel}"))
            .unwrap()
            .with_gold(gold);
        let predicted = match kind {
            0 => Some(inst.relation().to_string()),
            1 => Some(format!("r{}", rel + 1)),
            _ => None,
        };
        preds.push(Prediction {
            instance_id: inst.instance_id().into(),
            queried_relation: inst.relation().into(),
            predicted_relation: predicted,
            predictor_id: "t".into(),
            score: None,
        });
        instances.push(inst);
    }
    (instances, preds)
}

fn arb_multiclass(max: usize) -> impl Strategy<Value = Vec<MulticlassInstance>> {
    prop::collection::vec((0..TYPES.len(), 0..TYPES.len(), 0..6usize), 0..=max).prop_map(|v| {
        let toks = tokens(2);
        v.into_iter()
            .enumerate()
            .map(|(i, (s, o, label))| MulticlassInstance {
                id: format!("t{i}"),
                sentence_id: format!("t{i}"),
                subject: EntityMention::from_tokens(&toks, 0, 0, TYPES[s].into(), "t").unwrap(),
                object: EntityMention::from_tokens(&toks, 1, 1, TYPES[o].into(), "t").unwrap(),
                label: if label == 5 {
                    "no_relation".into()
                } else {
                    format!("r{label}")
                },
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn score_binary_matches_counting(spec in prop::collection::vec((0..4usize, any::<bool>(), 0..3u8), 0..80)) {
        let (instances, preds) = scored(&spec);
        let report = score_binary(&instances, &preds).unwrap();
        let mut want: BTreeMap<String, [u64; 4]> = BTreeMap::new();
        for &(rel, gold, kind) in &spec {
            let hit = kind == 0;
            let slot = match (gold, hit) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            };
            want.entry(format!("r{rel}")).or_default()[slot] += 1;
        }
        prop_assert_eq!(report.per_relation.len(), want.len());
        let mut total = [0u64; 4];
        for (rel, c) in &want {
            let got = report.per_relation[rel].counts;
            prop_assert_eq!([got.tp, got.fp, got.tn, got.fn_], *c);
            for k in 0..4 {
                total[k] += c[k];
            }
        }
        let c = report.counts;
        prop_assert_eq!([c.tp, c.fp, c.tn, c.fn_], total);
        let [tp, fp, tn, fn_] = total;
        let m = report.metrics;
        prop_assert!(close(m.acc, pct(tp + tn, tp + fp + tn + fn_)));
        prop_assert!(close(m.acc_pos, pct(tp, tp + fn_)));
        prop_assert!(close(m.acc_neg, pct(tn, tn + fp)));
        prop_assert!(close(m.precision, pct(tp, tp + fp)));
    }

    #[test]
    fn accuracy_is_class_weighted_mean(tp in 0u64..500, fp in 0u64..500, tn in 0u64..500, fn_ in 0u64..500) {
        let c = ConfusionCounts { tp, fp, tn, fn_ };
        let m = c.metrics();
        prop_assert!(close(m.recall, m.acc_pos));
        let (p, n) = (c.positives() as f64, c.negatives() as f64);
        if p > 0.0 && n > 0.0 {
            let mixed = (m.acc_pos.unwrap() * p + m.acc_neg.unwrap() * n) / (p + n);
            prop_assert!((mixed - m.acc.unwrap()).abs() < 1e-9);
        }
        if let (Some(pr), Some(re)) = (m.precision, m.recall) {
            let f1 = if pr + re > 0.0 { 2.0 * pr * re / (pr + re) } else { 0.0 };
            prop_assert!(close(m.f1, Some(f1)));
        }
    }

    #[test]
    fn binarization_matches_type_filter(schema in arb_schema(), tacred in arb_multiclass(30)) {
        let items = binarize_multiclass(&tacred, &schema);
        let mut expected = Vec::new();
        for rel in &schema.relations {
            for inst in &tacred {
                let admitted = rel.subject_types.contains(&inst.subject.etype)
                    && rel.object_types.contains(&inst.object.etype);
                if admitted {
                    expected.push((inst.id.clone(), rel.relation.clone(), inst.label == rel.relation));
                }
            }
        }
        let got: Vec<_> = items.iter().map(|i| (i.instance_id.clone(), i.relation.clone(), i.gold)).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn tacred_plus_moves_metrics_one_way(
        tacred in arb_multiclass(30),
        cre in arb_cre(40),
        tacred_preds in prop::collection::vec(0..6usize, 30),
        cre_hits in prop::collection::vec(any::<bool>(), 40),
    ) {
        let schema = schema_from_masks(&[(31, 31), (1, 1), (3, 5), (1, 31)]);
        let mut predicted: BTreeMap<String, Option<String>> = BTreeMap::new();
        for (i, inst) in tacred.iter().enumerate() {
            let p = tacred_preds[i];
            predicted.insert(inst.id.clone(), (p < 5).then(|| format!("r{p}")));
        }
        for (i, inst) in cre.instances().iter().enumerate() {
            let hit = cre_hits[i % cre_hits.len()];
            predicted.insert(inst.instance_id().into(), hit.then(|| inst.relation().to_string()));
        }
        let base = score_items(&binarize_multiclass(&tacred, &schema), &predicted).unwrap();
        let neg = score_items(&build_tacred_plus(&tacred, &cre, Polarity::Negative, &schema).unwrap(), &predicted).unwrap();
        let pos = score_items(&build_tacred_plus(&tacred, &cre, Polarity::Positive, &schema).unwrap(), &predicted).unwrap();

        prop_assert_eq!(neg.counts.tp, base.counts.tp);
        prop_assert_eq!(neg.counts.fn_, base.counts.fn_);
        prop_assert_eq!(neg.metrics.recall.map(f64::to_bits), base.metrics.recall.map(f64::to_bits));
        if let (Some(b), Some(n)) = (base.metrics.precision, neg.metrics.precision) {
            prop_assert!(n <= b + 1e-12);
        }
        prop_assert_eq!(pos.counts.fp, base.counts.fp);
        prop_assert_eq!(pos.counts.tn, base.counts.tn);
        if let (Some(b), Some(p)) = (base.metrics.precision, pos.metrics.precision) {
            prop_assert!(p + 1e-12 >= b);
        }
        let n_pos = cre.instances().iter().filter(|i| i.gold() == Some(true)).count() as u64;
        prop_assert_eq!(pos.counts.total(), base.counts.total() + n_pos);
        prop_assert_eq!(neg.counts.total(), base.counts.total() + cre.len() as u64 - n_pos);
    }
}

#[test]
fn missing_prediction_is_an_error() {
    let (instances, mut preds) = scored(&[(0, true, 0), (1, false, 2)]);
    preds.pop();
    assert!(score_binary(&instances, &preds).is_err());
}

#[test]
fn tacred_plus_rejects_id_collision() {
    let cre = cre_from_spec(&[(0, 0, 1, true)]);
    let toks = tokens(2);
    let clash = MulticlassInstance {
        id: cre.instances()[0].instance_id().into(),
        sentence_id: "t".into(),
        subject: EntityMention::from_tokens(&toks, 0, 0, "PERSON".into(), "t").unwrap(),
        object: EntityMention::from_tokens(&toks, 1, 1, "PERSON".into(), "t").unwrap(),
        label: "r0".into(),
    };
    let schema = person_schema();
    assert!(build_tacred_plus(&[clash], &cre, Polarity::Positive, &schema).is_err());
}
