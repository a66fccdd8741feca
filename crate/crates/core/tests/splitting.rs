mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use cre_core::inoculate::{augment_train, split_cre, to_tacred_records, Half, SplitMode};
use proptest::prelude::*;

proptest! {
    #[test]
    fn halves_partition_each_relation(cre in arb_cre(60), seed in any::<u64>()) {
        let m = split_cre(&cre, seed, SplitMode::Instance);
        let a: BTreeSet<&String> = m.half_a.iter().collect();
        let b: BTreeSet<&String> = m.half_b.iter().collect();
        prop_assert!(a.is_disjoint(&b));
        let all: BTreeSet<String> = cre.instances().iter().map(|i| i.instance_id().to_string()).collect();
        let union: BTreeSet<String> = a.union(&b).map(|s| s.to_string()).collect();
        prop_assert_eq!(union, all);
        prop_assert!(m.half_a.len().abs_diff(m.half_b.len()) <= 1);
        let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for inst in cre.instances() {
            let e = per.entry(inst.relation()).or_default();
            if a.contains(&inst.instance_id().to_string()) { e.0 += 1 } else { e.1 += 1 }
        }
        for (rel, (na, nb)) in per {
            prop_assert!(na.abs_diff(nb) <= 1, "{} split {}/{}", rel, na, nb);
            prop_assert_eq!((m.per_relation[rel].a, m.per_relation[rel].b), (na, nb));
        }
        prop_assert_eq!(&split_cre(&cre, seed, SplitMode::Instance), &m);
    }

    #[test]
    fn sentence_mode_keeps_units_whole(cre in arb_cre(60), seed in any::<u64>()) {
        let m = split_cre(&cre, seed, SplitMode::Sentence);
        let a: BTreeSet<&str> = m.half_a.iter().map(String::as_str).collect();
        let mut units: BTreeMap<(&str, &str), BTreeSet<bool>> = BTreeMap::new();
        for inst in cre.instances() {
            units
                .entry((inst.relation(), inst.sentence_id()))
                .or_default()
                .insert(a.contains(inst.instance_id()));
        }
        prop_assert!(units.values().all(|sides| sides.len() == 1));
        let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for ((rel, _), sides) in &units {
            let e = per.entry(rel).or_default();
            if sides.contains(&true) { e.0 += 1 } else { e.1 += 1 }
        }
        prop_assert!(per.values().all(|(x, y)| x.abs_diff(*y) <= 1));
        prop_assert_eq!(m.half_a.len() + m.half_b.len(), cre.len());
    }

    #[test]
    fn training_half_is_refused_for_evaluation(cre in arb_cre(40), seed in any::<u64>()) {
        let m = split_cre(&cre, seed, SplitMode::Instance);
        prop_assert!(m.check_uncontaminated(Half::A, m.half_b.iter().map(String::as_str)).is_ok());
        if let Some(leak) = m.half_a.first() {
            let prefixed = format!("cre:{leak}");
            prop_assert!(m.check_uncontaminated(Half::A, [leak.as_str()]).is_err());
            prop_assert!(m.check_uncontaminated(Half::A, [prefixed.as_str()]).is_err());
        }
    }

    #[test]
    fn converted_records_keep_labels(cre in arb_cre(40), seed in any::<u64>()) {
        let m = split_cre(&cre, seed, SplitMode::Instance);
        let recs = to_tacred_records(&cre, &m.half_a, "no_relation").unwrap();
        prop_assert_eq!(recs.len(), m.half_a.len());
        let by_id: BTreeMap<&str, _> = cre.instances().iter().map(|i| (i.instance_id(), i)).collect();
        for (rec, id) in recs.iter().zip(&m.half_a) {
            let inst = by_id[id.as_str()];
            let want = if inst.gold() == Some(true) { inst.relation() } else { "no_relation" };
            prop_assert_eq!(rec.relation.as_str(), want);
            prop_assert_eq!((rec.subj_start, rec.subj_end), inst.subject().span());
            prop_assert_eq!((rec.obj_start, rec.obj_end), inst.object().span());
        }
        let train = augment_train(Vec::new(), &cre, &m.half_a, "no_relation").unwrap();
        prop_assert!(augment_train(train, &cre, &m.half_a, "no_relation").is_err());
    }
}

#[test]
fn hundred_seeds_stay_balanced() {
    let spec: Vec<_> = (0..200)
        .map(|i| (i % 17, i % 4, i % 9, i % 3 == 0))
        .collect();
    let cre = cre_from_spec(&spec);
    for seed in 0..100 {
        let m = split_cre(&cre, seed, SplitMode::Instance);
        assert!(m.half_a.len().abs_diff(m.half_b.len()) <= 1, "seed {seed}");
        for c in m.per_relation.values() {
            assert!(c.a.abs_diff(c.b) <= 1, "seed {seed}");
        }
    }
}
