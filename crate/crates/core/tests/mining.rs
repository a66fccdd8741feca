mod common;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use common::*;
use cre_core::corpus::enumerate_pairs;
use cre_core::miner::{export_tasks, mine, sample_batches, verify_group, SuspiciousGroup};
use cre_core::predict::PredictError;
use cre_core::{CandidateInstance, Prediction, Predictor, Sentence};
use proptest::prelude::*;

/// Says yes to a pseudo-random third of the candidates, keyed by id and salt.
struct Coin(u64);

impl Coin {
    fn says_yes(&self, id: &str) -> bool {
        let mut h = DefaultHasher::new();
        (self.0, id).hash(&mut h);
        h.finish().is_multiple_of(3)
    }
}

impl Predictor for Coin {
    fn id(&self) -> &str {
        "coin"
    }

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> Result<Vec<Prediction>, PredictError> {
        Ok(instances
            .iter()
            .map(|i| Prediction::from_decision(i, self.says_yes(i.instance_id()), "coin"))
            .collect())
    }
}

fn brute_groups(
    corpus: &[Sentence],
    schema: &cre_core::SchemaConfig,
    coin: &Coin,
) -> Vec<(String, String, Vec<String>)> {
    let mut out = Vec::new();
    for s in corpus {
        let mut by_rel: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for c in enumerate_pairs(s, schema) {
            if coin.says_yes(c.instance_id()) {
                by_rel
                    .entry(c.relation().into())
                    .or_default()
                    .push(c.instance_id().into());
            }
        }
        for (rel, members) in by_rel {
            if members.len() >= 2 {
                out.push((s.sentence_id.clone(), rel, members));
            }
        }
    }
    out
}

fn flat(groups: &[SuspiciousGroup]) -> Vec<(String, String, Vec<String>)> {
    groups
        .iter()
        .map(|g| (g.sentence_id.clone(), g.relation.clone(), g.members.clone()))
        .collect()
}

proptest! {
    #[test]
    fn mining_matches_brute_force(
        schema in arb_schema(),
        corpus in arb_corpus(12, 6),
        salt in any::<u64>(),
        chunk in 1usize..8,
    ) {
        let coin = Coin(salt);
        let groups = mine(&corpus, &coin, &schema, chunk).unwrap();
        prop_assert_eq!(flat(&groups), brute_groups(&corpus, &schema, &coin));
        prop_assert_eq!(&groups, &mine(&corpus, &coin, &schema, 1000).unwrap());
        let by_id: BTreeMap<&str, &Sentence> = corpus.iter().map(|s| (s.sentence_id.as_str(), s)).collect();
        for g in &groups {
            prop_assert!(verify_group(g, by_id[g.sentence_id.as_str()], &schema, |id| coin.says_yes(id)));
        }
    }

    #[test]
    fn sampling_is_bounded_and_reproducible(
        schema in arb_schema(),
        corpus in arb_corpus(30, 6),
        salt in any::<u64>(),
        per_relation in 1usize..6,
        rng_seed in any::<u64>(),
    ) {
        let groups = mine(&corpus, &Coin(salt), &schema, 7).unwrap();
        let sample = sample_batches(&groups, per_relation, rng_seed);
        prop_assert_eq!(&sample, &sample_batches(&groups, per_relation, rng_seed));
        let mut pools: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for g in &groups {
            pools.entry(&g.relation).or_default().insert(&g.sentence_id);
        }
        prop_assert_eq!(sample.len(), pools.len());
        for (rel, batch) in &sample {
            let pool = &pools[rel.as_str()];
            prop_assert_eq!(batch.available, pool.len());
            prop_assert_eq!(batch.sentence_ids.len(), pool.len().min(per_relation));
            prop_assert_eq!(batch.shortfall, pool.len() < per_relation);
            prop_assert!(batch.sentence_ids.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(batch.sentence_ids.iter().all(|s| pool.contains(s.as_str())));
        }
        let map: BTreeMap<String, Sentence> = corpus.iter().map(|s| (s.sentence_id.clone(), s.clone())).collect();
        let tasks = export_tasks(&sample, &map, &schema).unwrap();
        for (i, t) in tasks.iter().enumerate() {
            prop_assert_eq!(t.task_index, i);
            prop_assert_eq!(t.instance.relation(), t.group.as_str());
            prop_assert!(sample[&t.group].sentence_ids.iter().any(|s| s == t.instance.sentence_id()));
        }
    }
}

#[test]
fn one_positive_is_not_suspicious() {
    struct First;
    impl Predictor for First {
        fn id(&self) -> &str {
            "first"
        }
        fn predict_batch(
            &self,
            instances: &[CandidateInstance],
        ) -> Result<Vec<Prediction>, PredictError> {
            Ok(instances
                .iter()
                .enumerate()
                .map(|(i, c)| Prediction::from_decision(c, i == 0, "first"))
                .collect())
        }
    }
    let schema = schema_from_masks(&[(1, 1)]);
    let s = sentence("s", 6, &[(0, 0, 0), (2, 2, 0), (4, 4, 0)]);
    assert!(mine(&[s], &First, &schema, 1).unwrap().is_empty());
}
