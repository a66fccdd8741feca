//! Stratified halving of a challenge set and training-set augmentation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CreDataset, TacredRecord};
use crate::seed::stream_rng;

/// Prefix applied to challenge-set ids when they enter a TACRED file.
pub const CRE_ID_PREFIX: &str = "cre:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InoculateError {
    #[error("ids collide with the training file after namespacing: {}", .0.join(", "))]
    IdCollision(Vec<String>),
    #[error("instance `{0}` is not in the challenge set")]
    UnknownInstance(String),
    #[error("{} evaluation instance(s) are in the training half: {}", .0.len(), .0.join(", "))]
    Contaminated(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Halve the instances of each relation.
    Instance,
    /// Halve the (relation, sentence) units of each relation, keeping a
    /// sentence's instances together.
    Sentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Half {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HalfCounts {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub rng_seed: u64,
    pub mode: SplitMode,
    pub half_a: Vec<String>,
    pub half_b: Vec<String>,
    /// Instance counts per relation.
    pub per_relation: BTreeMap<String, HalfCounts>,
}

impl SplitManifest {
    pub fn half(&self, half: Half) -> &[String] {
        match half {
            Half::A => &self.half_a,
            Half::B => &self.half_b,
        }
    }

    /// Refuses evaluation ids that belong to the training half.
    pub fn check_uncontaminated<'a>(
        &self,
        train: Half,
        eval_ids: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), InoculateError> {
        let train_ids: BTreeSet<&str> = self.half(train).iter().map(String::as_str).collect();
        let bad: Vec<String> = eval_ids
            .into_iter()
            .filter(|id| {
                train_ids.contains(id)
                    || id
                        .strip_prefix(CRE_ID_PREFIX)
                        .is_some_and(|raw| train_ids.contains(raw))
            })
            .map(String::from)
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(InoculateError::Contaminated(bad))
        }
    }
}

/// Stratified, seed-reproducible halving.
///
/// Within each relation the units are shuffled and split; when a relation
/// has an odd number of units the spare one alternates between halves across
/// relations (in relation-name order) so the overall halves stay balanced.
pub fn split_cre(cre: &CreDataset, rng_seed: u64, mode: SplitMode) -> SplitManifest {
    // relation -> unit key -> instance ids
    let mut strata: BTreeMap<&str, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for inst in cre.instances() {
        let key = match mode {
            SplitMode::Instance => String::from(inst.instance_id()),
            SplitMode::Sentence => String::from(inst.sentence_id()),
        };
        strata
            .entry(inst.relation())
            .or_default()
            .entry(key)
            .or_default()
            .push(inst.instance_id().into());
    }
    let mut manifest = SplitManifest {
        rng_seed,
        mode,
        half_a: Vec::new(),
        half_b: Vec::new(),
        per_relation: BTreeMap::new(),
    };
    let mut spare_to_a = true;
    for (relation, units) in strata {
        let mut keys: Vec<String> = units.keys().cloned().collect();
        let mut rng = stream_rng(rng_seed, relation);
        keys.shuffle(&mut rng);
        let odd = keys.len() % 2 == 1;
        let cut = keys.len() / 2 + usize::from(odd && spare_to_a);
        if odd {
            spare_to_a = !spare_to_a;
        }
        let counts = manifest.per_relation.entry(relation.into()).or_default();
        for (i, key) in keys.iter().enumerate() {
            let ids = &units[key];
            if i < cut {
                counts.a += ids.len();
                manifest.half_a.extend(ids.iter().cloned());
            } else {
                counts.b += ids.len();
                manifest.half_b.extend(ids.iter().cloned());
            }
        }
    }
    manifest.half_a.sort();
    manifest.half_b.sort();
    manifest
}

/// Converts challenge-set instances to TACRED records: positives keep their
/// relation, negatives become the no-relation label.
pub fn to_tacred_records(
    cre: &CreDataset,
    ids: &[String],
    no_relation_label: &str,
) -> Result<Vec<TacredRecord>, InoculateError> {
    let by_id: BTreeMap<&str, _> = cre
        .instances()
        .iter()
        .map(|i| (i.instance_id(), i))
        .collect();
    ids.iter()
        .map(|id| {
            let inst = by_id
                .get(id.as_str())
                .ok_or_else(|| InoculateError::UnknownInstance(id.clone()))?;
            let sentence = cre
                .sentence(inst.sentence_id())
                .ok_or_else(|| InoculateError::UnknownInstance(id.clone()))?;
            Ok(TacredRecord {
                id: format!("{CRE_ID_PREFIX}{id}"),
                relation: if inst.gold() == Some(true) {
                    inst.relation().into()
                } else {
                    no_relation_label.into()
                },
                token: sentence.tokens.clone(),
                subj_start: inst.subject().start,
                subj_end: inst.subject().end,
                obj_start: inst.object().start,
                obj_end: inst.object().end,
                subj_type: inst.subject().etype.as_str().into(),
                obj_type: inst.object().etype.as_str().into(),
            })
        })
        .collect()
}

/// Appends the converted half to the training records.
pub fn augment_train(
    mut train: Vec<TacredRecord>,
    cre: &CreDataset,
    half: &[String],
    no_relation_label: &str,
) -> Result<Vec<TacredRecord>, InoculateError> {
    let added = to_tacred_records(cre, half, no_relation_label)?;
    let existing: BTreeSet<&str> = train.iter().map(|r| r.id.as_str()).collect();
    let collisions: Vec<String> = added
        .iter()
        .filter(|r| existing.contains(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    if !collisions.is_empty() {
        return Err(InoculateError::IdCollision(collisions));
    }
    train.extend(added);
    Ok(train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CandidateInstance, CreEntry, EntityMention};
    use alloc::string::ToString;
    use alloc::vec;

    fn dataset(spec: &[(&str, &str, bool)]) -> CreDataset {
        let tokens: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
        let mut entries = Vec::new();
        let mut next: BTreeMap<&str, usize> = BTreeMap::new();
        for (sid, rel, gold) in spec {
            let k = next.entry(sid).or_insert(0);
            *k += 1;
            let m = |i| EntityMention::from_tokens(&tokens, i, i, "PERSON".into(), sid).unwrap();
            entries.push(CreEntry {
                instance: CandidateInstance::new(*sid, m(0), m(*k), *rel)
                    .unwrap()
                    .with_gold(*gold),
                group: rel.to_string(),
                tokens: tokens.clone(),
                source: "t".into(),
            });
        }
        CreDataset::from_entries(entries).unwrap()
    }

    #[test]
    fn two_instances_split_one_each() {
        let ds = dataset(&[("s1", "per:spouse", true), ("s1", "per:spouse", false)]);
        let m = split_cre(&ds, 3, SplitMode::Instance);
        assert_eq!((m.half_a.len(), m.half_b.len()), (1, 1));
        assert_eq!(m, split_cre(&ds, 3, SplitMode::Instance));
    }

    #[test]
    fn odd_strata_alternate_spare() {
        let ds = dataset(&[
            ("s1", "per:spouse", true),
            ("s1", "per:spouse", false),
            ("s1", "per:spouse", false),
            ("s2", "per:children", true),
            ("s2", "per:children", false),
            ("s2", "per:children", false),
        ]);
        let m = split_cre(&ds, 11, SplitMode::Instance);
        assert_eq!((m.half_a.len(), m.half_b.len()), (3, 3));
    }

    #[test]
    fn sentence_mode_keeps_sentences_whole() {
        let ds = dataset(&[
            ("s1", "per:spouse", true),
            ("s1", "per:spouse", false),
            ("s2", "per:spouse", true),
            ("s2", "per:spouse", false),
        ]);
        let m = split_cre(&ds, 5, SplitMode::Sentence);
        let sentence_of = |id: &String| {
            ds.instances()
                .iter()
                .find(|i| i.instance_id() == id)
                .unwrap()
                .sentence_id()
                .to_string()
        };
        let a: BTreeSet<String> = m.half_a.iter().map(sentence_of).collect();
        let b: BTreeSet<String> = m.half_b.iter().map(sentence_of).collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.len() + b.len(), 2);
    }

    #[test]
    fn negatives_become_no_relation() {
        let ds = dataset(&[("s1", "per:spouse", false), ("s1", "per:age", true)]);
        let ids: Vec<String> = ds
            .instances()
            .iter()
            .map(|i| i.instance_id().to_string())
            .collect();
        let recs = to_tacred_records(&ds, &ids, "no_relation").unwrap();
        assert_eq!(recs[0].relation, "no_relation");
        assert_eq!(recs[1].relation, "per:age");
        assert!(recs.iter().all(|r| r.id.starts_with(CRE_ID_PREFIX)));
    }

    #[test]
    fn collision_after_namespacing() {
        let ds = dataset(&[("s1", "per:spouse", false)]);
        let ids: Vec<String> = vec![ds.instances()[0].instance_id().into()];
        let first = augment_train(vec![], &ds, &ids, "no_relation").unwrap();
        assert!(matches!(
            augment_train(first, &ds, &ids, "no_relation"),
            Err(InoculateError::IdCollision(_))
        ));
    }

    #[test]
    fn contamination_detected() {
        let ds = dataset(&[("s1", "per:spouse", true), ("s1", "per:spouse", false)]);
        let m = split_cre(&ds, 1, SplitMode::Instance);
        assert!(m
            .check_uncontaminated(Half::A, m.half_b.iter().map(String::as_str))
            .is_ok());
        assert!(m
            .check_uncontaminated(Half::A, m.half_a.iter().map(String::as_str))
            .is_err());
    }
}
