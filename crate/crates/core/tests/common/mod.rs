#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cre_core::corpus::CreEntry;
use cre_core::{
    CandidateInstance, CreDataset, EntityMention, EntityType, RelationSchema, SchemaConfig,
    Sentence,
};
use proptest::prelude::*;

pub const TYPES: [&str; 5] = ["PERSON", "ORGANIZATION", "DATE", "CITY", "NUMBER"];

pub fn types_from_mask(mask: u8) -> BTreeSet<EntityType> {
    TYPES
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, t)| EntityType::from(*t))
        .collect()
}

pub fn relation(name: &str, subj_mask: u8, obj_mask: u8) -> RelationSchema {
    RelationSchema {
        relation: name.into(),
        subject_types: types_from_mask(subj_mask),
        object_types: types_from_mask(obj_mask),
        question_subject: "What about {e1}?".into(),
        question_object: "Who has {e2}?".into(),
    }
}

pub fn schema_from_masks(masks: &[(u8, u8)]) -> SchemaConfig {
    SchemaConfig {
        no_relation_label: "no_relation".into(),
        profiles: BTreeMap::new(),
        relations: masks
            .iter()
            .enumerate()
            .map(|(i, (s, o))| relation(&format!("r{i}"), *s, *o))
            .collect(),
    }
}

pub fn arb_schema() -> impl Strategy<Value = SchemaConfig> {
    prop::collection::vec((1u8..32, 1u8..32), 1..=6).prop_map(|m| schema_from_masks(&m))
}

pub fn tokens(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// Raw `(start, end, type index)` spans that fit a sentence of `len` tokens.
pub fn arb_spans(len: usize, max: usize) -> impl Strategy<Value = Vec<(usize, usize, usize)>> {
    prop::collection::vec((0..len, 0..3usize, 0..TYPES.len()), 0..=max).prop_map(move |v| {
        v.into_iter()
            .map(|(s, w, t)| (s, (s + w).min(len - 1), t))
            .collect()
    })
}

pub fn sentence(id: &str, len: usize, spans: &[(usize, usize, usize)]) -> Sentence {
    Sentence::new(
        id,
        tokens(len),
        spans
            .iter()
            .map(|&(s, e, t)| (s, e, EntityType::from(TYPES[t]))),
        "test",
    )
    .unwrap()
}

pub fn arb_sentence(id: String, max_mentions: usize) -> impl Strategy<Value = Sentence> {
    (1usize..=12)
        .prop_flat_map(move |len| (Just(len), arb_spans(len, max_mentions)))
        .prop_map(move |(len, spans)| sentence(&id, len, &spans))
}

pub fn arb_corpus(
    max_sentences: usize,
    max_mentions: usize,
) -> impl Strategy<Value = Vec<Sentence>> {
    (1..=max_sentences).prop_flat_map(move |n| {
        (0..n)
            .map(|i| arb_sentence(format!("s{i:03}"), max_mentions))
            .collect::<Vec<_>>()
    })
}

/// Challenge set over single-token mentions: each `(sentence, relation,
/// object index, gold)` spec yields the instance `(w0, w{k}, relation)`.
pub fn cre_from_spec(spec: &[(usize, usize, usize, bool)]) -> CreDataset {
    let toks = tokens(10);
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for &(sid, rel, k, gold) in spec {
        let k = 1 + k % 9;
        if !seen.insert((sid, rel, k)) {
            continue;
        }
        let sid = format!("s{sid}");
        let rel = format!("r{rel}");
        let m = |i: usize| EntityMention::from_tokens(&toks, i, i, "PERSON".into(), &sid).unwrap();
        entries.push(CreEntry {
            instance: CandidateInstance::new(sid.clone(), m(0), m(k), rel.clone())
                .unwrap()
                .with_gold(gold),
            group: rel,
            tokens: toks.clone(),
            source: "test".into(),
        });
    }
    CreDataset::from_entries(entries).unwrap()
}

pub fn arb_cre(max: usize) -> impl Strategy<Value = CreDataset> {
    prop::collection::vec((0..12usize, 0..4usize, 0..9usize, any::<bool>()), 1..=max)
        .prop_map(|spec| cre_from_spec(&spec))
}

/// Single-relation schema admitting PERSON-PERSON under `r0..r3`.
pub fn person_schema() -> SchemaConfig {
    let p = 1u8;
    schema_from_masks(&[(p, p), (p, p), (p, p), (p, p)])
}
