//! Suspicious-sentence mining, per-relation sampling and task export.
//!
//! A sentence is suspicious for relation `r` when the seed predictor assigns
//! `r` to two or more type-compatible candidate pairs of that sentence: at
//! most one of them is usually right.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{enumerate_pairs, CandidateInstance, CorpusError, Sentence};
use crate::predict::{PredictError, Prediction, Predictor};
use crate::schema::SchemaConfig;
use crate::seed::stream_rng;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SuspiciousGroup {
    pub sentence_id: String,
    pub relation: String,
    /// Instance ids, in enumeration order. Always at least two.
    pub members: Vec<String>,
    pub shares_argument: bool,
}

/// Groups one sentence's positive predictions by relation.
///
/// `candidates` and `predictions` are parallel slices for a single sentence.
pub fn group_sentence(
    candidates: &[CandidateInstance],
    predictions: &[Prediction],
) -> Vec<SuspiciousGroup> {
    let mut by_relation: BTreeMap<&str, Vec<&CandidateInstance>> = BTreeMap::new();
    for (inst, pred) in candidates.iter().zip(predictions) {
        if pred.binary() {
            by_relation.entry(inst.relation()).or_default().push(inst);
        }
    }
    by_relation
        .into_iter()
        .filter(|(_, members)| members.len() >= 2)
        .map(|(relation, members)| SuspiciousGroup {
            sentence_id: members[0].sentence_id().into(),
            relation: relation.into(),
            shares_argument: members
                .iter()
                .enumerate()
                .any(|(i, a)| members[i + 1..].iter().any(|b| a.shares_argument(b))),
            members: members.iter().map(|m| m.instance_id().into()).collect(),
        })
        .collect()
}

/// Mines a slice of sentences with one predictor call.
pub fn mine_chunk<P: Predictor + ?Sized>(
    sentences: &[Sentence],
    seed: &P,
    schema: &SchemaConfig,
) -> Result<Vec<SuspiciousGroup>, PredictError> {
    let per_sentence: Vec<Vec<CandidateInstance>> = sentences
        .iter()
        .map(|s| enumerate_pairs(s, schema))
        .collect();
    let flat: Vec<CandidateInstance> = per_sentence.iter().flatten().cloned().collect();
    if flat.is_empty() {
        return Ok(Vec::new());
    }
    let predictions = seed.predict_batch(&flat)?;
    if predictions.len() != flat.len() {
        return Err(PredictError::Malformed(alloc::format!(
            "expected {} predictions, got {}",
            flat.len(),
            predictions.len()
        )));
    }
    let mut groups = Vec::new();
    let mut offset = 0;
    for candidates in &per_sentence {
        let end = offset + candidates.len();
        groups.extend(group_sentence(candidates, &predictions[offset..end]));
        offset = end;
    }
    Ok(groups)
}

/// Sequential mining in chunks of `chunk_size` sentences. Output follows
/// corpus order, then relation name.
pub fn mine<P: Predictor + ?Sized>(
    corpus: &[Sentence],
    seed: &P,
    schema: &SchemaConfig,
    chunk_size: usize,
) -> Result<Vec<SuspiciousGroup>, PredictError> {
    let mut out = Vec::new();
    for chunk in corpus.chunks(chunk_size.max(1)) {
        out.extend(mine_chunk(chunk, seed, schema)?);
    }
    Ok(out)
}

/// Re-checks both mining conditions on an emitted group: at least two
/// members, all type-compatible candidates of the same sentence carrying the
/// group relation, each predicted positive.
pub fn verify_group(
    group: &SuspiciousGroup,
    sentence: &Sentence,
    schema: &SchemaConfig,
    positive: impl Fn(&str) -> bool,
) -> bool {
    if group.members.len() < 2 || sentence.sentence_id != group.sentence_id {
        return false;
    }
    let candidates = enumerate_pairs(sentence, schema);
    let members: Vec<&CandidateInstance> = group
        .members
        .iter()
        .filter_map(|id| candidates.iter().find(|c| c.instance_id() == id))
        .collect();
    members.len() == group.members.len()
        && members
            .iter()
            .all(|m| m.relation() == group.relation && positive(m.instance_id()))
        && group.shares_argument
            == members
                .iter()
                .enumerate()
                .any(|(i, a)| members[i + 1..].iter().any(|b| a.shares_argument(b)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledBatch {
    pub sentence_ids: Vec<String>,
    /// Distinct suspicious sentences available for the relation.
    pub available: usize,
    /// Fewer sentences than requested were available.
    pub shortfall: bool,
}

/// Uniform per-relation sample of suspicious sentences, without replacement.
///
/// Each relation draws from its own RNG stream seeded from `rng_seed` and the
/// relation name. Sampled ids are returned sorted.
pub fn sample_batches(
    groups: &[SuspiciousGroup],
    per_relation: usize,
    rng_seed: u64,
) -> BTreeMap<String, SampledBatch> {
    let per_relation = per_relation.max(1);
    let mut pools: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for g in groups {
        pools
            .entry(g.relation.as_str())
            .or_default()
            .insert(g.sentence_id.as_str());
    }
    pools
        .into_iter()
        .map(|(relation, pool)| {
            let mut ids: Vec<String> = pool.into_iter().map(String::from).collect();
            let available = ids.len();
            if available > per_relation {
                let mut rng = stream_rng(rng_seed, relation);
                ids.shuffle(&mut rng);
                ids.truncate(per_relation);
                ids.sort();
            }
            (
                relation.into(),
                SampledBatch {
                    sentence_ids: ids,
                    available,
                    shortfall: available < per_relation,
                },
            )
        })
        .collect()
}

/// One unlabeled annotation task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub task_index: usize,
    pub group: String,
    pub instance: CandidateInstance,
    pub tokens: Vec<String>,
    pub source: String,
}

/// Every candidate of every sampled sentence whose relation is the group
/// relation, numbered in relation, sentence and enumeration order.
pub fn export_tasks(
    sample: &BTreeMap<String, SampledBatch>,
    corpus: &BTreeMap<String, Sentence>,
    schema: &SchemaConfig,
) -> Result<Vec<Task>, CorpusError> {
    let mut tasks = Vec::new();
    for (relation, batch) in sample {
        for sid in &batch.sentence_ids {
            let sentence = corpus
                .get(sid)
                .ok_or_else(|| CorpusError::UnknownSentence(sid.clone()))?;
            for instance in enumerate_pairs(sentence, schema) {
                if instance.relation() != relation {
                    continue;
                }
                tasks.push(Task {
                    task_index: tasks.len(),
                    group: relation.clone(),
                    instance,
                    tokens: sentence.tokens.clone(),
                    source: sentence.source.clone(),
                });
            }
        }
    }
    Ok(tasks)
}
