//! Binary evaluation metrics and the TACRED-plus constructions.
//!
//! All metrics are percentages carried at full precision. A metric whose
//! denominator is zero is `None`, never 0 or 100.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CandidateInstance, CreDataset, MulticlassInstance};
use crate::predict::Prediction;
use crate::schema::SchemaConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no prediction for {} instance(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("instance `{0}` has no gold label")]
    Unlabeled(String),
    #[error("instance ids appear in both sources: {}", .0.join(", "))]
    IdCollision(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, gold: bool, predicted: bool) {
        match (gold, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn metrics(&self) -> Metrics {
        let pct = |num: u64, den: u64| (den > 0).then(|| 100.0 * num as f64 / den as f64);
        let precision = pct(self.tp, self.tp + self.fp);
        let recall = pct(self.tp, self.positives());
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Metrics {
            acc: pct(self.tp + self.tn, self.total()),
            acc_pos: recall,
            acc_neg: pct(self.tn, self.negatives()),
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: Option<f64>,
    pub acc_pos: Option<f64>,
    pub acc_neg: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl RelationReport {
    fn from_counts(counts: ConfusionCounts) -> Self {
        RelationReport {
            counts,
            metrics: counts.metrics(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub per_relation: BTreeMap<String, RelationReport>,
}

impl EvalReport {
    pub fn from_relation_counts(per_relation: BTreeMap<String, ConfusionCounts>) -> Self {
        let mut counts = ConfusionCounts::default();
        for c in per_relation.values() {
            counts.add(c);
        }
        EvalReport {
            counts,
            metrics: counts.metrics(),
            per_relation: per_relation
                .into_iter()
                .map(|(r, c)| (r, RelationReport::from_counts(c)))
                .collect(),
        }
    }
}

/// Scores binary-labeled instances against predictions matched by id.
pub fn score_binary(
    instances: &[CandidateInstance],
    predictions: &[Prediction],
) -> Result<EvalReport, EvalError> {
    let by_id: BTreeMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.instance_id.as_str(), p))
        .collect();
    let missing: Vec<String> = instances
        .iter()
        .filter(|i| !by_id.contains_key(i.instance_id()))
        .map(|i| i.instance_id().into())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    let mut per_relation: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for inst in instances {
        let gold = inst
            .gold()
            .ok_or_else(|| EvalError::Unlabeled(inst.instance_id().into()))?;
        let pred = by_id[inst.instance_id()];
        // Compare against the instance's own relation, not whatever the
        // prediction record claims was queried.
        let predicted = pred.predicted_relation.as_deref() == Some(inst.relation());
        per_relation
            .entry(inst.relation().into())
            .or_default()
            .record(gold, predicted);
    }
    Ok(EvalReport::from_relation_counts(per_relation))
}

/// One member of a per-relation binary evaluation set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryItem {
    pub instance_id: String,
    pub relation: String,
    pub gold: bool,
}

/// For each relation, every instance whose argument types it admits, with
/// gold 1 iff the multi-class label is that relation.
pub fn binarize_multiclass(
    instances: &[MulticlassInstance],
    schema: &SchemaConfig,
) -> Vec<BinaryItem> {
    let mut out = Vec::new();
    for rel in &schema.relations {
        for inst in instances {
            if rel.admits(&inst.subject.etype, &inst.object.etype) {
                out.push(BinaryItem {
                    instance_id: inst.id.clone(),
                    relation: rel.relation.clone(),
                    gold: inst.label == rel.relation,
                });
            }
        }
    }
    out
}

/// Micro-aggregated scoring of per-relation binary items against
/// multi-class predictions (`None` = no relation).
pub fn score_items(
    items: &[BinaryItem],
    predicted: &BTreeMap<String, Option<String>>,
) -> Result<EvalReport, EvalError> {
    let mut missing: Vec<String> = items
        .iter()
        .filter(|i| !predicted.contains_key(&i.instance_id))
        .map(|i| i.instance_id.clone())
        .collect();
    missing.sort();
    missing.dedup();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    let mut per_relation: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for item in items {
        let hit = predicted[&item.instance_id].as_deref() == Some(item.relation.as_str());
        per_relation
            .entry(item.relation.clone())
            .or_default()
            .record(item.gold, hit);
    }
    Ok(EvalReport::from_relation_counts(per_relation))
}

pub fn score_tacred_binarized(
    instances: &[MulticlassInstance],
    predicted: &BTreeMap<String, Option<String>>,
    schema: &SchemaConfig,
) -> Result<EvalReport, EvalError> {
    score_items(&binarize_multiclass(instances, schema), predicted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

/// Binarized TACRED items plus every challenge-set instance of one polarity,
/// each added to its own relation's set only.
pub fn build_tacred_plus(
    tacred: &[MulticlassInstance],
    cre: &CreDataset,
    polarity: Polarity,
    schema: &SchemaConfig,
) -> Result<Vec<BinaryItem>, EvalError> {
    let tacred_ids: BTreeSet<&str> = tacred.iter().map(|i| i.id.as_str()).collect();
    let collisions: Vec<String> = cre
        .instances()
        .iter()
        .filter(|i| tacred_ids.contains(i.instance_id()))
        .map(|i| i.instance_id().into())
        .collect();
    if !collisions.is_empty() {
        return Err(EvalError::IdCollision(collisions));
    }
    let want = polarity == Polarity::Positive;
    let mut items = binarize_multiclass(tacred, schema);
    for inst in cre.instances() {
        let gold = inst
            .gold()
            .ok_or_else(|| EvalError::Unlabeled(inst.instance_id().into()))?;
        if gold == want {
            items.push(BinaryItem {
                instance_id: inst.instance_id().into(),
                relation: inst.relation().into(),
                gold,
            });
        }
    }
    Ok(items)
}
