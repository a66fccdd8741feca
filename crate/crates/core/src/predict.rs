//! Predictions, the predictor interface and the heuristic oracles.
//!
//! The three oracles are gold-informed decision rules: they bound what a
//! shortcut learner could exploit rather than imitate any trained model.
//!
//! - *event*: 1 iff the sentence has some gold-positive instance of the
//!   queried relation, whatever the arguments are.
//! - *type*: 1 iff the argument types are admissible for the relation,
//!   whatever the sentence says.
//! - *event+type*: the conjunction of the two.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CandidateInstance;
use crate::schema::SchemaConfig;

pub const ORACLE_EVENT: &str = "oracle-event";
pub const ORACLE_TYPE: &str = "oracle-type";
pub const ORACLE_EVENT_TYPE: &str = "oracle-event-type";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictError {
    #[error("no prediction for {} instance(s): {}", .0.len(), .0.join(", "))]
    Missing(Vec<String>),
    #[error("prediction for unknown instance `{0}`")]
    Unexpected(String),
    #[error("duplicate prediction for instance `{0}`")]
    Duplicate(String),
    #[error("predicted relation `{0}` is not in the schema")]
    UnknownRelation(String),
    #[error("sentence `{0}` is absent from the gold source")]
    SentenceNotInGold(String),
    #[error("malformed predictor response: {0}")]
    Malformed(String),
    #[error("predictor transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
}

/// One predictor output for one queried instance.
///
/// `predicted_relation` is `None` for the no-relation label. The binary
/// decision is always derived, never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub queried_relation: String,
    pub predicted_relation: Option<String>,
    pub predictor_id: String,
    pub score: Option<f64>,
}

impl Prediction {
    pub fn binary(&self) -> bool {
        self.predicted_relation.as_deref() == Some(self.queried_relation.as_str())
    }

    /// Prediction from a binary decision rule: positive decisions predict
    /// the queried relation, negative ones predict no-relation.
    pub fn from_decision(instance: &CandidateInstance, decision: bool, predictor_id: &str) -> Self {
        Prediction {
            instance_id: instance.instance_id().into(),
            queried_relation: instance.relation().into(),
            predicted_relation: decision.then(|| instance.relation().to_owned()),
            predictor_id: predictor_id.into(),
            score: None,
        }
    }
}

/// Anything that maps a batch of instances to exactly one prediction each,
/// in input order.
pub trait Predictor: Sync {
    fn id(&self) -> &str;

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> Result<Vec<Prediction>, PredictError>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> Result<Vec<Prediction>, PredictError> {
        (**self).predict_batch(instances)
    }
}

impl<P: Predictor + ?Sized> Predictor for alloc::boxed::Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> Result<Vec<Prediction>, PredictError> {
        (**self).predict_batch(instances)
    }
}

/// A multi-class answer for one instance id, as read from a prediction file
/// or a remote response.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPrediction {
    pub instance_id: String,
    pub predicted_relation: Option<String>,
    pub predictor_id: String,
    pub score: Option<f64>,
}

/// Rebuilds input order from id-keyed answers.
///
/// Every instance must be answered exactly once and no extra ids may appear,
/// so transport reordering is invisible to callers. Predicted relations must
/// belong to the schema.
pub fn reassemble(
    instances: &[CandidateInstance],
    answers: impl IntoIterator<Item = RawPrediction>,
    schema: &SchemaConfig,
    allow_extra: bool,
) -> Result<Vec<Prediction>, PredictError> {
    let wanted: BTreeSet<&str> = instances.iter().map(|i| i.instance_id()).collect();
    let mut by_id: BTreeMap<String, RawPrediction> = BTreeMap::new();
    for raw in answers {
        if let Some(rel) = &raw.predicted_relation {
            if !schema.contains(rel) {
                return Err(PredictError::UnknownRelation(rel.clone()));
            }
        }
        if !wanted.contains(raw.instance_id.as_str()) {
            if allow_extra {
                continue;
            }
            return Err(PredictError::Unexpected(raw.instance_id));
        }
        if by_id.contains_key(&raw.instance_id) {
            return Err(PredictError::Duplicate(raw.instance_id));
        }
        by_id.insert(raw.instance_id.clone(), raw);
    }
    let missing: Vec<String> = instances
        .iter()
        .filter(|i| !by_id.contains_key(i.instance_id()))
        .map(|i| i.instance_id().to_owned())
        .collect();
    if !missing.is_empty() {
        return Err(PredictError::Missing(missing));
    }
    Ok(instances
        .iter()
        .map(|inst| {
            let raw = &by_id[inst.instance_id()];
            Prediction {
                instance_id: raw.instance_id.clone(),
                queried_relation: inst.relation().into(),
                predicted_relation: raw.predicted_relation.clone(),
                predictor_id: raw.predictor_id.clone(),
                score: raw.score,
            }
        })
        .collect())
}

/// Which (sentence, relation) pairs have a gold-positive instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldIndex {
    sentences: BTreeSet<String>,
    positive_events: BTreeSet<(String, String)>,
}

impl GoldIndex {
    /// Instances without a gold label still register their sentence.
    pub fn from_instances<'a>(instances: impl IntoIterator<Item = &'a CandidateInstance>) -> Self {
        let mut idx = GoldIndex::default();
        for inst in instances {
            idx.sentences.insert(inst.sentence_id().into());
            if inst.gold() == Some(true) {
                idx.positive_events
                    .insert((inst.sentence_id().into(), inst.relation().into()));
            }
        }
        idx
    }

    pub fn knows(&self, sentence_id: &str) -> bool {
        self.sentences.contains(sentence_id)
    }

    pub fn attests(&self, sentence_id: &str, relation: &str) -> bool {
        self.positive_events
            .contains(&(sentence_id.to_owned(), relation.to_owned()))
    }
}

pub fn oracle_event(
    instances: &[CandidateInstance],
    gold: &GoldIndex,
) -> Result<Vec<Prediction>, PredictError> {
    instances
        .iter()
        .map(|inst| {
            if !gold.knows(inst.sentence_id()) {
                return Err(PredictError::SentenceNotInGold(inst.sentence_id().into()));
            }
            let decision = gold.attests(inst.sentence_id(), inst.relation());
            Ok(Prediction::from_decision(inst, decision, ORACLE_EVENT))
        })
        .collect()
}

pub fn oracle_type(instance: &CandidateInstance, schema: &SchemaConfig) -> Prediction {
    let (subject, object) = instance.type_signature();
    let decision = schema.is_compatible(instance.relation(), subject, object);
    Prediction::from_decision(instance, decision, ORACLE_TYPE)
}

pub fn oracle_event_type(
    instances: &[CandidateInstance],
    gold: &GoldIndex,
    schema: &SchemaConfig,
) -> Result<Vec<Prediction>, PredictError> {
    let events = oracle_event(instances, gold)?;
    Ok(instances
        .iter()
        .zip(events)
        .map(|(inst, event)| {
            let decision = event.binary() && oracle_type(inst, schema).binary();
            Prediction::from_decision(inst, decision, ORACLE_EVENT_TYPE)
        })
        .collect())
}

pub struct EventOracle {
    pub gold: GoldIndex,
}

impl Predictor for EventOracle {
    fn id(&self) -> &str {
        ORACLE_EVENT
    }

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> Result<Vec<Prediction>, PredictError> {
        oracle_event(instances, &self.gold)
    }
}

pub struct TypeOracle {
    pub schema: SchemaConfig,
}

impl Predictor for TypeOracle {
    fn id(&self) -> &str {
        ORACLE_TYPE
    }

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> Result<Vec<Prediction>, PredictError> {
        Ok(instances
            .iter()
            .map(|i| oracle_type(i, &self.schema))
            .collect())
    }
}

pub struct EventTypeOracle {
    pub gold: GoldIndex,
    pub schema: SchemaConfig,
}

impl Predictor for EventTypeOracle {
    fn id(&self) -> &str {
        ORACLE_EVENT_TYPE
    }

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> Result<Vec<Prediction>, PredictError> {
        oracle_event_type(instances, &self.gold, &self.schema)
    }
}
