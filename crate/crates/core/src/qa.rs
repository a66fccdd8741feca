//! Relation classification by question answering.
//!
//! Each instance becomes two questions, one naming each argument. The
//! relation is taken to hold when either question is answered with the other
//! argument.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CandidateInstance, Sentence};
use crate::predict::{PredictError, Prediction};
use crate::schema::{SchemaConfig, OBJECT_PLACEHOLDER, SUBJECT_PLACEHOLDER};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QaError {
    #[error("relation `{0}` has no question templates")]
    MissingTemplate(String),
    #[error("instance `{0}`: question still contains a placeholder")]
    ResidualPlaceholder(String),
    #[error("instance `{0}`: argument surface is empty")]
    EmptySurface(String),
    #[error("sentence `{0}` not found")]
    UnknownSentence(String),
    #[error(transparent)]
    Predictor(#[from] PredictError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPair {
    pub instance_id: String,
    /// Names the subject, expects the object.
    pub question_for_object: String,
    /// Names the object, expects the subject.
    pub question_for_subject: String,
    pub expected_object: String,
    pub expected_subject: String,
}

pub fn instantiate(
    instance: &CandidateInstance,
    schema: &SchemaConfig,
) -> Result<QuestionPair, QaError> {
    let rel = schema
        .relation(instance.relation())
        .ok_or_else(|| QaError::MissingTemplate(instance.relation().into()))?;
    let subject = instance.subject().surface.as_str();
    let object = instance.object().surface.as_str();
    if subject.trim().is_empty() || object.trim().is_empty() {
        return Err(QaError::EmptySurface(instance.instance_id().into()));
    }
    let fill = |t: &str| {
        t.replace(SUBJECT_PLACEHOLDER, subject)
            .replace(OBJECT_PLACEHOLDER, object)
    };
    let q1 = fill(&rel.question_subject);
    let q2 = fill(&rel.question_object);
    // A surface may itself contain braces; only the template text matters here.
    let residual = |template: &str| {
        let stripped = template
            .replace(SUBJECT_PLACEHOLDER, "")
            .replace(OBJECT_PLACEHOLDER, "");
        stripped.contains('{') || stripped.contains('}')
    };
    if residual(&rel.question_subject) || residual(&rel.question_object) {
        return Err(QaError::ResidualPlaceholder(instance.instance_id().into()));
    }
    Ok(QuestionPair {
        instance_id: instance.instance_id().into(),
        question_for_object: q1,
        question_for_subject: q2,
        expected_object: object.into(),
        expected_subject: subject.into(),
    })
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercase, trim surrounding punctuation, collapse whitespace, drop
/// leading articles. A lone article is kept. Idempotent.
pub fn normalize_answer(text: &str) -> String {
    let lower = text.to_lowercase();
    let mut rest = lower.as_str();
    loop {
        rest = rest.trim_matches(|c: char| !c.is_alphanumeric());
        let mut parts = rest.splitn(2, char::is_whitespace);
        match (parts.next(), parts.next()) {
            (Some(first), Some(tail)) if ARTICLES.contains(&first) => rest = tail,
            _ => break,
        }
    }
    rest.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Case, article and punctuation-insensitive exact match.
    #[default]
    Normalized,
    /// Character offsets must equal the argument span when the predictor
    /// returns offsets; otherwise exact text equality.
    Strict,
}

pub fn match_answer(predicted: Option<&str>, expected: &str) -> bool {
    match predicted {
        None => false,
        Some(text) => normalize_answer(text) == normalize_answer(expected),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaQuery {
    pub id: String,
    pub question: String,
    pub context: String,
}

/// `answer` is `None` when the model abstains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaAnswer {
    pub id: String,
    pub answer: Option<String>,
    pub score: Option<f64>,
    /// Character offsets `[start, end)` into the context.
    pub span: Option<(usize, usize)>,
}

/// Extractive QA model behind any transport.
pub trait QaPredictor: Sync {
    fn id(&self) -> &str;

    /// One answer per query, in query order.
    fn answer_batch(&self, queries: &[QaQuery]) -> Result<Vec<QaAnswer>, PredictError>;
}

impl<P: QaPredictor + ?Sized> QaPredictor for &P {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn answer_batch(&self, queries: &[QaQuery]) -> Result<Vec<QaAnswer>, PredictError> {
        (**self).answer_batch(queries)
    }
}

impl<P: QaPredictor + ?Sized> QaPredictor for alloc::boxed::Box<P> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn answer_batch(&self, queries: &[QaQuery]) -> Result<Vec<QaAnswer>, PredictError> {
        (**self).answer_batch(queries)
    }
}

/// The verdict's decision is fixed at construction as `match_q1 || match_q2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaVerdict {
    instance_id: String,
    match_q1: bool,
    match_q2: bool,
    decision: bool,
    answers: [Option<String>; 2],
}

impl QaVerdict {
    pub fn new(
        instance_id: impl Into<String>,
        match_q1: bool,
        match_q2: bool,
        answers: [Option<String>; 2],
    ) -> Self {
        QaVerdict {
            instance_id: instance_id.into(),
            match_q1,
            match_q2,
            decision: match_q1 || match_q2,
            answers,
        }
    }

    pub fn instance_id(&self) -> &str {
        &self.instance_id
    }

    pub fn match_q1(&self) -> bool {
        self.match_q1
    }

    pub fn match_q2(&self) -> bool {
        self.match_q2
    }

    pub fn decision(&self) -> bool {
        self.decision
    }

    pub fn answers(&self) -> &[Option<String>; 2] {
        &self.answers
    }

    pub fn to_prediction(&self, instance: &CandidateInstance, predictor_id: &str) -> Prediction {
        Prediction::from_decision(instance, self.decision, predictor_id)
    }
}

/// Query id of the question asking for the object.
pub fn object_query_id(instance_id: &str) -> String {
    format!("{instance_id}#q1")
}

/// Query id of the question asking for the subject.
pub fn subject_query_id(instance_id: &str) -> String {
    format!("{instance_id}#q2")
}

fn span_matches(
    answer: &QaAnswer,
    expected_text: &str,
    expected_span: (usize, usize),
    mode: MatchMode,
) -> bool {
    match mode {
        MatchMode::Normalized => match_answer(answer.answer.as_deref(), expected_text),
        MatchMode::Strict => match (&answer.answer, answer.span) {
            (None, _) => false,
            (Some(_), Some(span)) => span == expected_span,
            (Some(text), None) => text == expected_text,
        },
    }
}

pub fn qa_classify<Q: QaPredictor + ?Sized>(
    instances: &[CandidateInstance],
    sentences: &BTreeMap<String, Sentence>,
    predictor: &Q,
    schema: &SchemaConfig,
    mode: MatchMode,
) -> Result<Vec<QaVerdict>, QaError> {
    let mut queries = Vec::with_capacity(instances.len() * 2);
    let mut expectations = Vec::with_capacity(instances.len());
    for inst in instances {
        let sentence = sentences
            .get(inst.sentence_id())
            .ok_or_else(|| QaError::UnknownSentence(inst.sentence_id().into()))?;
        let pair = instantiate(inst, schema)?;
        let context = sentence.text();
        queries.push(QaQuery {
            id: object_query_id(inst.instance_id()),
            question: pair.question_for_object.clone(),
            context: context.clone(),
        });
        queries.push(QaQuery {
            id: subject_query_id(inst.instance_id()),
            question: pair.question_for_subject.clone(),
            context,
        });
        let object_span = sentence.char_span(inst.object().start, inst.object().end);
        let subject_span = sentence.char_span(inst.subject().start, inst.subject().end);
        expectations.push((pair, object_span, subject_span));
    }
    if queries.is_empty() {
        return Ok(Vec::new());
    }
    let answers = predictor.answer_batch(&queries)?;
    let by_id: BTreeMap<&str, &QaAnswer> = answers.iter().map(|a| (a.id.as_str(), a)).collect();
    let missing: Vec<String> = queries
        .iter()
        .filter(|q| !by_id.contains_key(q.id.as_str()))
        .map(|q| q.id.clone())
        .collect();
    if !missing.is_empty() || by_id.len() != queries.len() || answers.len() != queries.len() {
        return Err(QaError::Predictor(PredictError::Missing(missing)));
    }
    Ok(expectations
        .into_iter()
        .map(|(pair, object_span, subject_span)| {
            let a1 = by_id[object_query_id(&pair.instance_id).as_str()];
            let a2 = by_id[subject_query_id(&pair.instance_id).as_str()];
            QaVerdict::new(
                pair.instance_id.clone(),
                span_matches(a1, &pair.expected_object, object_span, mode),
                span_matches(a2, &pair.expected_subject, subject_span, mode),
                [a1.answer.clone(), a2.answer.clone()],
            )
        })
        .collect())
}
