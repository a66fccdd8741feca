//! Sentences, entity mentions and classification instances.
//!
//! Spans are token-level with an inclusive end, the layout used by TACRED.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::{EntityType, SchemaConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("{record}: sentence has no tokens")]
    EmptySentence { record: String },
    #[error("{record}: span {start}..={end} invalid for sentence of {len} tokens")]
    SpanOutOfBounds {
        record: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("{record}: subject and object are the same span")]
    IdenticalArguments { record: String },
    #[error("{record}: instance id does not match its contents")]
    IdMismatch { record: String },
    #[error("duplicate instance id `{0}`")]
    DuplicateInstance(String),
    #[error("duplicate sentence id `{0}`")]
    DuplicateSentence(String),
    #[error("instance `{instance}` has relation `{relation}` but is filed under group `{group}`")]
    GroupMismatch {
        instance: String,
        relation: String,
        group: String,
    },
    #[error("instance `{0}` carries no gold label")]
    MissingGold(String),
    #[error("sentence `{0}` appears with different tokens")]
    InconsistentSentence(String),
    #[error("instance `{instance}` is not a candidate of sentence `{sentence}`")]
    NotInSentence { instance: String, sentence: String },
    #[error("unknown sentence `{0}`")]
    UnknownSentence(String),
}

/// Typed token span inside a sentence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub start: usize,
    pub end: usize,
    pub etype: EntityType,
    /// `tokens[start..=end]` joined by single spaces.
    pub surface: String,
}

impl EntityMention {
    pub fn from_tokens(
        tokens: &[String],
        start: usize,
        end: usize,
        etype: EntityType,
        record: &str,
    ) -> Result<Self, CorpusError> {
        if start > end || end >= tokens.len() {
            return Err(CorpusError::SpanOutOfBounds {
                record: record.into(),
                start,
                end,
                len: tokens.len(),
            });
        }
        Ok(EntityMention {
            start,
            end,
            etype,
            surface: tokens[start..=end].join(" "),
        })
    }

    pub fn span(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn overlaps(&self, other: &EntityMention) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<EntityMention>,
    pub source: String,
}

impl Sentence {
    /// Builds a sentence from raw `(start, end, type)` mention spans.
    pub fn new(
        sentence_id: impl Into<String>,
        tokens: Vec<String>,
        spans: impl IntoIterator<Item = (usize, usize, EntityType)>,
        source: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let sentence_id = sentence_id.into();
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence {
                record: sentence_id,
            });
        }
        let mut mentions = Vec::new();
        for (start, end, etype) in spans {
            let m = EntityMention::from_tokens(&tokens, start, end, etype, &sentence_id)?;
            if !mentions.contains(&m) {
                mentions.push(m);
            }
        }
        Ok(Sentence {
            sentence_id,
            tokens,
            mentions,
            source: source.into(),
        })
    }

    /// Whitespace-joined sentence text, the context handed to QA models.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Character offsets `[begin, end)` of a token span inside [`Sentence::text`].
    pub fn char_span(&self, start: usize, end: usize) -> (usize, usize) {
        let offset = |i: usize| -> usize {
            self.tokens[..i]
                .iter()
                .map(|t| t.chars().count())
                .sum::<usize>()
                + i
        };
        let begin = offset(start);
        let stop = offset(end) + self.tokens[end].chars().count();
        (begin, stop)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Stable id for a `(sentence, subject span, object span, relation)` tuple.
pub fn instance_id(
    sentence_id: &str,
    subject: (usize, usize),
    object: (usize, usize),
    relation: &str,
) -> String {
    let mut hasher = Sha256::new();
    let key = format!(
        "{sentence_id}\u{1f}{}:{}\u{1f}{}:{}\u{1f}{relation}",
        subject.0, subject.1, object.0, object.1
    );
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(32);
    for byte in digest.iter().take(16) {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// The binary decision unit `(s, e1, e2, r)` with an optional gold label.
///
/// The id is derived from the other fields on construction and the fields are
/// read-only afterwards, so the two can never drift apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateInstance {
    instance_id: String,
    sentence_id: String,
    subject: EntityMention,
    object: EntityMention,
    relation: String,
    gold: Option<bool>,
}

impl CandidateInstance {
    pub fn new(
        sentence_id: impl Into<String>,
        subject: EntityMention,
        object: EntityMention,
        relation: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let sentence_id = sentence_id.into();
        let relation = relation.into();
        if subject.span() == object.span() {
            return Err(CorpusError::IdenticalArguments {
                record: sentence_id,
            });
        }
        Ok(CandidateInstance {
            instance_id: instance_id(&sentence_id, subject.span(), object.span(), &relation),
            sentence_id,
            subject,
            object,
            relation,
            gold: None,
        })
    }

    pub fn with_gold(mut self, gold: bool) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn without_gold(mut self) -> Self {
        self.gold = None;
        self
    }

    pub fn instance_id(&self) -> &str {
        &self.instance_id
    }

    pub fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    pub fn subject(&self) -> &EntityMention {
        &self.subject
    }

    pub fn object(&self) -> &EntityMention {
        &self.object
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn gold(&self) -> Option<bool> {
        self.gold
    }

    /// Checks a stored id against the recomputed one.
    pub fn check_id(&self, stored: &str) -> Result<(), CorpusError> {
        if stored == self.instance_id {
            Ok(())
        } else {
            Err(CorpusError::IdMismatch {
                record: stored.into(),
            })
        }
    }

    /// True when the two instances have a mention span in common, in either role.
    pub fn shares_argument(&self, other: &CandidateInstance) -> bool {
        let mine = [self.subject.span(), self.object.span()];
        let theirs = [other.subject.span(), other.object.span()];
        mine.iter().any(|s| theirs.contains(s))
    }

    pub fn type_signature(&self) -> (&EntityType, &EntityType) {
        (&self.subject.etype, &self.object.etype)
    }
}

/// A pair labeled with a single multi-class relation (or the no-relation
/// label), as found in TACRED.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MulticlassInstance {
    pub id: String,
    pub sentence_id: String,
    pub subject: EntityMention,
    pub object: EntityMention,
    pub label: String,
}

/// One record of the public TACRED JSON layout. Unknown fields are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacredRecord {
    pub id: String,
    pub relation: String,
    pub token: Vec<String>,
    pub subj_start: usize,
    pub subj_end: usize,
    pub obj_start: usize,
    pub obj_end: usize,
    pub subj_type: String,
    pub obj_type: String,
}

impl TacredRecord {
    pub fn to_instance(&self) -> Result<(Sentence, MulticlassInstance), CorpusError> {
        let sentence = Sentence::new(
            self.id.clone(),
            self.token.clone(),
            [
                (
                    self.subj_start,
                    self.subj_end,
                    EntityType::new(self.subj_type.clone()),
                ),
                (
                    self.obj_start,
                    self.obj_end,
                    EntityType::new(self.obj_type.clone()),
                ),
            ],
            "tacred",
        )?;
        let subject = EntityMention::from_tokens(
            &self.token,
            self.subj_start,
            self.subj_end,
            EntityType::new(self.subj_type.clone()),
            &self.id,
        )?;
        let object = EntityMention::from_tokens(
            &self.token,
            self.obj_start,
            self.obj_end,
            EntityType::new(self.obj_type.clone()),
            &self.id,
        )?;
        let instance = MulticlassInstance {
            id: self.id.clone(),
            sentence_id: self.id.clone(),
            subject,
            object,
            label: self.relation.clone(),
        };
        Ok((sentence, instance))
    }
}

/// Every type-compatible candidate in a sentence.
///
/// Ordered pairs of distinct, non-overlapping mentions crossed with each
/// compatible relation; sorted by subject start, object start, relation.
pub fn enumerate_pairs(sentence: &Sentence, schema: &SchemaConfig) -> Vec<CandidateInstance> {
    let mut out: Vec<CandidateInstance> = Vec::new();
    for (i, a) in sentence.mentions.iter().enumerate() {
        for (j, b) in sentence.mentions.iter().enumerate() {
            if i == j || a.overlaps(b) {
                continue;
            }
            for relation in schema.compatible_relations(&a.etype, &b.etype) {
                if let Ok(inst) = CandidateInstance::new(
                    sentence.sentence_id.clone(),
                    a.clone(),
                    b.clone(),
                    relation,
                ) {
                    out.push(inst);
                }
            }
        }
    }
    out.sort_by(|x, y| {
        (
            x.subject.start,
            x.object.start,
            x.relation.as_str(),
            x.subject.end,
            x.object.end,
        )
            .cmp(&(
                y.subject.start,
                y.object.start,
                y.relation.as_str(),
                y.subject.end,
                y.object.end,
            ))
            .then_with(|| x.type_signature().cmp(&y.type_signature()))
    });
    let mut seen = BTreeSet::new();
    out.retain(|inst| seen.insert(inst.instance_id.clone()));
    out
}

/// Every other candidate in the sentence with the same argument types and
/// relation as `annotated`.
pub fn expand_confusion_set(
    sentence: &Sentence,
    annotated: &CandidateInstance,
    schema: &SchemaConfig,
) -> Result<Vec<CandidateInstance>, CorpusError> {
    let candidates = enumerate_pairs(sentence, schema);
    if annotated.sentence_id != sentence.sentence_id
        || !candidates
            .iter()
            .any(|c| c.instance_id == annotated.instance_id)
    {
        return Err(CorpusError::NotInSentence {
            instance: annotated.instance_id.clone(),
            sentence: sentence.sentence_id.clone(),
        });
    }
    Ok(candidates
        .into_iter()
        .filter(|c| {
            c.instance_id != annotated.instance_id
                && c.relation == annotated.relation
                && c.type_signature() == annotated.type_signature()
        })
        .collect())
}

/// One labeled challenge-set record before it is folded into a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreEntry {
    pub instance: CandidateInstance,
    pub group: String,
    pub tokens: Vec<String>,
    pub source: String,
}

/// Challenge set: binary-labeled instances organized in per-relation groups.
///
/// Sentence mentions are the union of the argument spans of the sentence's
/// instances, which keeps export followed by load lossless.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CreDataset {
    groups: BTreeMap<String, Vec<String>>,
    sentences: BTreeMap<String, Sentence>,
    instances: Vec<CandidateInstance>,
}

impl CreDataset {
    pub fn from_entries(entries: impl IntoIterator<Item = CreEntry>) -> Result<Self, CorpusError> {
        let mut ds = CreDataset::default();
        let mut ids = BTreeSet::new();
        for entry in entries {
            let inst = entry.instance;
            if inst.gold.is_none() {
                return Err(CorpusError::MissingGold(inst.instance_id));
            }
            if inst.relation != entry.group {
                return Err(CorpusError::GroupMismatch {
                    instance: inst.instance_id,
                    relation: inst.relation,
                    group: entry.group,
                });
            }
            if !ids.insert(inst.instance_id.clone()) {
                return Err(CorpusError::DuplicateInstance(inst.instance_id));
            }
            let sentence = ds
                .sentences
                .entry(inst.sentence_id.clone())
                .or_insert_with(|| Sentence {
                    sentence_id: inst.sentence_id.clone(),
                    tokens: entry.tokens.clone(),
                    mentions: Vec::new(),
                    source: entry.source.clone(),
                });
            if sentence.tokens != entry.tokens {
                return Err(CorpusError::InconsistentSentence(inst.sentence_id));
            }
            for m in [&inst.subject, &inst.object] {
                if m.end >= sentence.tokens.len()
                    || sentence.tokens[m.start..=m.end].join(" ") != m.surface
                {
                    return Err(CorpusError::SpanOutOfBounds {
                        record: inst.instance_id.clone(),
                        start: m.start,
                        end: m.end,
                        len: sentence.tokens.len(),
                    });
                }
                if !sentence.mentions.contains(m) {
                    sentence.mentions.push(m.clone());
                }
            }
            let group = ds.groups.entry(entry.group).or_default();
            if !group.contains(&inst.sentence_id) {
                group.push(inst.sentence_id.clone());
            }
            ds.instances.push(inst);
        }
        for sentence in ds.sentences.values_mut() {
            sentence.mentions.sort();
        }
        Ok(ds)
    }

    pub fn instances(&self) -> &[CandidateInstance] {
        &self.instances
    }

    pub fn sentence(&self, sentence_id: &str) -> Option<&Sentence> {
        self.sentences.get(sentence_id)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.sentences.values()
    }

    pub fn group_names(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    /// Sentences of one relation group, in first-appearance order.
    pub fn group(&self, relation: &str) -> impl Iterator<Item = &Sentence> {
        self.groups
            .get(relation)
            .into_iter()
            .flatten()
            .filter_map(|id| self.sentences.get(id))
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Entries in dataset order, ready for serialization.
    pub fn entries(&self) -> impl Iterator<Item = CreEntry> + '_ {
        self.instances.iter().map(|inst| {
            let sentence = &self.sentences[inst.sentence_id()];
            CreEntry {
                instance: inst.clone(),
                group: inst.relation.clone(),
                tokens: sentence.tokens.clone(),
                source: sentence.source.clone(),
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
}

/// Summary statistics of a challenge set.
///
/// A "sentence" here is a (group, sentence) unit: a sentence filed under two
/// relation groups counts twice. Fractions are in `[0, 1]` and `None` when
/// the dataset is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub groups: usize,
    pub sentences: usize,
    pub distinct_sentences: usize,
    pub instances: usize,
    pub positive: usize,
    pub negative: usize,
    pub per_relation: BTreeMap<String, LabelCounts>,
    pub mean_pairs_per_sentence: Option<f64>,
    /// Some relation has both a gold-1 and a gold-0 instance in the sentence.
    pub conflicting_label_fraction: Option<f64>,
    /// Some two instances of the sentence have a mention in common.
    pub shared_argument_fraction: Option<f64>,
    pub mean_sentence_tokens: Option<f64>,
    /// Sentences with more than one distinct annotated mention pair.
    pub multi_pair_sentence_fraction: Option<f64>,
    /// Annotated mention pairs over type-compatible mention pairs.
    pub annotated_pair_fraction: Option<f64>,
}

type SpanPair = ((usize, usize), (usize, usize));

pub fn dataset_stats(d: &CreDataset, schema: &SchemaConfig) -> DatasetStats {
    let mut per_relation: BTreeMap<String, LabelCounts> = BTreeMap::new();
    let mut units: BTreeMap<(&str, &str), Vec<&CandidateInstance>> = BTreeMap::new();
    for inst in &d.instances {
        let counts = per_relation.entry(inst.relation.clone()).or_default();
        if inst.gold == Some(true) {
            counts.positive += 1;
        } else {
            counts.negative += 1;
        }
        units
            .entry((inst.relation.as_str(), inst.sentence_id.as_str()))
            .or_default()
            .push(inst);
    }
    let positive = per_relation.values().map(|c| c.positive).sum();
    let negative = per_relation.values().map(|c| c.negative).sum();

    let n = units.len();
    let frac = |k: usize| (n > 0).then(|| k as f64 / n as f64);
    let conflicting = units
        .values()
        .filter(|insts| {
            insts.iter().any(|i| i.gold == Some(true))
                && insts.iter().any(|i| i.gold == Some(false))
        })
        .count();
    let shared = units
        .values()
        .filter(|insts| {
            insts
                .iter()
                .enumerate()
                .any(|(i, a)| insts[i + 1..].iter().any(|b| a.shares_argument(b)))
        })
        .count();
    let mut token_total = 0usize;
    for (_, sid) in units.keys() {
        token_total += d.sentences[*sid].tokens.len();
    }

    // Mention-pair level quantities ignore the relation dimension.
    let mut annotated_pairs: BTreeMap<&str, BTreeSet<SpanPair>> = BTreeMap::new();
    for inst in &d.instances {
        annotated_pairs
            .entry(inst.sentence_id.as_str())
            .or_default()
            .insert((inst.subject.span(), inst.object.span()));
    }
    let multi_pair = units
        .values()
        .filter(|insts| {
            let pairs: BTreeSet<_> = insts
                .iter()
                .map(|i| (i.subject.span(), i.object.span()))
                .collect();
            pairs.len() > 1
        })
        .count();
    let mut compatible_total = 0usize;
    let mut annotated_total = 0usize;
    for sentence in d.sentences.values() {
        let compatible: BTreeSet<_> = enumerate_pairs(sentence, schema)
            .iter()
            .map(|c| (c.subject.span(), c.object.span()))
            .collect();
        compatible_total += compatible.len();
        if let Some(pairs) = annotated_pairs.get(sentence.sentence_id.as_str()) {
            annotated_total += pairs.intersection(&compatible).count();
        }
    }

    DatasetStats {
        groups: d.groups.len(),
        sentences: n,
        distinct_sentences: d.sentences.len(),
        instances: d.instances.len(),
        positive,
        negative,
        per_relation,
        mean_pairs_per_sentence: (n > 0).then(|| d.instances.len() as f64 / n as f64),
        conflicting_label_fraction: frac(conflicting),
        shared_argument_fraction: frac(shared),
        mean_sentence_tokens: (n > 0).then(|| token_total as f64 / n as f64),
        multi_pair_sentence_fraction: frac(multi_pair),
        annotated_pair_fraction: (compatible_total > 0)
            .then(|| annotated_total as f64 / compatible_total as f64),
    }
}
