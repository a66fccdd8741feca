//! On-disk record layouts and their readers and writers.
//!
//! Line-oriented files are JSON Lines with LF endings; blank lines are
//! skipped on read. Field order on write is fixed by struct declaration
//! order, so identical inputs always produce identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use cre_core::annotate::AnnotateError;
use cre_core::corpus::{CreEntry, TacredRecord};
use cre_core::miner::{SampledBatch, Task};
use cre_core::predict::{Prediction, RawPrediction};
use cre_core::qa::QaAnswer;
use cre_core::{CandidateInstance, CreDataset, EntityMention, EntityType, Sentence};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive token span with its entity type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanRecord {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub etype: String,
}

impl SpanRecord {
    fn of(m: &EntityMention) -> Self {
        SpanRecord {
            start: m.start,
            end: m.end,
            etype: m.etype.as_str().into(),
        }
    }

    fn mention(
        &self,
        tokens: &[String],
        record: &str,
    ) -> Result<EntityMention, cre_core::corpus::CorpusError> {
        EntityMention::from_tokens(
            tokens,
            self.start,
            self.end,
            EntityType::new(self.etype.clone()),
            record,
        )
    }
}

/// One candidate instance with its sentence tokens.
///
/// The same layout serves three files: enumerated candidates (no label, no
/// group), annotation tasks (`task_index` and `group`, no label) and the
/// challenge set itself (`label`, `group` and `source` all present).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_index: Option<usize>,
    pub instance_id: String,
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub subj: SpanRecord,
    pub obj: SpanRecord,
    pub relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl InstanceRecord {
    pub fn from_instance(inst: &CandidateInstance, tokens: &[String]) -> Self {
        InstanceRecord {
            task_index: None,
            instance_id: inst.instance_id().into(),
            sentence_id: inst.sentence_id().into(),
            tokens: tokens.to_vec(),
            subj: SpanRecord::of(inst.subject()),
            obj: SpanRecord::of(inst.object()),
            relation: inst.relation().into(),
            label: inst.gold().map(i64::from),
            group: None,
            source: None,
        }
    }

    pub fn from_entry(entry: &CreEntry) -> Self {
        InstanceRecord {
            group: Some(entry.group.clone()),
            source: Some(entry.source.clone()),
            ..Self::from_instance(&entry.instance, &entry.tokens)
        }
    }

    pub fn from_task(task: &Task) -> Self {
        InstanceRecord {
            task_index: Some(task.task_index),
            group: Some(task.group.clone()),
            source: Some(task.source.clone()),
            ..Self::from_instance(&task.instance, &task.tokens)
        }
        .without_label()
    }

    pub fn without_label(mut self) -> Self {
        self.label = None;
        self
    }

    /// Rebuilds the instance and checks the stored id. The label, if any,
    /// must be 0 or 1.
    pub fn to_instance(&self) -> std::result::Result<CandidateInstance, String> {
        let subj = self
            .subj
            .mention(&self.tokens, &self.instance_id)
            .map_err(|e| e.to_string())?;
        let obj = self
            .obj
            .mention(&self.tokens, &self.instance_id)
            .map_err(|e| e.to_string())?;
        let inst =
            CandidateInstance::new(self.sentence_id.clone(), subj, obj, self.relation.clone())
                .map_err(|e| e.to_string())?;
        inst.check_id(&self.instance_id)
            .map_err(|e| e.to_string())?;
        match self.label {
            None => Ok(inst),
            Some(v) => {
                let label =
                    cre_core::annotate::parse_label(v).map_err(|e: AnnotateError| e.to_string())?;
                Ok(inst.with_gold(label))
            }
        }
    }

    pub fn to_entry(&self) -> std::result::Result<CreEntry, String> {
        let instance = self.to_instance()?;
        if instance.gold().is_none() {
            return Err("missing field `label`".into());
        }
        Ok(CreEntry {
            instance,
            group: self.group.clone().ok_or("missing field `group`")?,
            tokens: self.tokens.clone(),
            source: self.source.clone().unwrap_or_default(),
        })
    }

    pub fn to_task(&self) -> std::result::Result<Task, String> {
        Ok(Task {
            task_index: self.task_index.ok_or("missing field `task_index`")?,
            group: self.group.clone().ok_or("missing field `group`")?,
            instance: self.to_instance()?.without_gold(),
            tokens: self.tokens.clone(),
            source: self.source.clone().unwrap_or_default(),
        })
    }
}

/// A sentence with its typed mentions, the mining input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<SpanRecord>,
    #[serde(default)]
    pub source: String,
}

impl SentenceRecord {
    pub fn from_sentence(s: &Sentence) -> Self {
        SentenceRecord {
            sentence_id: s.sentence_id.clone(),
            tokens: s.tokens.clone(),
            mentions: s.mentions.iter().map(SpanRecord::of).collect(),
            source: s.source.clone(),
        }
    }

    pub fn to_sentence(&self) -> std::result::Result<Sentence, String> {
        Sentence::new(
            self.sentence_id.clone(),
            self.tokens.clone(),
            self.mentions
                .iter()
                .map(|m| (m.start, m.end, EntityType::new(m.etype.clone()))),
            self.source.clone(),
        )
        .map_err(|e| e.to_string())
    }
}

/// A multi-class answer for one instance. `predicted_relation` may be null or
/// the no-relation label; both mean "no relation".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub predicted_relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default)]
    pub predictor_id: String,
}

impl PredictionRecord {
    pub fn to_raw(&self, no_relation_label: &str, default_predictor: &str) -> RawPrediction {
        RawPrediction {
            instance_id: self.instance_id.clone(),
            predicted_relation: self
                .predicted_relation
                .clone()
                .filter(|r| r != no_relation_label),
            predictor_id: if self.predictor_id.is_empty() {
                default_predictor.into()
            } else {
                self.predictor_id.clone()
            },
            score: self.score,
        }
    }

    pub fn from_prediction(p: &Prediction, no_relation_label: &str) -> Self {
        PredictionRecord {
            instance_id: p.instance_id.clone(),
            predicted_relation: Some(
                p.predicted_relation
                    .clone()
                    .unwrap_or_else(|| no_relation_label.into()),
            ),
            score: p.score,
            predictor_id: p.predictor_id.clone(),
        }
    }
}

/// Abstention marker accepted in QA answers besides null and "".
pub const NO_ANSWER: &str = "NO_ANSWER";

/// An extractive QA answer. `start`/`end` are character offsets `[start, end)`
/// into the context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaAnswerRecord {
    pub id: String,
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
}

impl QaAnswerRecord {
    pub fn to_answer(&self) -> QaAnswer {
        let answer = self
            .answer
            .clone()
            .filter(|a| !a.trim().is_empty() && a != NO_ANSWER);
        QaAnswer {
            span: match (&answer, self.start, self.end) {
                (Some(_), Some(s), Some(e)) => Some((s, e)),
                _ => None,
            },
            id: self.id.clone(),
            answer,
            score: self.score,
        }
    }

    pub fn from_answer(a: &QaAnswer) -> Self {
        QaAnswerRecord {
            id: a.id.clone(),
            answer: a.answer.clone(),
            score: a.score,
            start: a.span.map(|s| s.0),
            end: a.span.map(|s| s.1),
        }
    }
}

/// The output of `sample`: the seed, the requested size and each relation's batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFile {
    pub rng_seed: u64,
    pub per_relation: usize,
    pub relations: BTreeMap<String, SampledBatch>,
}

// ---------------------------------------------------------------------------
// generic readers and writers

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads JSON Lines, reporting the 1-based line of the first bad record.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::record(path, i + 1, e))?);
    }
    Ok(out)
}

/// Reads JSON Lines and converts each record, keeping line numbers in errors.
pub fn read_jsonl_with<R, T>(
    path: &Path,
    convert: impl Fn(&R) -> std::result::Result<T, String>,
) -> Result<Vec<T>>
where
    R: DeserializeOwned,
{
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: R = serde_json::from_str(&line).map_err(|e| Error::record(path, i + 1, e))?;
        out.push(convert(&rec).map_err(|e| Error::record(path, i + 1, e))?);
    }
    Ok(out)
}

pub fn jsonl_string<T: Serialize>(records: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, &r).expect("record serializes");
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let reader = BufReader::new(open(path)?);
    serde_json::from_reader(reader).map_err(|e| Error::record(path, e.line(), e))
}

/// Pretty JSON with a trailing newline.
pub fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, json_string(value)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// typed files

/// Loads a challenge set, verifying every stored instance id.
pub fn load_cre(path: &Path) -> Result<CreDataset> {
    let entries = read_jsonl_with(path, InstanceRecord::to_entry)?;
    Ok(CreDataset::from_entries(entries)?)
}

pub fn cre_jsonl(cre: &CreDataset) -> String {
    jsonl_string(cre.entries().map(|e| InstanceRecord::from_entry(&e)))
}

pub fn write_cre(path: &Path, cre: &CreDataset) -> Result<()> {
    write_jsonl(path, cre.entries().map(|e| InstanceRecord::from_entry(&e)))
}

pub fn load_tasks(path: &Path) -> Result<Vec<Task>> {
    let tasks = read_jsonl_with(path, InstanceRecord::to_task)?;
    let mut seen = std::collections::BTreeSet::new();
    for (i, t) in tasks.iter().enumerate() {
        if !seen.insert(t.instance.instance_id()) {
            return Err(Error::record(
                path,
                i + 1,
                format!("duplicate instance id `{}`", t.instance.instance_id()),
            ));
        }
    }
    Ok(tasks)
}

pub fn write_tasks(path: &Path, tasks: &[Task]) -> Result<()> {
    write_jsonl(path, tasks.iter().map(InstanceRecord::from_task))
}

/// Loads a sentence corpus; sentence ids must be unique.
pub fn load_corpus(path: &Path) -> Result<Vec<Sentence>> {
    let sentences = read_jsonl_with(path, SentenceRecord::to_sentence)?;
    let mut seen = std::collections::BTreeSet::new();
    for (i, s) in sentences.iter().enumerate() {
        if !seen.insert(s.sentence_id.as_str()) {
            return Err(Error::record(
                path,
                i + 1,
                format!("duplicate sentence id `{}`", s.sentence_id),
            ));
        }
    }
    Ok(sentences)
}

pub fn write_corpus(path: &Path, sentences: &[Sentence]) -> Result<()> {
    write_jsonl(path, sentences.iter().map(SentenceRecord::from_sentence))
}

/// Loads a prediction file into id-keyed raw answers. Duplicate ids are an error.
pub fn load_predictions(
    path: &Path,
    no_relation_label: &str,
) -> Result<BTreeMap<String, RawPrediction>> {
    let default_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let reader = BufReader::new(open(path)?);
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| Error::record(path, i + 1, e))?;
        let raw = rec.to_raw(no_relation_label, &default_id);
        if out.insert(raw.instance_id.clone(), raw).is_some() {
            return Err(Error::record(
                path,
                i + 1,
                format!("duplicate instance id `{}`", rec.instance_id),
            ));
        }
    }
    Ok(out)
}

pub fn write_predictions(
    path: &Path,
    predictions: &[Prediction],
    no_relation_label: &str,
) -> Result<()> {
    write_jsonl(
        path,
        predictions
            .iter()
            .map(|p| PredictionRecord::from_prediction(p, no_relation_label)),
    )
}

pub fn load_qa_answers(path: &Path) -> Result<BTreeMap<String, QaAnswer>> {
    let records: Vec<QaAnswerRecord> = read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        if out.insert(rec.id.clone(), rec.to_answer()).is_some() {
            return Err(Error::record(
                path,
                i + 1,
                format!("duplicate query id `{}`", rec.id),
            ));
        }
    }
    Ok(out)
}

/// Loads TACRED records from a JSON array (the public layout) or JSON Lines.
/// Unknown fields are ignored. Errors name the record index and the field.
pub fn load_tacred(path: &Path) -> Result<Vec<TacredRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tacred(&text, path)
}

pub fn parse_tacred(text: &str, origin: &Path) -> Result<Vec<TacredRecord>> {
    // (position reported in errors, value): the line for JSONL, the 1-based
    // record number for an array.
    let values: Vec<(usize, serde_json::Value)> = if text.trim_start().starts_with('[') {
        let array: Vec<serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::record(origin, e.line(), e))?;
        array
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i + 1, v))
            .collect()
    } else {
        let mut vs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v = serde_json::from_str(line).map_err(|e| Error::record(origin, i + 1, e))?;
            vs.push((i + 1, v));
        }
        vs
    };
    values
        .into_iter()
        .enumerate()
        .map(|(i, (pos, v))| {
            let n = i + 1;
            let rec: TacredRecord = serde_json::from_value(v)
                .map_err(|e| Error::record(origin, pos, format!("record {n}: {e}")))?;
            rec.to_instance()
                .map_err(|e| Error::record(origin, pos, format!("record {n}: {e}")))?;
            Ok(rec)
        })
        .collect()
}

/// Writes TACRED records as a JSON array, the layout TACRED trainers expect.
pub fn write_tacred(path: &Path, records: &[TacredRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, records).expect("records serialize");
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
