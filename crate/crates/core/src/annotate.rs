//! Annotation state as a pure fold over an append-only event log.
//!
//! Everything the annotation service knows (per-annotator frontiers,
//! duplicates, adjudication) is derived from the ordered event list, so
//! replaying a persisted log reconstructs the exact same state.
//!
//! Adjudication uses a two-person panel per instance: the first two distinct
//! annotators to label it. Later annotators are recorded and counted in the
//! pairwise agreement rate but cannot flip an agreed label.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{dataset_stats, CorpusError, CreDataset, CreEntry, DatasetStats};
use crate::miner::Task;
use crate::schema::SchemaConfig;

/// Milliseconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub instance_id: String,
    pub annotator_id: String,
    pub label: bool,
    pub timestamp: Timestamp,
    pub guideline_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogEvent {
    Label(AnnotationRecord),
    /// Serves a conflicted task again to annotators who already labeled it.
    Reopen {
        instance_id: String,
        timestamp: Timestamp,
    },
    /// Manual resolution of a conflicted task.
    Resolve {
        instance_id: String,
        label: bool,
        resolver: String,
        timestamp: Timestamp,
    },
}

impl LogEvent {
    pub fn instance_id(&self) -> &str {
        match self {
            LogEvent::Label(r) => &r.instance_id,
            LogEvent::Reopen { instance_id, .. } | LogEvent::Resolve { instance_id, .. } => {
                instance_id
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotateError {
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("label must be 0 or 1, got {0}")]
    NonBinaryLabel(i64),
    #[error("annotator id is empty")]
    EmptyAnnotator,
    #[error("instance `{0}` is not conflicted")]
    NotConflicted(String),
}

pub fn parse_label(value: i64) -> Result<bool, AnnotateError> {
    match value {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(AnnotateError::NonBinaryLabel(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjudicationStatus {
    Agreed,
    Conflicted,
    Single,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicatedLabel {
    pub instance_id: String,
    /// Absent while conflicted.
    pub label: Option<bool>,
    pub status: AdjudicationStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjudication {
    pub labels: Vec<AdjudicatedLabel>,
    pub conflicts: Vec<String>,
    pub agreed: usize,
    pub conflicted: usize,
    pub single: usize,
    pub resolved: usize,
    pub unlabeled: usize,
    /// Agreed over agreed plus conflicted-or-resolved panels.
    pub panel_agreement: Option<f64>,
    /// Equal-label fraction over every unordered pair of annotators on every instance.
    pub pairwise_agreement: Option<f64>,
}

#[derive(Debug, Clone)]
struct Vote {
    label: bool,
    guideline_version: String,
    order: (Timestamp, usize),
    last_seq: usize,
}

#[derive(Debug, Clone, Default)]
struct InstanceState {
    votes: BTreeMap<String, Vote>,
    panel: Vec<String>,
    last_reopen: Option<usize>,
    resolution: Option<bool>,
}

impl InstanceState {
    fn panel_status(&self) -> Option<(AdjudicationStatus, Option<bool>)> {
        if let Some(label) = self.resolution {
            return Some((AdjudicationStatus::Resolved, Some(label)));
        }
        match self.panel.as_slice() {
            [] => None,
            [only] => Some((AdjudicationStatus::Single, Some(self.votes[only].label))),
            [a, b, ..] => {
                let (la, lb) = (self.votes[a].label, self.votes[b].label);
                if la == lb {
                    Some((AdjudicationStatus::Agreed, Some(la)))
                } else {
                    Some((AdjudicationStatus::Conflicted, None))
                }
            }
        }
    }

    fn done_for(&self, annotator: &str) -> bool {
        match (self.votes.get(annotator), self.last_reopen) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(v), Some(reopen)) => v.last_seq > reopen,
        }
    }
}

/// Outcome of checking a label submission against the current state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Submission {
    /// Must be persisted, then applied.
    Append(LogEvent),
    /// Same label as the annotator's current one; nothing to write.
    Duplicate,
}

/// Tasks plus the event log, with derived per-instance state.
#[derive(Debug, Clone)]
pub struct LabelLedger {
    tasks: Vec<Task>,
    index: BTreeMap<String, usize>,
    events: Vec<LogEvent>,
    state: Vec<InstanceState>,
}

impl LabelLedger {
    pub fn new(tasks: Vec<Task>) -> Self {
        let index = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.instance.instance_id().into(), i))
            .collect();
        let state = alloc::vec![InstanceState::default(); tasks.len()];
        LabelLedger {
            tasks,
            index,
            events: Vec::new(),
            state,
        }
    }

    pub fn replay(
        tasks: Vec<Task>,
        events: impl IntoIterator<Item = LogEvent>,
    ) -> Result<Self, AnnotateError> {
        let mut ledger = LabelLedger::new(tasks);
        for event in events {
            ledger.apply(event)?;
        }
        Ok(ledger)
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn task(&self, instance_id: &str) -> Option<&Task> {
        self.index.get(instance_id).map(|&i| &self.tasks[i])
    }

    fn slot(&self, instance_id: &str) -> Result<usize, AnnotateError> {
        self.index
            .get(instance_id)
            .copied()
            .ok_or_else(|| AnnotateError::UnknownInstance(instance_id.into()))
    }

    /// Folds one event into the derived state.
    pub fn apply(&mut self, event: LogEvent) -> Result<(), AnnotateError> {
        let slot = self.slot(event.instance_id())?;
        let seq = self.events.len();
        let st = &mut self.state[slot];
        match &event {
            LogEvent::Label(rec) => {
                if rec.annotator_id.is_empty() {
                    return Err(AnnotateError::EmptyAnnotator);
                }
                if !st.panel.contains(&rec.annotator_id) && st.panel.len() < 2 {
                    st.panel.push(rec.annotator_id.clone());
                }
                let order = (rec.timestamp, seq);
                match st.votes.get_mut(&rec.annotator_id) {
                    Some(vote) => {
                        if order > vote.order {
                            vote.label = rec.label;
                            vote.guideline_version = rec.guideline_version.clone();
                            vote.order = order;
                        }
                        vote.last_seq = seq;
                    }
                    None => {
                        st.votes.insert(
                            rec.annotator_id.clone(),
                            Vote {
                                label: rec.label,
                                guideline_version: rec.guideline_version.clone(),
                                order,
                                last_seq: seq,
                            },
                        );
                    }
                }
            }
            LogEvent::Reopen { .. } => st.last_reopen = Some(seq),
            LogEvent::Resolve { label, .. } => st.resolution = Some(*label),
        }
        self.events.push(event);
        Ok(())
    }

    /// Lowest-ordered task the annotator has not labeled since it was last reopened.
    pub fn next_task(&self, annotator_id: &str) -> Option<&Task> {
        self.tasks
            .iter()
            .zip(&self.state)
            .find(|(_, st)| !st.done_for(annotator_id))
            .map(|(t, _)| t)
    }

    pub fn check_label(&self, record: AnnotationRecord) -> Result<Submission, AnnotateError> {
        if record.annotator_id.is_empty() {
            return Err(AnnotateError::EmptyAnnotator);
        }
        let st = &self.state[self.slot(&record.instance_id)?];
        if let Some(v) = st.votes.get(&record.annotator_id) {
            if st.done_for(&record.annotator_id)
                && v.label == record.label
                && v.guideline_version == record.guideline_version
            {
                return Ok(Submission::Duplicate);
            }
        }
        Ok(Submission::Append(LogEvent::Label(record)))
    }

    fn require_conflicted(&self, instance_id: &str) -> Result<(), AnnotateError> {
        let st = &self.state[self.slot(instance_id)?];
        match st.panel_status() {
            Some((AdjudicationStatus::Conflicted, _)) => Ok(()),
            _ => Err(AnnotateError::NotConflicted(instance_id.into())),
        }
    }

    pub fn check_reopen(
        &self,
        instance_id: &str,
        timestamp: Timestamp,
    ) -> Result<LogEvent, AnnotateError> {
        self.require_conflicted(instance_id)?;
        Ok(LogEvent::Reopen {
            instance_id: instance_id.into(),
            timestamp,
        })
    }

    pub fn check_resolve(
        &self,
        instance_id: &str,
        label: bool,
        resolver: &str,
        timestamp: Timestamp,
    ) -> Result<LogEvent, AnnotateError> {
        self.require_conflicted(instance_id)?;
        Ok(LogEvent::Resolve {
            instance_id: instance_id.into(),
            label,
            resolver: resolver.into(),
            timestamp,
        })
    }

    /// Number of tasks the annotator has finished.
    pub fn progress(&self, annotator_id: &str) -> usize {
        self.state
            .iter()
            .filter(|st| st.done_for(annotator_id))
            .count()
    }

    pub fn annotators(&self) -> Vec<&str> {
        let mut all: Vec<&str> = self
            .state
            .iter()
            .flat_map(|st| st.votes.keys().map(String::as_str))
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn adjudicate(&self) -> Adjudication {
        let mut out = Adjudication {
            labels: Vec::new(),
            conflicts: Vec::new(),
            agreed: 0,
            conflicted: 0,
            single: 0,
            resolved: 0,
            unlabeled: 0,
            panel_agreement: None,
            pairwise_agreement: None,
        };
        let mut pairs = 0usize;
        let mut equal_pairs = 0usize;
        let mut full_panels = 0usize;
        for (task, st) in self.tasks.iter().zip(&self.state) {
            let labels: Vec<bool> = st.votes.values().map(|v| v.label).collect();
            for (i, a) in labels.iter().enumerate() {
                for b in &labels[i + 1..] {
                    pairs += 1;
                    equal_pairs += usize::from(a == b);
                }
            }
            if st.panel.len() >= 2 {
                full_panels += 1;
            }
            let Some((status, label)) = st.panel_status() else {
                out.unlabeled += 1;
                continue;
            };
            let id: String = task.instance.instance_id().into();
            match status {
                AdjudicationStatus::Agreed => out.agreed += 1,
                AdjudicationStatus::Conflicted => {
                    out.conflicted += 1;
                    out.conflicts.push(id.clone());
                }
                AdjudicationStatus::Single => out.single += 1,
                AdjudicationStatus::Resolved => out.resolved += 1,
            }
            out.labels.push(AdjudicatedLabel {
                instance_id: id,
                label,
                status,
            });
        }
        out.pairwise_agreement = (pairs > 0).then(|| equal_pairs as f64 / pairs as f64);
        let panel_agreed = self
            .state
            .iter()
            .filter(|st| {
                st.panel.len() >= 2 && st.votes[&st.panel[0]].label == st.votes[&st.panel[1]].label
            })
            .count();
        out.panel_agreement = (full_panels > 0).then(|| panel_agreed as f64 / full_panels as f64);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub dataset: CreDataset,
    pub stats: DatasetStats,
    pub included: usize,
    pub excluded_conflicted: usize,
    pub excluded_single: usize,
    pub excluded_unlabeled: usize,
}

/// Merges agreed and resolved labels into a challenge set; everything else
/// is counted and left out.
pub fn build_cre(
    adjudication: &Adjudication,
    tasks: &[Task],
    schema: &SchemaConfig,
) -> Result<BuildReport, CorpusError> {
    let by_id: BTreeMap<&str, &AdjudicatedLabel> = adjudication
        .labels
        .iter()
        .map(|l| (l.instance_id.as_str(), l))
        .collect();
    let mut entries = Vec::new();
    let (mut conflicted, mut single, mut unlabeled) = (0, 0, 0);
    for task in tasks {
        match by_id.get(task.instance.instance_id()) {
            Some(AdjudicatedLabel {
                label: Some(label),
                status: AdjudicationStatus::Agreed | AdjudicationStatus::Resolved,
                ..
            }) => entries.push(CreEntry {
                instance: task.instance.clone().with_gold(*label),
                group: task.group.clone(),
                tokens: task.tokens.clone(),
                source: task.source.clone(),
            }),
            Some(AdjudicatedLabel {
                status: AdjudicationStatus::Single,
                ..
            }) => single += 1,
            Some(_) => conflicted += 1,
            None => unlabeled += 1,
        }
    }
    let included = entries.len();
    let dataset = CreDataset::from_entries(entries)?;
    let stats = dataset_stats(&dataset, schema);
    Ok(BuildReport {
        dataset,
        stats,
        included,
        excluded_conflicted: conflicted,
        excluded_single: single,
        excluded_unlabeled: unlabeled,
    })
}
