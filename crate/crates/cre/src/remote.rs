//! HTTP clients for model adapters.
//!
//! Relation classification: `POST {base}/v1/predict` with
//! `{"instances": [...]}`, answered by `{"predictions": [...]}`.
//! Extractive QA: `POST {base}/v1/qa` with `{"queries": [...]}`, answered by
//! `{"answers": [...]}`. Record layouts are in `docs/formats.md`.
//!
//! Requests are chunked, at most `max_in_flight` chunks are outstanding at a
//! time, and each chunk is retried on transport errors, 5xx, 408, 429 and
//! malformed bodies. A batch either fully succeeds or fails.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use cre_core::predict::{reassemble, PredictError, Prediction, Predictor};
use cre_core::qa::{QaAnswer, QaPredictor, QaQuery};
use cre_core::{CandidateInstance, SchemaConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::formats::{InstanceRecord, PredictionRecord, QaAnswerRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteOptions {
    pub batch_size: usize,
    pub max_in_flight: usize,
    /// Retries after the first attempt.
    pub retries: u32,
    #[serde(with = "millis")]
    pub timeout: Duration,
    /// First retry delay; doubles on each further retry.
    #[serde(with = "millis")]
    pub backoff: Duration,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions {
            batch_size: 64,
            max_in_flight: 4,
            retries: 3,
            timeout: Duration::from_secs(60),
            backoff: Duration::from_millis(200),
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictRequest {
    pub instances: Vec<InstanceRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictResponse {
    pub predictions: Vec<PredictionRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaRequest {
    pub queries: Vec<QaQuery>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QaResponse {
    pub answers: Vec<QaAnswerRecord>,
}

type ChunkSlot<R> = Option<Result<Vec<R>, PredictError>>;

#[derive(Clone)]
struct Client {
    base: String,
    agent: ureq::Agent,
    opts: RemoteOptions,
}

impl Client {
    fn new(base: &str, opts: RemoteOptions) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(opts.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Client {
            base: base.trim_end_matches('/').into(),
            agent,
            opts,
        }
    }

    /// POSTs `body` and validates the reply, retrying with backoff.
    fn call<Req, Resp, T>(
        &self,
        path: &str,
        body: &Req,
        validate: impl Fn(Resp) -> Result<T, PredictError>,
    ) -> Result<T, PredictError>
    where
        Req: Serialize,
        Resp: DeserializeOwned,
    {
        let url = format!("{}{path}", self.base);
        let attempts = self.opts.retries + 1;
        let transport = |attempts, message| PredictError::Transport { attempts, message };
        let mut last = transport(0, String::new());
        for attempt in 1..=attempts {
            match self.agent.post(&url).send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        let parsed = resp
                            .body_mut()
                            .with_config()
                            .limit(u64::MAX)
                            .read_json::<Resp>()
                            .map_err(|e| PredictError::Malformed(e.to_string()))
                            .and_then(&validate);
                        match parsed {
                            Ok(v) => return Ok(v),
                            Err(e) => last = e,
                        }
                    } else if (400..500).contains(&status) && status != 408 && status != 429 {
                        return Err(transport(attempt, format!("{url}: HTTP {status}")));
                    } else {
                        last = transport(attempt, format!("{url}: HTTP {status}"));
                    }
                }
                Err(e) => last = transport(attempt, format!("{url}: {e}")),
            }
            log::warn!("attempt {attempt}/{attempts} failed: {last}");
            if attempt < attempts {
                std::thread::sleep(self.opts.backoff * 2u32.saturating_pow(attempt - 1));
            }
        }
        // A body that stayed invalid reports its own error.
        Err(match last {
            PredictError::Transport { message, .. } => transport(attempts, message),
            other => other,
        })
    }

    /// Runs `f` over `batch_size` chunks with at most `max_in_flight` running
    /// at once. Results keep input order; the first failing chunk (by
    /// position) fails the whole call.
    fn chunked<T: Sync, R: Send>(
        &self,
        items: &[T],
        f: impl Fn(&[T]) -> Result<Vec<R>, PredictError> + Sync,
    ) -> Result<Vec<R>, PredictError> {
        let chunks: Vec<&[T]> = items.chunks(self.opts.batch_size.max(1)).collect();
        let slots: Mutex<Vec<ChunkSlot<R>>> = Mutex::new((0..chunks.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let workers = self.opts.max_in_flight.clamp(1, chunks.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= chunks.len() || failed.load(Ordering::SeqCst) {
                        break;
                    }
                    let result = f(chunks[i]);
                    if result.is_err() {
                        failed.store(true, Ordering::SeqCst);
                    }
                    slots.lock().expect("slot lock")[i] = Some(result);
                });
            }
        });
        let mut out = Vec::with_capacity(items.len());
        let slots = slots.into_inner().expect("slot lock");
        if let Some(err) = slots.iter().flatten().find_map(|r| r.as_ref().err()) {
            return Err(err.clone());
        }
        for slot in slots {
            out.extend(slot.expect("every chunk ran")?);
        }
        Ok(out)
    }
}

/// Relation classifier behind `POST /v1/predict`.
pub struct RemotePredictor {
    client: Client,
    id: String,
    tokens: Arc<BTreeMap<String, Vec<String>>>,
    schema: SchemaConfig,
}

impl RemotePredictor {
    /// `tokens` maps every sentence id that will be queried to its tokens.
    /// Predicted relations are checked against `schema`.
    pub fn new(
        base_url: &str,
        opts: RemoteOptions,
        tokens: Arc<BTreeMap<String, Vec<String>>>,
        schema: SchemaConfig,
    ) -> Self {
        RemotePredictor {
            client: Client::new(base_url, opts),
            id: format!("remote:{base_url}"),
            tokens,
            schema,
        }
    }

    /// CRE record shape without label, group or source; gold labels never
    /// leave the process.
    fn wire(&self, inst: &CandidateInstance) -> Result<InstanceRecord, PredictError> {
        let tokens = self.tokens.get(inst.sentence_id()).ok_or_else(|| {
            PredictError::Malformed(format!("no tokens for sentence `{}`", inst.sentence_id()))
        })?;
        Ok(InstanceRecord::from_instance(inst, tokens).without_label())
    }
}

impl Predictor for RemotePredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> Result<Vec<Prediction>, PredictError> {
        self.client.chunked(instances, |chunk| {
            let body = PredictRequest {
                instances: chunk
                    .iter()
                    .map(|i| self.wire(i))
                    .collect::<Result<_, _>>()?,
            };
            self.client
                .call("/v1/predict", &body, |resp: PredictResponse| {
                    let raws = resp
                        .predictions
                        .iter()
                        .map(|p| p.to_raw(&self.schema.no_relation_label, &self.id));
                    reassemble(chunk, raws, &self.schema, false)
                })
        })
    }
}

/// Extractive QA model behind `POST /v1/qa`.
pub struct RemoteQa {
    client: Client,
    id: String,
}

impl RemoteQa {
    pub fn new(base_url: &str, opts: RemoteOptions) -> Self {
        RemoteQa {
            client: Client::new(base_url, opts),
            id: format!("remote:{base_url}"),
        }
    }
}

/// Puts id-keyed answers back in query order; every query answered once.
pub fn order_answers(
    queries: &[QaQuery],
    answers: Vec<QaAnswer>,
) -> Result<Vec<QaAnswer>, PredictError> {
    let wanted: BTreeSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
    let mut by_id: BTreeMap<String, QaAnswer> = BTreeMap::new();
    for a in answers {
        if !wanted.contains(a.id.as_str()) {
            return Err(PredictError::Unexpected(a.id));
        }
        if by_id.contains_key(&a.id) {
            return Err(PredictError::Duplicate(a.id));
        }
        by_id.insert(a.id.clone(), a);
    }
    let missing: Vec<String> = queries
        .iter()
        .filter(|q| !by_id.contains_key(&q.id))
        .map(|q| q.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(PredictError::Missing(missing));
    }
    Ok(queries
        .iter()
        .map(|q| by_id.remove(&q.id).expect("checked"))
        .collect())
}

impl QaPredictor for RemoteQa {
    fn id(&self) -> &str {
        &self.id
    }

    fn answer_batch(&self, queries: &[QaQuery]) -> Result<Vec<QaAnswer>, PredictError> {
        self.client.chunked(queries, |chunk| {
            let body = QaRequest {
                queries: chunk.to_vec(),
            };
            self.client.call("/v1/qa", &body, |resp: QaResponse| {
                order_answers(
                    chunk,
                    resp.answers.iter().map(QaAnswerRecord::to_answer).collect(),
                )
            })
        })
    }
}
