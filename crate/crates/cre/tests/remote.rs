mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use common::*;
use cre::cre_core::predict::PredictError;
use cre::cre_core::qa::{qa_classify, MatchMode, QaPredictor, QaQuery};
use cre::cre_core::{Predictor, Sentence};
use cre::formats::{PredictionRecord, QaAnswerRecord, NO_ANSWER};
use cre::remote::{
    PredictRequest, PredictResponse, QaRequest, QaResponse, RemotePredictor, RemoteQa,
};

#[derive(Default)]
struct Stub {
    calls: AtomicUsize,
    /// Scripted failures for the first calls: 500, then a malformed body.
    flaky: bool,
    saw_label: Mutex<bool>,
    seen: Mutex<BTreeMap<String, usize>>,
}

/// Positive iff the subject token sorts before the object token.
fn rule(tokens: &[String], subj: usize, obj: usize) -> bool {
    tokens[subj] < tokens[obj]
}

async fn predict(State(stub): State<Arc<Stub>>, body: String) -> Response {
    let n = stub.calls.fetch_add(1, Ordering::SeqCst);
    if stub.flaky && n == 0 {
        return StatusCode::INTERNAL_SERVER_ERROR.into_response();
    }
    if stub.flaky && n == 1 {
        return (StatusCode::OK, "{\"predictions\": [").into_response();
    }
    let req: PredictRequest = serde_json::from_str(&body).unwrap();
    let mut preds = Vec::new();
    for r in &req.instances {
        if r.label.is_some() {
            *stub.saw_label.lock().unwrap() = true;
        }
        *stub
            .seen
            .lock()
            .unwrap()
            .entry(r.instance_id.clone())
            .or_default() += 1;
        preds.push(PredictionRecord {
            instance_id: r.instance_id.clone(),
            predicted_relation: Some(if rule(&r.tokens, r.subj.start, r.obj.start) {
                r.relation.clone()
            } else {
                "no_relation".into()
            }),
            score: Some(0.5),
            predictor_id: "stub".into(),
        });
    }
    preds.reverse();
    Json(PredictResponse { predictions: preds }).into_response()
}

async fn predict_with_stranger(Json(req): Json<PredictRequest>) -> Json<PredictResponse> {
    let mut preds: Vec<PredictionRecord> = req
        .instances
        .iter()
        .map(|r| PredictionRecord {
            instance_id: r.instance_id.clone(),
            predicted_relation: None,
            score: None,
            predictor_id: String::new(),
        })
        .collect();
    preds.push(PredictionRecord {
        instance_id: "stranger".into(),
        predicted_relation: None,
        score: None,
        predictor_id: String::new(),
    });
    Json(PredictResponse { predictions: preds })
}

async fn bad_request() -> StatusCode {
    StatusCode::BAD_REQUEST
}

/// Answers the object question with the first context token, abstains on
/// the subject question.
async fn qa(Json(req): Json<QaRequest>) -> Json<QaResponse> {
    let mut answers: Vec<QaAnswerRecord> = req
        .queries
        .iter()
        .map(|q| QaAnswerRecord {
            id: q.id.clone(),
            answer: Some(if q.id.ends_with("#q1") {
                q.context.split_whitespace().next().unwrap().to_string()
            } else {
                NO_ANSWER.to_string()
            }),
            score: None,
            start: None,
            end: None,
        })
        .collect();
    answers.rotate_left(1);
    Json(QaResponse { answers })
}

fn hundred() -> (Vec<Sentence>, Vec<cre::cre_core::CandidateInstance>) {
    let schema = schema();
    let sentences: Vec<Sentence> = (0..20).map(people_sentence).collect();
    let all = candidates(&sentences, &schema);
    assert!(all.len() >= 100);
    (sentences, all.into_iter().take(100).collect())
}

#[test]
fn remote_predictions_are_bijective_and_ordered() {
    let stub = Arc::new(Stub::default());
    let url = spawn(
        Router::new()
            .route("/v1/predict", post(predict))
            .with_state(stub.clone()),
    );
    let (sentences, instances) = hundred();
    let labeled: Vec<_> = instances
        .iter()
        .cloned()
        .map(|i| i.with_gold(true))
        .collect();
    let p = RemotePredictor::new(&url, fast_opts(), Arc::new(token_map(&sentences)), schema());
    let preds = p.predict_batch(&labeled).unwrap();
    assert_eq!(preds.len(), 100);
    for (inst, pred) in labeled.iter().zip(&preds) {
        assert_eq!(pred.instance_id, inst.instance_id());
        let toks = &sentences
            .iter()
            .find(|s| s.sentence_id == inst.sentence_id())
            .unwrap()
            .tokens;
        assert_eq!(
            pred.binary(),
            rule(toks, inst.subject().start, inst.object().start)
        );
    }
    let seen = stub.seen.lock().unwrap();
    assert_eq!(seen.len(), 100);
    assert!(seen.values().all(|&n| n == 1));
    assert!(
        !*stub.saw_label.lock().unwrap(),
        "gold labels leaked to the wire"
    );
}

#[test]
fn server_errors_and_malformed_bodies_are_retried() {
    let stub = Arc::new(Stub {
        flaky: true,
        ..Stub::default()
    });
    let url = spawn(
        Router::new()
            .route("/v1/predict", post(predict))
            .with_state(stub.clone()),
    );
    let (sentences, instances) = hundred();
    let opts = cre::remote::RemoteOptions {
        batch_size: 1000,
        max_in_flight: 1,
        ..fast_opts()
    };
    let p = RemotePredictor::new(&url, opts, Arc::new(token_map(&sentences)), schema());
    let preds = p.predict_batch(&instances).unwrap();
    assert_eq!(preds.len(), 100);
    assert_eq!(stub.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn unexpected_ids_and_client_errors_fail() {
    let (sentences, instances) = hundred();
    let tokens = Arc::new(token_map(&sentences));
    let url = spawn(Router::new().route("/v1/predict", post(predict_with_stranger)));
    let err = RemotePredictor::new(&url, fast_opts(), tokens.clone(), schema())
        .predict_batch(&instances)
        .unwrap_err();
    assert!(
        matches!(&err, PredictError::Unexpected(id) if id == "stranger"),
        "{err}"
    );

    let url = spawn(Router::new().route("/v1/predict", post(bad_request)));
    let err = RemotePredictor::new(&url, fast_opts(), tokens, schema())
        .predict_batch(&instances)
        .unwrap_err();
    assert!(
        matches!(&err, PredictError::Transport { attempts: 1, .. }),
        "{err}"
    );
}

#[test]
fn remote_qa_reorders_and_abstains() {
    let url = spawn(Router::new().route("/v1/qa", post(qa)));
    let q = RemoteQa::new(&url, fast_opts());
    let queries: Vec<QaQuery> = (0..30)
        .map(|i| QaQuery {
            id: format!("x{i}#q{}", 1 + i % 2),
            question: "Who?".into(),
            context: format!("Tok{i} rest"),
        })
        .collect();
    let answers = q.answer_batch(&queries).unwrap();
    let ids: Vec<&str> = answers.iter().map(|a| a.id.as_str()).collect();
    let want: Vec<&str> = queries.iter().map(|q| q.id.as_str()).collect();
    assert_eq!(ids, want);
    for (i, a) in answers.iter().enumerate() {
        if i % 2 == 0 {
            assert_eq!(a.answer.as_deref(), Some(format!("Tok{i}").as_str()));
        } else {
            assert_eq!(a.answer, None);
        }
    }

    // Through the reduction: the subject of every candidate is its first token.
    let schema = schema();
    let sentences: Vec<Sentence> = (0..3).map(people_sentence).collect();
    let instances = candidates(&sentences, &schema);
    let map: BTreeMap<String, Sentence> = sentences
        .iter()
        .map(|s| (s.sentence_id.clone(), s.clone()))
        .collect();
    let verdicts = qa_classify(&instances, &map, &q, &schema, MatchMode::Normalized).unwrap();
    let ids: BTreeSet<&str> = verdicts.iter().map(|v| v.instance_id()).collect();
    assert_eq!(ids.len(), instances.len());
    for (v, inst) in verdicts.iter().zip(&instances) {
        assert_eq!(v.decision(), inst.object().start == 0);
        assert!(!v.match_q2());
    }
}
