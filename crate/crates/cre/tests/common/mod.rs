#![allow(dead_code)]

use std::collections::BTreeMap;
use std::time::Duration;

use axum::Router;
use cre::cre_core::corpus::enumerate_pairs;
use cre::cre_core::miner::Task;
use cre::cre_core::{CandidateInstance, EntityType, SchemaConfig, Sentence};
use cre::remote::RemoteOptions;
use cre::schema_file::builtin_schema;

/// Serves `app` on an ephemeral port for the rest of the process.
pub fn spawn(app: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

pub fn fast_opts() -> RemoteOptions {
    RemoteOptions {
        batch_size: 7,
        max_in_flight: 3,
        retries: 3,
        timeout: Duration::from_secs(10),
        backoff: Duration::from_millis(1),
    }
}

pub fn schema() -> SchemaConfig {
    builtin_schema()
}

/// Sentence `i` names three people and an organization.
pub fn people_sentence(i: usize) -> Sentence {
    let text = format!("Ann{i} met Bob{i} and Cy{i} at Acme{i} yesterday");
    let tokens: Vec<String> = text.split_whitespace().map(String::from).collect();
    Sentence::new(
        format!("s{i:04}"),
        tokens,
        [
            (0, 0, EntityType::from("PERSON")),
            (2, 2, "PERSON".into()),
            (4, 4, "PERSON".into()),
            (6, 6, "ORGANIZATION".into()),
        ],
        "fixture",
    )
    .unwrap()
}

pub fn candidates(sentences: &[Sentence], schema: &SchemaConfig) -> Vec<CandidateInstance> {
    sentences
        .iter()
        .flat_map(|s| enumerate_pairs(s, schema))
        .collect()
}

pub fn token_map(sentences: &[Sentence]) -> BTreeMap<String, Vec<String>> {
    sentences
        .iter()
        .map(|s| (s.sentence_id.clone(), s.tokens.clone()))
        .collect()
}

pub fn tasks(n: usize) -> Vec<Task> {
    let schema = schema();
    let sentences: Vec<Sentence> = (0..n).map(people_sentence).collect();
    candidates(&sentences, &schema)
        .into_iter()
        .filter(|c| c.relation() == "per:spouse")
        .take(n)
        .enumerate()
        .map(|(i, instance)| Task {
            task_index: i,
            group: instance.relation().into(),
            tokens: sentences
                .iter()
                .find(|s| s.sentence_id == instance.sentence_id())
                .unwrap()
                .tokens
                .clone(),
            instance,
            source: "fixture".into(),
        })
        .collect()
}
