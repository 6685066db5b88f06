mod common;

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use common::*;
use curate::parallel::thread_pool;
use curate::stage2_quality::{score_documents, RemoteScorer, Scorer};
use curate::{Document, Error};
use serde_json::{json, Value};

#[derive(Default)]
struct StubState {
    /// Status codes to answer with before behaving normally.
    script: Mutex<VecDeque<u16>>,
    batches: Mutex<Vec<Vec<String>>>,
}

/// Stub scoring service: score = token count mod 6, except that the text
/// "null" gets a null score and "score=<x>" gets exactly x.
struct Stub {
    addr: SocketAddr,
    state: Arc<StubState>,
    _runtime: tokio::runtime::Runtime,
}

impl Stub {
    fn start(script: &[u16]) -> Stub {
        let state = Arc::new(StubState {
            script: Mutex::new(script.iter().copied().collect()),
            ..StubState::default()
        });
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let app = Router::new()
            .route("/score", post(handle))
            .with_state(state.clone());
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .unwrap();
        let addr = listener.local_addr().unwrap();
        runtime.spawn(async move { axum::serve(listener, app).await.unwrap() });
        Stub {
            addr,
            state,
            _runtime: runtime,
        }
    }

    fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    fn scorer(&self) -> RemoteScorer {
        RemoteScorer::new(&self.url())
            .unwrap()
            .with_backoff(Duration::from_millis(1), Duration::from_millis(4))
    }

    fn batch_sizes(&self) -> Vec<usize> {
        self.state.batches.lock().unwrap().iter().map(Vec::len).collect()
    }
}

fn stub_score(text: &str) -> Value {
    if text == "null" {
        return Value::Null;
    }
    if let Some(x) = text.strip_prefix("score=") {
        return json!(x.parse::<f64>().unwrap());
    }
    json!((oracle_tokens(text).len() % 6) as f64)
}

async fn handle(State(state): State<Arc<StubState>>, Json(body): Json<Value>) -> Response {
    if let Some(code) = state.script.lock().unwrap().pop_front() {
        if code != 200 {
            return StatusCode::from_u16(code).unwrap().into_response();
        }
    }
    let texts: Vec<String> = body["texts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t.as_str().unwrap().to_string())
        .collect();
    let scores: Vec<Value> = texts.iter().map(|t| stub_score(t)).collect();
    state.batches.lock().unwrap().push(texts);
    Json(json!({ "scores": scores })).into_response()
}

fn docs(n: usize) -> Vec<Document> {
    (0..n)
        .map(|i| {
            let words: Vec<String> = (0..(i * 7 % 23)).map(|k| format!("w{k}")).collect();
            Document::new(format!("d{i}"), words.join(" "))
        })
        .collect()
}

#[test]
fn batches_are_split_and_reassembled_in_order() {
    let stub = Stub::start(&[]);
    let scorer = stub.scorer();
    let docs = docs(7);
    let pool = thread_pool(1).unwrap();
    let (scores, summary) = score_documents(&docs, &scorer, 3, &pool).unwrap();
    assert_eq!(stub.batch_sizes(), [3, 3, 1]);
    let sent: Vec<String> = stub.state.batches.lock().unwrap().concat();
    assert_eq!(sent, docs.iter().map(|d| d.text.clone()).collect::<Vec<_>>());
    assert_eq!(
        scores.iter().map(|s| s.doc_id.as_str()).collect::<Vec<_>>(),
        docs.iter().map(|d| d.id.as_str()).collect::<Vec<_>>()
    );
    assert_eq!(summary.scored, 7);
}

#[test]
fn scores_follow_the_stub_formula() {
    let stub = Stub::start(&[]);
    let scorer = stub.scorer();
    let docs = docs(100);
    let pool = thread_pool(4).unwrap();
    let (scores, summary) = score_documents(&docs, &scorer, 8, &pool).unwrap();
    assert_eq!(scores.len(), 100);
    for (doc, score) in docs.iter().zip(&scores) {
        assert_eq!(score.doc_id, doc.id);
        assert_eq!(score.score, (oracle_tokens(&doc.text).len() % 6) as f64);
        assert!(!score.error);
        assert_eq!(score.scorer_id, scorer.id());
    }
    assert_eq!(summary.failed, 0);
    let mut sizes = stub.batch_sizes();
    sizes.sort_unstable();
    assert_eq!(sizes.iter().sum::<usize>(), 100);
    assert_eq!(sizes.iter().filter(|&&s| s == 8).count(), 12);
}

#[test]
fn transient_failures_are_retried() {
    let stub = Stub::start(&[503, 429]);
    let scorer = stub.scorer();
    let docs = docs(4);
    let pool = thread_pool(1).unwrap();
    let (scores, _) = score_documents(&docs, &scorer, 10, &pool).unwrap();
    assert_eq!(scores.len(), 4);
    assert_eq!(scorer.requests_sent(), 3);
}

#[test]
fn persistent_failure_reports_unsent_documents() {
    let stub = Stub::start(&[503; 64]);
    let scorer = stub.scorer();
    let docs = docs(10);
    let pool = thread_pool(1).unwrap();
    match score_documents(&docs, &scorer, 4, &pool) {
        Err(Error::RemoteUnavailable {
            attempts, unsent, ..
        }) => {
            assert_eq!(attempts, 3);
            assert_eq!(unsent, 10);
        }
        other => panic!("expected RemoteUnavailable, got {other:?}"),
    }
    // the first batch exhausted its attempts; later batches were not sent
    assert_eq!(scorer.requests_sent(), 3);
}

#[test]
fn unreachable_endpoint_is_fatal() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let scorer = RemoteScorer::new(&format!("http://127.0.0.1:{port}/"))
        .unwrap()
        .with_backoff(Duration::from_millis(1), Duration::from_millis(2));
    let err = score_documents(&docs(5), &scorer, 2, &thread_pool(2).unwrap()).unwrap_err();
    assert!(matches!(err, Error::RemoteUnavailable { unsent: 5, .. }), "{err:?}");
}

#[test]
fn client_errors_are_not_retried() {
    let stub = Stub::start(&[400]);
    let scorer = stub.scorer();
    let err = scorer.score_batch(&docs(2)).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)), "{err:?}");
    assert_eq!(scorer.requests_sent(), 1);
}

#[test]
fn null_scores_fail_and_out_of_range_scores_clamp() {
    let stub = Stub::start(&[]);
    let scorer = stub.scorer();
    let docs = vec![
        Document::new("a", "null"),
        Document::new("b", "score=7.5"),
        Document::new("c", "score=-1"),
        Document::new("d", "score=3"),
    ];
    let (scores, summary) = score_documents(&docs, &scorer, 4, &thread_pool(1).unwrap()).unwrap();
    assert!(scores[0].error);
    assert!(!scores[0].passes(0.0));
    assert_eq!(scores[1].score, 5.0);
    assert_eq!(scores[2].score, 0.0);
    assert_eq!(scores[3].score, 3.0);
    assert!(scores[3].passes(3.0));
    assert_eq!(summary.failed, 1);
    assert_eq!(summary.clamped, 2);
    for s in &scores {
        assert!((0.0..=5.0).contains(&s.score));
    }
}

#[test]
fn cli_runs_stage_two_against_the_service() {
    let stub = Stub::start(&[]);
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let docs = docs(30);
    write_jsonl(&corpus, &docs);
    let out_dir = dir.path().join("out");
    let o = run(&[
        "filter",
        "--stage",
        "2",
        "--scorer",
        "remote",
        "--endpoint",
        &stub.url(),
        "--batch-size",
        "5",
        "--eta",
        "3",
        "--corpus",
        path_str(&corpus),
        "--output",
        path_str(&out_dir),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let expected: Vec<String> = docs
        .iter()
        .filter(|d| oracle_tokens(&d.text).len() % 6 >= 3)
        .map(|d| d.id.clone())
        .collect();
    assert_eq!(ids(&out_dir.join("retained.jsonl")), expected);
    assert!(!out_dir.join("decisions.jsonl").exists());
    assert_eq!(read_lines(&out_dir.join("scores.jsonl")).len(), 30);
}
