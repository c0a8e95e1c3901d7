use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use kgforge::acquisition::{confidence, FeedbackMode};
use kgforge::gateway::{router, Config, CreateSession, Engine, LabelRequest};
use kgforge::model::{vocab, Entity, Iri, KnowledgeGraph, Ontology, ValidationMode};

fn graph() -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new(Ontology::builtin());
    for (label, description) in [
        ("steam engine", "A heat engine that performs work using steam."),
        ("Industrial Revolution", "The transition to new manufacturing processes."),
        ("wealth gap", "Unequal distribution of assets."),
    ] {
        let e = Entity::concept(Iri::local("concept", label), label, vocab::iri(vocab::CONCEPT)).with_description(description);
        kg.add_entity(e, ValidationMode::Strict).unwrap();
    }
    kg
}

fn engine(sessions: &std::path::Path) -> Arc<Engine> {
    let mut cfg = Config::default();
    cfg.paths.sessions = Some(sessions.to_owned());
    Arc::new(Engine::with_graph(cfg, graph()).unwrap())
}

async fn call(engine: &Arc<Engine>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(engine.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

const TEXT: &str = "The Industrial Revolution spread the steam engine and widened the wealth gap.";

#[tokio::test]
async fn annotation_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let (status, created) = call(&engine, "POST", "/sessions", Some(json!({"sessionId": "s1", "docId": "d", "text": TEXT}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let cands = created["entityCandidates"].as_array().unwrap();
    assert_eq!(cands.len(), 3);
    assert_eq!(cands[0]["confidence"], json!(0.5));
    let id = cands[0]["id"].as_str().unwrap().to_owned();

    let (status, body) = call(&engine, "POST", "/sessions/s1/advance", None).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    let (status, labelled) =
        call(&engine, "POST", "/sessions/s1/label", Some(json!({"candidateId": id, "verdict": "accept"}))).await;
    assert_eq!(status, StatusCode::OK);
    let top = &labelled["entityCandidates"][0];
    assert_eq!(top["id"], json!(id));
    let expected = confidence(0.5, 1, 0, 0.1, FeedbackMode::default());
    assert!((top["confidence"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(top["confidence"].as_f64().unwrap(), expected);

    for c in labelled["entityCandidates"].as_array().unwrap().iter().skip(1) {
        let cid = c["id"].as_str().unwrap();
        let (s, _) = call(&engine, "POST", "/sessions/s1/label", Some(json!({"candidateId": cid, "verdict": "reject"}))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let before = engine.revision();
    let (status, committed) = call(&engine, "POST", "/sessions/s1/commit", None).await;
    assert_eq!(status, StatusCode::OK, "{committed}");
    assert!(committed["revision"].as_u64().unwrap() > before);
    let (status, advanced) = call(&engine, "POST", "/sessions/s1/advance", None).await;
    assert_eq!(status, StatusCode::OK, "{advanced}");
    assert_eq!(advanced["stage"], json!("tripleStage"));

    // the event log on disk rebuilds the same session
    let resumed = engine_from_disk(dir.path());
    assert_eq!(resumed.session("s1").unwrap().0, engine.session("s1").unwrap().0);
}

fn engine_from_disk(dir: &std::path::Path) -> Engine {
    let mut cfg = Config::default();
    cfg.paths.sessions = Some(dir.to_owned());
    Engine::with_graph(cfg, graph()).unwrap()
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    assert_eq!(call(&engine, "GET", "/search?q=", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&engine, "GET", "/search", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&engine, "GET", "/sessions/nope/candidates", None).await.0, StatusCode::NOT_FOUND);
    let (status, body) = call(&engine, "POST", "/qa", Some(json!({"q": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    assert!(body["error"].is_string());
    assert_eq!(call(&engine, "POST", "/link", Some(json!({"type": "nothing"}))).await.0, StatusCode::BAD_REQUEST);
    let (s, _) = call(&engine, "POST", "/sessions", Some(json!({"sessionId": "../x", "docId": "d", "text": "t"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    call(&engine, "POST", "/sessions", Some(json!({"sessionId": "a", "docId": "d", "text": TEXT}))).await;
    let (s, _) = call(&engine, "POST", "/sessions", Some(json!({"sessionId": "a", "docId": "d", "text": TEXT}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&engine, "POST", "/sessions/a/candidates", Some(json!({"start": 5, "end": 500}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&engine, "POST", "/sessions/a/label", Some(json!({"candidateId": "ent:0-1", "verdict": "accept"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn endpoints_equal_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());

    let (status, body) = call(&engine, "GET", "/search?q=steem%20engine&k=3", None).await;
    assert_eq!(status, StatusCode::OK);
    let (hits, rev) = engine.search("steem engine", Some(3)).unwrap();
    assert_eq!(body["hits"], serde_json::to_value(&hits).unwrap());
    assert_eq!(body["revision"], json!(rev));
    assert_eq!(hits[0].iri, Iri::local("concept", "steam engine"));

    let record = json!({"type": "unstructured", "id": "r1", "text": TEXT});
    let (status, dry) = call(&engine, "POST", "/link?store=false", Some(record.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let rec: kgforge::edulink::HeteroRecord = serde_json::from_value(record.clone()).unwrap();
    let (report, _) = engine.link(&rec, false).unwrap();
    assert_eq!(dry["links"], serde_json::to_value(&report.links).unwrap());
    assert_eq!(engine.revision(), 0);

    let (status, stored) = call(&engine, "POST", "/link", Some(record)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stored["revision"], json!(1));
    assert_eq!(stored["triplesAdded"], json!(3));

    let (status, exported) = call(&engine, "GET", "/export", None).await;
    assert_eq!(status, StatusCode::OK);
    let (nt, meta, rev) = engine.export().unwrap();
    assert_eq!(exported["ntriples"], json!(nt));
    assert_eq!(exported["meta"], meta);
    assert_eq!(exported["revision"], json!(rev));
    assert_eq!(nt.lines().count(), 3);
}

#[tokio::test]
async fn revisions_strictly_increase_under_concurrent_writers() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    let mut tasks = Vec::new();
    for i in 0..16 {
        let engine = engine.clone();
        tasks.push(tokio::spawn(async move {
            let record = json!({"type": "unstructured", "id": format!("r{i}"), "text": TEXT});
            call(&engine, "POST", "/link", Some(record)).await.1["revision"].as_u64().unwrap()
        }));
    }
    let mut revisions = Vec::new();
    for t in tasks {
        revisions.push(t.await.unwrap());
    }
    revisions.sort();
    assert_eq!(revisions, (1..=16).collect::<Vec<u64>>());
    assert_eq!(engine.snapshot().graph.triple_count(), 16 * 3);
}

#[test]
fn label_body_shapes() {
    let r: LabelRequest = serde_json::from_value(json!({"candidateId": "c", "verdict": "edit", "label": "X"})).unwrap();
    assert_eq!(r.annotator, "anonymous");
    assert!(matches!(r.verdict, kgforge::acquisition::Verdict::Edit(ref p) if p.label.as_deref() == Some("X")));
    let c: CreateSession = serde_json::from_value(json!({"docId": "d", "text": "t"})).unwrap();
    assert!(c.session_id.is_none());
}
