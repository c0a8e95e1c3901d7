//! JSON endpoints. Every handler runs the matching [`Engine`] call on a
//! blocking thread and adds the graph revision to the response.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use super::engine::{AddCandidateRequest, CreateSession, Engine, LabelRequest};
use super::GatewayError;
use crate::acquisition::AnnotationSession;
use crate::edulink::HeteroRecord;

pub struct ApiError(GatewayError);

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, GatewayError> + Send + 'static) -> Result<T, ApiError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(GatewayError::Config(format!("worker failed: {e}")))),
    }
}

/// Parses a JSON body; any failure is a 400.
fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError(GatewayError::BadRequest(e.to_string())))
}

fn session_view(s: &AnnotationSession, revision: u64) -> Value {
    json!({
        "revision": revision,
        "sessionId": s.id,
        "stage": s.stage,
        "entitiesCommitted": s.entities_committed,
        "triplesCommitted": s.triples_committed,
        "entityCandidates": s.entity_candidates,
        "tripleCandidates": s.triple_candidates,
    })
}

#[derive(Deserialize)]
struct SearchParams {
    #[serde(default)]
    q: String,
    k: Option<usize>,
}

async fn search(State(engine): State<Arc<Engine>>, Query(p): Query<SearchParams>) -> ApiResult {
    let (hits, revision) = blocking(move || engine.search(&p.q, p.k)).await?;
    Ok(Json(json!({ "revision": revision, "hits": hits })))
}

async fn link(State(engine): State<Arc<Engine>>, Query(p): Query<HashMap<String, String>>, bytes: Bytes) -> ApiResult {
    let record: HeteroRecord = body(&bytes)?;
    let store = match p.get("store").map(String::as_str) {
        None | Some("true") | Some("1") => true,
        Some("false") | Some("0") => false,
        Some(other) => return Err(ApiError(GatewayError::BadRequest(format!("store={other}")))),
    };
    let (report, revision) = blocking(move || engine.link(&record, store)).await?;
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["revision"] = json!(revision);
    Ok(Json(v))
}

#[derive(Deserialize)]
struct QaRequest {
    question: String,
}

async fn qa(State(engine): State<Arc<Engine>>, bytes: Bytes) -> ApiResult {
    let req: QaRequest = body(&bytes)?;
    let (a, revision) = blocking(move || engine.answer(&req.question)).await?;
    Ok(Json(json!({ "revision": revision, "answers": a.answers, "plan": a.plan, "templateId": a.template_id })))
}

async fn create_session(State(engine): State<Arc<Engine>>, bytes: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: CreateSession = body(&bytes)?;
    let (s, revision) = blocking(move || engine.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(session_view(&s, revision))))
}

async fn list_sessions(State(engine): State<Arc<Engine>>) -> ApiResult {
    Ok(Json(json!({ "revision": engine.revision(), "sessions": engine.session_ids() })))
}

async fn candidates(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult {
    let (s, revision) = blocking(move || engine.session(&id)).await?;
    Ok(Json(session_view(&s, revision)))
}

async fn label(State(engine): State<Arc<Engine>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: LabelRequest = body(&bytes)?;
    let (s, revision) = blocking(move || engine.label(&id, req)).await?;
    Ok(Json(session_view(&s, revision)))
}

async fn add_candidate(State(engine): State<Arc<Engine>>, Path(id): Path<String>, bytes: Bytes) -> ApiResult {
    let req: AddCandidateRequest = body(&bytes)?;
    let (s, revision) = blocking(move || engine.add_candidate(&id, req)).await?;
    Ok(Json(session_view(&s, revision)))
}

async fn advance(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult {
    let (s, revision) = blocking(move || engine.advance(&id)).await?;
    Ok(Json(session_view(&s, revision)))
}

async fn commit(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> ApiResult {
    let (report, s, revision) = blocking(move || engine.commit(&id)).await?;
    let mut v = session_view(&s, revision);
    v["report"] = json!(report);
    Ok(Json(v))
}

async fn export(State(engine): State<Arc<Engine>>) -> ApiResult {
    let (ntriples, meta, revision) = blocking(move || engine.export()).await?;
    Ok(Json(json!({ "revision": revision, "ntriples": ntriples, "meta": meta })))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/search", get(search))
        .route("/link", post(link))
        .route("/qa", post(qa))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/:id/candidates", get(candidates).post(add_candidate))
        .route("/sessions/:id/label", post(label))
        .route("/sessions/:id/advance", post(advance))
        .route("/sessions/:id/commit", post(commit))
        .route("/export", get(export))
        .with_state(engine)
}

/// Serves until ctrl-c.
pub async fn serve(engine: Arc<Engine>, listen: &str) -> Result<(), GatewayError> {
    let listener = tokio::net::TcpListener::bind(listen).await.map_err(|e| GatewayError::io(listen, e))?;
    log::info!("listening on {}", listener.local_addr().map_err(|e| GatewayError::io(listen, e))?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| GatewayError::io(listen, e))
}
