//! REST service behind the annotation tool.
//!
//! The corpus is loaded once and never written. Annotations go to an
//! append-only JSON-lines log, which is replayed on startup.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use teluref_core::corpus::{adjudicate, load_annotations, load_corpus_dir, AnnotationRecord, Conversation};
use teluref_core::embeddings::{load_embeddings, EmbeddingTable};
use teluref_core::featurizer::{pair_vector, FeatureLayout, Featurizer};
use teluref_core::mlp::MlpModel;

use crate::error::{read, CliError};

pub struct ServeOptions {
    pub corpus_dir: PathBuf,
    pub annotations: PathBuf,
    pub model: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    pub ui_dir: Option<PathBuf>,
}

pub struct Scorer {
    pub model: MlpModel,
    pub table: EmbeddingTable,
    pub featurizer: Featurizer,
}

struct AnnotationLog {
    file: File,
    records: Vec<AnnotationRecord>,
}

pub struct AppState {
    conversations: BTreeMap<String, Conversation>,
    log: Mutex<AnnotationLog>,
    scorer: Option<Scorer>,
}

impl AppState {
    /// Loads the corpus and replays the annotation log, creating it if
    /// needed.
    pub fn open(
        conversations: Vec<Conversation>,
        annotations: &Path,
        scorer: Option<Scorer>,
    ) -> Result<Self, CliError> {
        let records = match std::fs::read(annotations) {
            Ok(bytes) => load_annotations(&bytes).map_err(|e| CliError::invalid(annotations.display(), e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(CliError::io(annotations, e)),
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(annotations)
            .map_err(|e| CliError::io(annotations, e))?;
        Ok(AppState {
            conversations: conversations.into_iter().map(|c| (c.id.clone(), c)).collect(),
            log: Mutex::new(AnnotationLog { file, records }),
            scorer,
        })
    }

    fn records_for(&self, conversation: &str) -> Vec<AnnotationRecord> {
        let log = self.log.lock().expect("log lock");
        log.records.iter().filter(|r| r.conversation == conversation).cloned().collect()
    }
}

pub fn router(state: Arc<AppState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/conversations", get(list_conversations))
        .route("/api/conversations/{id}", get(get_conversation))
        .route("/api/conversations/{id}/pairs", get(list_pairs).post(add_pair))
        .route("/api/conversations/{id}/adjudication", get(adjudication))
        .route("/api/conversations/{id}/suggestions", get(suggestions))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(options: ServeOptions, host: &str, port: u16) -> Result<(), CliError> {
    if !options.corpus_dir.is_dir() {
        return Err(CliError::io(
            &options.corpus_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
        ));
    }
    let conversations = load_corpus_dir(&options.corpus_dir)?;
    let scorer = match (&options.model, &options.embeddings) {
        (Some(model_path), Some(emb_path)) => {
            let model = MlpModel::load(&read(model_path)?).map_err(|e| CliError::invalid(model_path.display(), e))?;
            let table = load_embeddings(&read(emb_path)?, options.embedding_dim)
                .map_err(|e| CliError::invalid(emb_path.display(), e))?;
            let featurizer = model.features.clone().unwrap_or_else(|| {
                Featurizer::new(FeatureLayout {
                    embedding_dim: options.embedding_dim,
                })
            });
            Some(Scorer {
                model,
                table,
                featurizer,
            })
        }
        _ => None,
    };
    let state = Arc::new(AppState::open(conversations, &options.annotations, scorer)?);
    let app = router(state, options.ui_dir.as_deref());
    let addr = format!("{host}:{port}");
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| CliError::io(Path::new(&addr), e))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::io(Path::new(&addr), e))
}

fn error(status: StatusCode, message: impl std::fmt::Display) -> Response {
    (status, Json(json!({ "error": message.to_string() }))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("unknown conversation `{id}`"))
}

#[derive(Serialize)]
struct ConversationSummary<'a> {
    id: &'a str,
    mention_count: usize,
}

async fn list_conversations(State(state): State<Arc<AppState>>) -> Response {
    let list: Vec<ConversationSummary> = state
        .conversations
        .values()
        .map(|c| ConversationSummary {
            id: &c.id,
            mention_count: c.mentions.len(),
        })
        .collect();
    Json(list).into_response()
}

async fn get_conversation(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    match state.conversations.get(&id) {
        Some(c) => Json(json!({
            "id": c.id,
            "speakers": c.speakers,
            "utterances": c.utterances,
            "mentions": c.mentions,
        }))
        .into_response(),
        None => not_found(&id),
    }
}

#[derive(Deserialize)]
struct PairsQuery {
    annotator: Option<String>,
}

async fn list_pairs(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(query): Query<PairsQuery>,
) -> Response {
    if !state.conversations.contains_key(&id) {
        return not_found(&id);
    }
    let records: Vec<AnnotationRecord> = state
        .records_for(&id)
        .into_iter()
        .filter(|r| query.annotator.as_ref().is_none_or(|a| *a == r.annotator))
        .collect();
    Json(records).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairBody {
    antecedent: String,
    anaphor: String,
    label: bool,
    annotator: String,
    conversation: Option<String>,
}

async fn add_pair(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Response {
    let Some(conversation) = state.conversations.get(&id) else {
        return not_found(&id);
    };
    let body: PairBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed body: {e}")),
    };
    if body.annotator.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "annotator must not be empty");
    }
    if body.conversation.as_ref().is_some_and(|c| *c != id) {
        return error(StatusCode::BAD_REQUEST, "body conversation does not match the URL");
    }
    let record = AnnotationRecord {
        conversation: id,
        antecedent: body.antecedent,
        anaphor: body.anaphor,
        label: body.label,
        annotator: body.annotator,
    };
    if let Err(e) = record.validate_against(conversation) {
        return error(StatusCode::BAD_REQUEST, e);
    }

    let mut line = serde_json::to_vec(&record).expect("record serializes");
    line.push(b'\n');
    let mut log = state.log.lock().expect("log lock");
    if let Err(e) = log.file.write_all(&line).and_then(|_| log.file.flush()) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, format!("could not write annotation log: {e}"));
    }
    log.records.push(record.clone());
    (StatusCode::CREATED, Json(record)).into_response()
}

/// Splits records by annotator: the first two annotators to appear are the
/// primary reviewers, anyone after them counts as the third reviewer.
fn reviewer_sets(records: &[AnnotationRecord]) -> (Vec<String>, Vec<Vec<AnnotationRecord>>) {
    let mut order: Vec<String> = Vec::new();
    for r in records {
        if !order.contains(&r.annotator) {
            order.push(r.annotator.clone());
        }
    }
    let mut sets = vec![Vec::new(), Vec::new(), Vec::new()];
    for r in records {
        let slot = order.iter().position(|a| *a == r.annotator).expect("seen").min(2);
        sets[slot].push(r.clone());
    }
    (order, sets)
}

async fn adjudication(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    if !state.conversations.contains_key(&id) {
        return not_found(&id);
    }
    let records = state.records_for(&id);
    let (annotators, sets) = reviewer_sets(&records);
    if annotators.len() < 2 {
        return Json(json!({
            "conversation": id,
            "annotators": annotators,
            "ready": false,
            "gold": [],
            "conflicts": [],
            "needs_third_review": false,
        }))
        .into_response();
    }
    let third = (!sets[2].is_empty()).then_some(sets[2].as_slice());
    let result = match adjudicate(&sets[0], &sets[1], third) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e),
    };
    let gold: Vec<_> = result
        .gold
        .iter()
        .map(|((a, b), label)| json!({ "antecedent": a, "anaphor": b, "label": label }))
        .collect();
    Json(json!({
        "conversation": id,
        "annotators": annotators,
        "ready": true,
        "gold": gold,
        "conflicts": result.conflicts,
        "needs_third_review": result.needs_third_review(),
    }))
    .into_response()
}

async fn suggestions(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(conversation) = state.conversations.get(&id) else {
        return not_found(&id);
    };
    let Some(scorer) = &state.scorer else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no model loaded; start the service with --model");
    };
    let mut vectors = BTreeMap::new();
    for m in &conversation.mentions {
        let utterance = &conversation.utterances[m.utterance_index];
        match scorer.featurizer.mention_vector(m, utterance, &scorer.table) {
            Ok(v) => vectors.insert(m.id.as_str(), v),
            Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e),
        };
    }
    let ordered = conversation.mentions_in_order();
    let mut out = Vec::new();
    for (j, anaphor) in ordered.iter().enumerate() {
        for antecedent in &ordered[..j] {
            let pair = match pair_vector(&vectors[antecedent.id.as_str()], &vectors[anaphor.id.as_str()]) {
                Ok(p) => p,
                Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e),
            };
            match scorer.model.predict_pair(&pair) {
                Ok(p) => out.push(json!({
                    "antecedent": antecedent.id,
                    "anaphor": anaphor.id,
                    "probability": p,
                })),
                Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e),
            }
        }
    }
    Json(out).into_response()
}
