//! HTTP API used by the annotation frontend.
//!
//! | route | result |
//! |---|---|
//! | `GET /api/tasks/next?annotator=ID` | next unlabeled item, or 204 when done |
//! | `POST /api/labels` | store `{generation_id, annotator_id, label}`, 201 |
//! | `GET /api/progress?annotator=ID` | `{labeled, total}` |
//! | `GET /api/stats` | label shares per aspect and model, pairwise kappa |

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use super::{
    aggregate_labels, pairwise_kappa, AnnotationRecord, GenEvalError, Generation, Label, LabelBreakdown, LabelStore,
    PairwiseKappa, Resolution,
};
use crate::text::derive_seed;

/// Order in which `annotator_id` sees the generations: ids sorted, then
/// shuffled with a seed derived from the annotator id alone.
pub fn task_order(generations: &[Generation], annotator_id: &str) -> Vec<usize> {
    let mut order: Vec<usize> = (0..generations.len()).collect();
    order.sort_by(|&a, &b| generations[a].id.cmp(&generations[b].id));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0, &["annotation-order", annotator_id]));
    order.shuffle(&mut rng);
    order
}

pub struct AnnotationState {
    generations: Vec<Generation>,
    index: HashMap<String, usize>,
    store: LabelStore,
    resolution: Resolution,
    orders: Mutex<HashMap<String, Arc<Vec<usize>>>>,
}

impl AnnotationState {
    pub fn new(generations: Vec<Generation>, store: LabelStore, resolution: Resolution) -> Result<Self, GenEvalError> {
        let mut index = HashMap::new();
        for (i, g) in generations.iter().enumerate() {
            if index.insert(g.id.clone(), i).is_some() {
                return Err(GenEvalError::Config(format!("duplicate generation id {}", g.id)));
            }
        }
        for r in store.records() {
            if !index.contains_key(&r.generation_id) {
                return Err(GenEvalError::DanglingGeneration(r.generation_id));
            }
        }
        Ok(Self {
            generations,
            index,
            store,
            resolution,
            orders: Mutex::default(),
        })
    }

    pub fn store(&self) -> &LabelStore {
        &self.store
    }

    fn order(&self, annotator: &str) -> Arc<Vec<usize>> {
        self.orders
            .lock()
            .expect("order lock")
            .entry(annotator.to_string())
            .or_insert_with(|| Arc::new(task_order(&self.generations, annotator)))
            .clone()
    }

    pub fn progress(&self, annotator: &str) -> Progress {
        let labeled = self
            .generations
            .iter()
            .filter(|g| self.store.label_of(&g.id, annotator).is_some())
            .count();
        Progress {
            labeled,
            total: self.generations.len(),
        }
    }

    pub fn next_task(&self, annotator: &str) -> Option<NextTask> {
        let g = self
            .order(annotator)
            .iter()
            .map(|&i| &self.generations[i])
            .find(|g| self.store.label_of(&g.id, annotator).is_none())?;
        Some(NextTask {
            generation_id: g.id.clone(),
            prompt_text: g.prompt_text.clone(),
            generation_text: g.text.clone(),
            aspect_id: g.aspect_id.clone(),
            progress: self.progress(annotator),
        })
    }

    pub fn submit(&self, generation_id: &str, annotator_id: &str, label: Label) -> Result<AnnotationRecord, GenEvalError> {
        if !self.index.contains_key(generation_id) {
            return Err(GenEvalError::DanglingGeneration(generation_id.to_string()));
        }
        self.store.submit(generation_id, annotator_id, label)
    }

    pub fn stats(&self) -> Result<Stats, GenEvalError> {
        let records = self.store.records();
        let annotators: HashSet<&str> = records.iter().map(|r| r.annotator_id.as_str()).collect();
        let mut annotators: Vec<String> = annotators.into_iter().map(str::to_string).collect();
        annotators.sort();
        Ok(Stats {
            resolution: self.resolution,
            annotators,
            aggregates: aggregate_labels(&self.generations, &records, self.resolution)?.groups,
            kappa: pairwise_kappa(&records)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub labeled: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextTask {
    pub generation_id: String,
    pub prompt_text: String,
    pub generation_text: String,
    pub aspect_id: String,
    pub progress: Progress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub resolution: Resolution,
    pub annotators: Vec<String>,
    pub aggregates: Vec<LabelBreakdown>,
    /// One entry per annotator pair with overlapping items.
    pub kappa: Vec<PairwiseKappa>,
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

#[derive(Deserialize)]
struct Submission {
    generation_id: String,
    annotator_id: String,
    label: String,
}

fn bad_request(message: impl ToString) -> Response {
    (StatusCode::BAD_REQUEST, message.to_string()).into_response()
}

fn annotator(q: AnnotatorQuery) -> Result<String, Response> {
    match q.annotator {
        Some(a) if !a.trim().is_empty() => Ok(a),
        _ => Err(bad_request("annotator query parameter is required")),
    }
}

async fn next_handler(State(state): State<Arc<AnnotationState>>, Query(q): Query<AnnotatorQuery>) -> Response {
    let who = match annotator(q) {
        Ok(a) => a,
        Err(r) => return r,
    };
    match state.next_task(&who) {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn progress_handler(State(state): State<Arc<AnnotationState>>, Query(q): Query<AnnotatorQuery>) -> Response {
    match annotator(q) {
        Ok(who) => Json(state.progress(&who)).into_response(),
        Err(r) => r,
    }
}

async fn label_handler(State(state): State<Arc<AnnotationState>>, Json(body): Json<Submission>) -> Response {
    let label: Label = match body.label.parse() {
        Ok(l) => l,
        Err(e) => return bad_request(e),
    };
    match state.submit(&body.generation_id, &body.annotator_id, label) {
        Ok(record) => (StatusCode::CREATED, Json(record)).into_response(),
        Err(e @ GenEvalError::DanglingGeneration(_)) => (StatusCode::NOT_FOUND, e.to_string()).into_response(),
        Err(e @ GenEvalError::EmptyAnnotator) => bad_request(e),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn stats_handler(State(state): State<Arc<AnnotationState>>) -> Response {
    match state.stats() {
        Ok(s) => Json(s).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

/// Routes of the annotation API, optionally serving frontend assets from
/// `static_dir` for every other path.
pub fn annotation_router(state: Arc<AnnotationState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/tasks/next", get(next_handler))
        .route("/api/labels", post(label_handler))
        .route("/api/progress", get(progress_handler))
        .route("/api/stats", get(stats_handler))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve_annotation(
    listener: tokio::net::TcpListener,
    state: Arc<AnnotationState>,
    static_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    axum::serve(listener, annotation_router(state, static_dir)).await
}
