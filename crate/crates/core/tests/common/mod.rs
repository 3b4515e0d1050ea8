//! Throwaway HTTP stubs for wire-protocol tests.

#![allow(dead_code)]

use std::sync::Arc;

use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::Value;

pub type Reply = (StatusCode, Value);

/// Serve `router` on an ephemeral port from a background runtime and return
/// its base address.
pub fn spawn(router: Router) -> String {
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
            axum::serve(listener, router).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// Fill-mask backend whose `/v1/fill-mask` answers come from `reply`.
pub fn fill_mask_stub(
    model: &str,
    max_candidates: usize,
    reply: impl Fn(Value) -> Reply + Send + Sync + 'static,
) -> String {
    let info = serde_json::json!({
        "model": model,
        "directionality": "bidirectional",
        "max_candidates_per_request": max_candidates,
    });
    let reply = Arc::new(reply);
    let router = Router::new()
        .route("/v1/info", get(move || async move { Json(info) }))
        .route(
            "/v1/fill-mask",
            post(move |Json(body): Json<Value>| {
                let reply = reply.clone();
                async move {
                    let (status, value) = reply(body);
                    (status, Json(value))
                }
            }),
        );
    spawn(router)
}

/// Generation backend whose `/v1/generate` answers come from `reply`.
pub fn generate_stub(reply: impl Fn(Value) -> Reply + Send + Sync + 'static) -> String {
    let reply = Arc::new(reply);
    let router = Router::new().route(
        "/v1/generate",
        post(move |Json(body): Json<Value>| {
            let reply = reply.clone();
            async move {
                let (status, value) = reply(body);
                (status, Json(value))
            }
        }),
    );
    spawn(router)
}
