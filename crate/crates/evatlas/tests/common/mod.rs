//! In-process HTTP harness over the router, plus a CLI runner.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use evatlas::llm::{ChatClient, ReplayClient};
use evatlas::server::{router, AppState};
use evatlas::store::Store;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const REPLY_TOPICS: &str = include_str!("../data/reply_topics.txt");
pub const REPLY_MALFORMED: &str = include_str!("../data/reply_malformed.txt");

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| {
            panic!("{e}: {}", String::from_utf8_lossy(&self.bytes))
        })
    }

    pub fn error_kind(&self) -> String {
        self.json()["error"].as_str().unwrap_or_default().to_string()
    }
}

pub struct Api {
    pub app: Router,
    pub store: Arc<Store>,
}

impl Api {
    pub fn new(store: Store, reply: Option<&str>) -> Self {
        let store = Arc::new(store);
        let llm = reply.map(|r| Arc::new(ReplayClient::new(r)) as Arc<dyn ChatClient>);
        Self {
            app: router(AppState::new(store.clone(), llm)),
            store,
        }
    }

    pub fn in_memory(reply: Option<&str>) -> Self {
        Self::new(Store::in_memory(), reply)
    }

    pub async fn send(&self, method: &str, uri: &str, content_type: Option<&str>, body: Vec<u8>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri).header("origin", "http://example.test");
        if let Some(ct) = content_type {
            req = req.header("content-type", ct);
        }
        let res = self.app.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap();
        let status = res.status();
        let headers = res.headers().clone();
        let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, bytes }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send("GET", uri, None, Vec::new()).await
    }

    pub async fn post(&self, uri: &str, body: &Value) -> Reply {
        self.send("POST", uri, Some("application/json"), serde_json::to_vec(body).unwrap())
            .await
    }

    pub async fn post_csv(&self, uri: &str, csv: &str) -> Reply {
        self.send("POST", uri, Some("text/csv"), csv.as_bytes().to_vec()).await
    }

    /// Ingests a CSV and returns the corpus id.
    pub async fn ingest(&self, csv: &str) -> String {
        let r = self.post_csv("/corpora", csv).await;
        assert!(r.status.is_success(), "{}", String::from_utf8_lossy(&r.bytes));
        r.json()["corpus_id"].as_str().unwrap().to_string()
    }

    /// Starts a run and polls until it leaves `pending`; returns the final
    /// status code and record.
    pub async fn run(&self, corpus_id: &str, config: &Value) -> (StatusCode, Value) {
        let r = self.post(&format!("/corpora/{corpus_id}/runs"), config).await;
        assert_eq!(r.status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&r.bytes));
        let run_id = r.json()["run_id"].as_str().unwrap().to_string();
        self.wait(&run_id).await
    }

    pub async fn wait(&self, run_id: &str) -> (StatusCode, Value) {
        for _ in 0..2000 {
            let r = self.get(&format!("/runs/{run_id}")).await;
            let v = r.json();
            if v["status"] != "pending" {
                return (r.status, v);
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("run {run_id} never finished");
    }

    /// Runs the lexical backend and promotes the result.
    pub async fn lexical_atlas(&self, corpus_id: &str, seed: u64) -> (String, String) {
        let (status, run) = self.run(corpus_id, &json!({"backend": "lexical", "seed": seed})).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(run["status"], "done", "{run}");
        let run_id = run["run_id"].as_str().unwrap().to_string();
        let r = self
            .post(&format!("/corpora/{corpus_id}/atlas"), &json!({"run_id": run_id}))
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
        (run_id, r.json()["atlas_version"].as_str().unwrap().to_string())
    }
}

/// Runs the CLI binary against a data directory.
pub fn cli(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evatlas"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env_remove("EVATLAS_LLM_KEY")
        .output()
        .expect("spawn evatlas")
}

pub fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

/// Drives every subcommand headlessly against a fresh data directory, then
/// imports the export into a second directory and compares query output.
pub fn cli_round_trip(work: &Path) {
    let (data, other) = (work.join("data"), work.join("other"));
    let csv = work.join("demo.csv");
    let csv_s = csv.to_str().unwrap();

    let out = stdout_json(&cli(&data, &["demo", "--out", csv_s]));
    assert_eq!(out["studies"], 120);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), evatlas::demo::DEMO_CSV);

    let ingested = stdout_json(&cli(&data, &["ingest", csv_s]));
    assert_eq!(ingested["studies"], 120);
    assert_eq!(ingested["errors"], 0);
    let id = ingested["corpus_id"].as_str().unwrap().to_string();

    let a = stdout_json(&cli(&data, &["topics", "--seed", "7"]));
    let b = stdout_json(&cli(&data, &["topics", "--seed", "7", "--no-promote"]));
    assert_eq!(a["digest"], b["digest"]);
    assert!(b.get("atlas_version").is_none());
    let version = a["atlas_version"].as_str().unwrap();
    let run_b = b["run_id"].as_str().unwrap();

    let runs = stdout_json(&cli(&data, &["runs"]));
    assert_eq!(runs.as_array().unwrap().len(), 2);

    let promoted = stdout_json(&cli(&data, &["promote", "--run", run_b, "--expected-version", version]));
    assert_eq!(promoted["run_id"], run_b);
    let stale = cli(&data, &["promote", "--run", run_b, "--expected-version", "a-000"]);
    assert_eq!(stale.status.code(), Some(1));

    let layout = stdout_json(&cli(&data, &["layout", "--seed", "3"]));
    assert_eq!(layout["nodes"].as_array().unwrap().len(), 120);

    let filter = r#"{"facet_selections":{"Agent Type":["Conversational"]}}"#;
    let q = cli(&data, &["query", "--filter", filter]);
    let qv = stdout_json(&q);
    assert!(!qv["study_ids"].as_array().unwrap().is_empty());

    let g = stdout_json(&cli(&data, &["gaps", "--row", "topic", "--col", "Grade Level"]));
    assert_eq!(g["cols"].as_array().unwrap().len(), 3);

    let d = stdout_json(&cli(&data, &["detail", "S001", "--corpus", &id]));
    assert_eq!(d["study_id"], "S001");

    let runs_arg = format!("{},{}", a["run_id"].as_str().unwrap(), run_b);
    let s = stdout_json(&cli(&data, &["stability", "--runs", &runs_arg]));
    assert_eq!(s["mean_ari"], 1.0);

    let bundle = work.join("bundle.json");
    stdout_json(&cli(&data, &["export", "--out", bundle.to_str().unwrap()]));
    let imported = stdout_json(&cli(&other, &["import", bundle.to_str().unwrap()]));
    assert_eq!(imported["corpus_id"], id.as_str());
    let q2 = cli(&other, &["query", "--filter", filter]);
    assert_eq!(q.stdout, q2.stdout);
    let l1 = cli(&data, &["export"]).stdout;
    let l2 = cli(&other, &["export"]).stdout;
    let parse = |b: &[u8]| evatlas::bundle::Bundle::from_json(std::str::from_utf8(b).unwrap()).unwrap();
    assert_eq!(evatlas::bundle::masked(&parse(&l1)), evatlas::bundle::masked(&parse(&l2)));
}
