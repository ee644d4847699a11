mod common;

use common::{cli, cli_round_trip, stdout_json};
use serde_json::Value;

fn stderr_json(out: &std::process::Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn every_subcommand_runs_headless() {
    let dir = tempfile::tempdir().unwrap();
    cli_round_trip(dir.path());
}

#[test]
fn errors_are_json_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");

    let out = cli(&data, &["query"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "BadRequest");

    let out = cli(&data, &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "Usage");

    let csv = dir.path().join("demo.csv");
    std::fs::write(&csv, evatlas::demo::DEMO_CSV).unwrap();
    stdout_json(&cli(&data, &["ingest", csv.to_str().unwrap()]));
    stdout_json(&cli(&data, &["topics", "--seed", "1"]));

    let out = cli(&data, &["query", "--filter", r#"{"facet_selections":{"Colour":["red"]}}"#]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "UnknownFacet");

    let out = cli(&data, &["stability", "--runs", "r-only"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn llm_topics_from_a_recorded_reply() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let csv = dir.path().join("demo.csv");
    std::fs::write(&csv, evatlas::demo::DEMO_CSV).unwrap();
    stdout_json(&cli(&data, &["ingest", csv.to_str().unwrap()]));

    let good = dir.path().join("good.txt");
    std::fs::write(&good, common::REPLY_TOPICS).unwrap();
    let out = stdout_json(&cli(&data, &["topics", "--backend", "llm", "--reply-file", good.to_str().unwrap()]));
    assert_eq!(out["topics"], 8);

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, common::REPLY_MALFORMED).unwrap();
    let out = cli(&data, &["topics", "--backend", "llm", "--reply-file", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "MalformedModelResponse");
    assert_eq!(err["raw_reply_saved"], true);

    let out = cli(&data, &["topics", "--backend", "llm"]);
    assert_eq!(out.status.code(), Some(1), "no key configured");
}

#[test]
fn demo_prints_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(dir.path(), &["demo"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), evatlas::demo::DEMO_CSV);
}
