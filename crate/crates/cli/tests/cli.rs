use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::Duration;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use levers_service::{router, AppState, Config};
use serde_json::Value;
use tower::ServiceExt;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn levers(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levers")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_path_fixture() {
    let out = levers(&["analyze", path_str(&fixture("path.json"))]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["configurations"].as_array().unwrap().len(), 1);
    assert_eq!(report["configurations"][0]["members"], serde_json::json!(["a"]));
    assert_eq!(report["D"], 1);
}

#[test]
fn classify_star_fixture() {
    let out = levers(&["classify", path_str(&fixture("star.json")), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let c: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(c["always"], serde_json::json!(["a"]));
    assert_eq!(c["sometimes"], serde_json::json!(["b", "c"]));
    assert_eq!(c["never"], serde_json::json!([]));

    let table = stdout(&levers(&["classify", path_str(&fixture("star.json"))]));
    assert!(table.lines().any(|l| l.starts_with('a') && l.ends_with("always")), "{table}");
}

#[test]
fn self_loops_exit_with_two() {
    let out = levers(&["analyze", path_str(&fixture("self_loop.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("self-loops present on a"), "{}", stderr(&out));
}

#[test]
fn truncation_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = levers(&[
        "analyze",
        path_str(&fixture("star.json")),
        "--budget-configs",
        "1",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["truncated"], true);
    assert_eq!(r["truncation_reason"], "max_configs");
}

#[test]
fn schema_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"factors": [{"id": "a", "name": "A", "controllability": "trivial"}]}"#).unwrap();
    let out = levers(&["analyze", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("factors[0].controllability"), "{}", stderr(&out));
}

#[test]
fn rank_rescores_under_a_perspective() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let graph = fixture("star.json");
    assert!(levers(&["analyze", path_str(&graph), "--out", path_str(&report)]).status.success());

    let stored = stdout(&levers(&["rank", path_str(&report), "--csv"]));
    assert_eq!(stored, "rank,score,members,warnings\n1,3,a;c,\n2,4,a;b,\n");

    let optimistic = stdout(&levers(&[
        "rank",
        path_str(&report),
        "--graph",
        path_str(&graph),
        "--perspective",
        "optimistic",
        "--csv",
    ]));
    assert_eq!(optimistic, "rank,score,members,warnings\n1,2,a;b,\n2,3,a;c,\n");

    let missing_graph = levers(&["rank", path_str(&report), "--perspective", "optimistic"]);
    assert!(!missing_graph.status.success());
}

#[test]
fn simulate_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let out = levers(&[
        "simulate",
        path_str(&fixture("cycle.json")),
        "--mapping",
        "sigmoid",
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("converged"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("A,B"));
    assert!(text.lines().nth(1).unwrap().starts_with("0.5,0.5"));
}

#[test]
fn scenario_and_perspective_comparisons() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(levers(&["analyze", path_str(&fixture("humber_nonlocal.json")), "--out", path_str(&a)]).status.success());
    assert!(levers(&["analyze", path_str(&fixture("humber_local.json")), "--out", path_str(&b)]).status.success());
    let out = levers(&["compare-scenarios", path_str(&a), path_str(&b), "--json"]);
    let diff: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(diff["first"]["configuration_count"], 6);
    assert_eq!(diff["second"]["configuration_count"], 3);
    assert!(diff["only_first"].as_array().unwrap().contains(&Value::from("land-feedstock")));

    let out = levers(&[
        "compare-perspectives",
        path_str(&fixture("humber_nonlocal.json")),
        "Local authority",
        "Industry",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let diff: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(diff["disagreements"].as_array().unwrap().len(), 3);
}

#[test]
fn export_dot_shades_the_best_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let graph = fixture("star.json");
    assert!(levers(&["analyze", path_str(&graph), "--out", path_str(&report)]).status.success());
    let dot = stdout(&levers(&["export-dot", path_str(&graph), "--report", path_str(&report)]));
    assert!(dot.starts_with("digraph"));
    assert!(dot.lines().any(|l| l.contains("\"c\"") && l.contains("fillcolor=grey")), "{dot}");
    assert!(dot.lines().any(|l| l.contains("\"b\"") && !l.contains("fillcolor")), "{dot}");
}

#[tokio::test]
async fn cli_report_is_byte_identical_to_the_service_report() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::open(&Config::new(dir.path().join("data"))).unwrap());
    for name in ["path.json", "star.json", "humber_nonlocal.json"] {
        let doc = std::fs::read_to_string(fixture(name)).unwrap();
        let local = dir.path().join(format!("cli-{name}"));
        let out = levers(&["analyze", path_str(&fixture(name)), "--budget-configs", "500", "--out", path_str(&local)]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

        let created = call(&app, "POST", "/graphs", doc).await;
        let id = created["id"].as_str().unwrap().to_string();
        let job = call(&app, "POST", &format!("/graphs/{id}/analyses"), r#"{"budget": {"max_configs": 500}}"#.into()).await;
        let job = job["id"].as_str().unwrap().to_string();
        loop {
            let view = call(&app, "GET", &format!("/analyses/{job}"), String::new()).await;
            if view["status"] == "done" {
                break;
            }
            assert!(matches!(view["status"].as_str(), Some("queued" | "running")), "{view}");
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        let req = Request::get(format!("/analyses/{job}/report")).body(Body::empty()).unwrap();
        let res = app.clone().oneshot(req).await.unwrap();
        let served = res.into_body().collect().await.unwrap().to_bytes();
        assert_eq!(served.as_ref(), std::fs::read(&local).unwrap().as_slice(), "{name}");
    }
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: String) -> Value {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    serde_json::from_slice(&res.into_body().collect().await.unwrap().to_bytes()).unwrap()
}
