use std::path::PathBuf;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use levers_core::model::parse_graph;
use levers_core::{analyze, Budget, ControllabilityScale};
use levers_service::{router, AppState, Config};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn app(dir: &tempfile::TempDir) -> Router {
    router(AppState::open(&Config::new(dir.path())).unwrap())
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap()
    }
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<&str>, headers: &[(&str, &str)]) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let body = body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty);
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, bytes }
}

async fn post_graph(app: &Router, doc: &str) -> String {
    let r = send(app, "POST", "/graphs", Some(doc), &[]).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
    r.json()["id"].as_str().unwrap().to_string()
}

async fn wait_for(app: &Router, job: &str) -> Value {
    for _ in 0..500 {
        let view = send(app, "GET", &format!("/analyses/{job}"), None, &[]).await.json();
        if !matches!(view["status"].as_str(), Some("queued" | "running")) {
            return view;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("analysis {job} did not finish");
}

async fn analyze_via_api(app: &Router, graph: &str, body: &str) -> (String, Value) {
    let r = send(app, "POST", &format!("/graphs/{graph}/analyses"), Some(body), &[]).await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&r.bytes));
    let job = r.json()["id"].as_str().unwrap().to_string();
    let view = wait_for(app, &job).await;
    (job, view)
}

#[tokio::test]
async fn create_and_fetch_graph() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let r = send(&app, "POST", "/graphs", Some(&fixture("star.json")), &[]).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.headers["x-levers-schema-version"], "1");
    assert_eq!(r.json()["version"], 1);
    let id = r.json()["id"].as_str().unwrap().to_string();

    let got = send(&app, "GET", &format!("/graphs/{id}"), None, &[]).await;
    assert_eq!(got.status, StatusCode::OK);
    assert_eq!(got.headers[header::ETAG], "\"1\"");
    let doc = got.json()["graph"].to_string();
    assert_eq!(parse_graph(&doc).unwrap(), parse_graph(&fixture("star.json")).unwrap());

    let list = send(&app, "GET", "/graphs", None, &[]).await.json();
    assert_eq!(list["graphs"][0]["title"], "star");
}

#[tokio::test]
async fn duplicate_influence_is_rejected_with_its_pair() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let doc = json!({
        "schema_version": "1",
        "factors": [{"id": "a", "name": "A"}, {"id": "b", "name": "B"}],
        "influences": [
            {"source": "a", "target": "b", "sign": "positive", "strength": "weak"},
            {"source": "a", "target": "b", "sign": "negative", "strength": "strong"}
        ]
    });
    let r = send(&app, "POST", "/graphs", Some(&doc.to_string()), &[]).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let err = &r.json()["error"];
    assert_eq!(err["code"], "SCHEMA");
    assert!(err["message"].as_str().unwrap().contains("(\"a\", \"b\")"), "{err}");
    assert!(err["path"].as_str().unwrap().starts_with("influences[1]"), "{err}");
}

#[tokio::test]
async fn malformed_json_is_a_bad_request() {
    let dir = tempfile::tempdir().unwrap();
    let r = send(&app(&dir), "POST", "/graphs", Some("{not json"), &[]).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    assert_eq!(r.json()["error"]["code"], "BAD_REQUEST");
}

#[tokio::test]
async fn put_needs_a_current_version() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("path.json")).await;
    let uri = format!("/graphs/{id}");
    let doc = fixture("star.json");

    let missing = send(&app, "PUT", &uri, Some(&doc), &[]).await;
    assert_eq!(missing.status, StatusCode::PRECONDITION_REQUIRED);

    let ok = send(&app, "PUT", &uri, Some(&doc), &[("if-match", "\"1\"")]).await;
    assert_eq!(ok.status, StatusCode::OK);
    assert_eq!(ok.json()["version"], 2);

    let stale = send(&app, "PUT", &uri, Some(&doc), &[("if-match", "1")]).await;
    assert_eq!(stale.status, StatusCode::CONFLICT);
    assert_eq!(stale.json()["error"]["code"], "VERSION_CONFLICT");

    let del = send(&app, "DELETE", &uri, None, &[("if-match", "2")]).await;
    assert_eq!(del.status, StatusCode::NO_CONTENT);
    assert_eq!(send(&app, "GET", &uri, None, &[]).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn racing_puts_have_one_winner() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("path.json")).await;
    for round in 1..=20u64 {
        let uri = format!("/graphs/{id}");
        let version = round.to_string();
        let (a, b) = {
            let (app1, app2) = (app.clone(), app.clone());
            let (u1, u2) = (uri.clone(), uri.clone());
            let (v1, v2) = (version.clone(), version.clone());
            let doc = fixture("star.json");
            let doc2 = doc.clone();
            tokio::join!(
                tokio::spawn(async move { send(&app1, "PUT", &u1, Some(&doc), &[("if-match", &v1)]).await.status }),
                tokio::spawn(async move { send(&app2, "PUT", &u2, Some(&doc2), &[("if-match", &v2)]).await.status }),
            )
        };
        let mut statuses = [a.unwrap(), b.unwrap()];
        statuses.sort();
        assert_eq!(statuses, [StatusCode::OK, StatusCode::CONFLICT], "round {round}");
    }
    let got = send(&app, "GET", &format!("/graphs/{id}"), None, &[]).await.json();
    assert_eq!(got["version"], 21);
}

#[tokio::test]
async fn path_analysis_matches_the_engine() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("path.json")).await;
    let (job, view) = analyze_via_api(&app, &id, "").await;
    assert_eq!(view["status"], "done");
    assert_eq!(view["graph_version"], 1);
    let members: Vec<Value> = view["result"]["configurations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["members"].clone())
        .collect();
    assert_eq!(members, vec![json!(["a"])]);

    let report = send(&app, "GET", &format!("/analyses/{job}/report"), None, &[]).await;
    let graph = parse_graph(&fixture("path.json")).unwrap();
    let local = analyze(&graph, &Budget::default(), None, &ControllabilityScale::default()).unwrap();
    assert_eq!(String::from_utf8(report.bytes).unwrap(), local.to_json());
}

#[tokio::test]
async fn same_version_and_budget_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("humber_nonlocal.json")).await;
    let body = r#"{"budget": {"max_configs": 100}, "perspective": "Industry"}"#;
    let (a, _) = analyze_via_api(&app, &id, body).await;
    let (b, _) = analyze_via_api(&app, &id, body).await;
    let ra = send(&app, "GET", &format!("/analyses/{a}/report"), None, &[]).await.bytes;
    let rb = send(&app, "GET", &format!("/analyses/{b}/report"), None, &[]).await.bytes;
    assert_eq!(ra, rb);
    let report: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(report["perspective"], "Industry");
}

#[tokio::test]
async fn self_loops_are_rejected_before_queueing() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("self_loop.json")).await;
    let r = send(&app, "POST", &format!("/graphs/{id}/analyses"), Some("{}"), &[]).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["code"], "SELF_LOOPS");
    assert_eq!(r.json()["error"]["ids"], json!(["a"]));
    let jobs = send(&app, "GET", "/analyses", None, &[]).await.json();
    assert_eq!(jobs["analyses"], json!([]));
}

#[tokio::test]
async fn unknown_perspective_label_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("star.json")).await;
    let r = send(&app, "POST", &format!("/graphs/{id}/analyses"), Some(r#"{"perspective": "nope"}"#), &[]).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["code"], "UNKNOWN_PERSPECTIVE");
}

#[tokio::test]
async fn restart_keeps_graphs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (id, job, graph_before, report_before) = {
        let app = app(&dir);
        let id = post_graph(&app, &fixture("star.json")).await;
        let (job, _) = analyze_via_api(&app, &id, r#"{"perspective": "cautious"}"#).await;
        let graph = send(&app, "GET", &format!("/graphs/{id}"), None, &[]).await.bytes;
        let report = send(&app, "GET", &format!("/analyses/{job}/report"), None, &[]).await.bytes;
        (id, job, graph, report)
    };

    let app = app(&dir);
    assert_eq!(send(&app, "GET", &format!("/graphs/{id}"), None, &[]).await.bytes, graph_before);
    assert_eq!(
        send(&app, "GET", &format!("/analyses/{job}/report"), None, &[]).await.bytes,
        report_before
    );
    let view = send(&app, "GET", &format!("/analyses/{job}"), None, &[]).await.json();
    assert_eq!(view["status"], "done");
    assert_eq!(view["perspective"], "cautious");
}

#[tokio::test]
async fn finished_jobs_cannot_be_cancelled() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("path.json")).await;
    let (job, _) = analyze_via_api(&app, &id, "").await;
    let r = send(&app, "DELETE", &format!("/analyses/{job}"), None, &[]).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"]["code"], "JOB_FINISHED");
}

#[tokio::test]
async fn dynamics_converge_and_cap_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("cycle.json")).await;
    let uri = format!("/graphs/{id}/dynamics");
    let r = send(&app, "POST", &uri, Some(r#"{"mapping": "sigmoid", "max_iter": 1000000000}"#), &[]).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
    let body = r.json();
    assert_eq!(body["max_iter"], 100_000);
    assert_eq!(body["converged"], true);
    assert_eq!(body["ranking"].as_array().unwrap().len(), 2);

    let r = send(&app, "POST", &uri, Some(r#"{"mapping": "linear", "x0": {"zz": 1.0}}"#), &[]).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"]["code"], "UNKNOWN_FACTOR");

    let r = send(&app, "POST", &uri, Some(r#"{"mapping": "sigmoid", "lambda": -1}"#), &[]).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn perspective_comparison_by_label_and_inline() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let id = post_graph(&app, &fixture("star.json")).await;
    let body = json!({
        "graph": id,
        "p1": "cautious",
        "p2": {"label": "custom", "overrides": {"a": "hard"}}
    });
    let r = send(&app, "POST", "/compare/perspectives", Some(&body.to_string()), &[]).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
    let diff = r.json();
    let disagreeing: Vec<&str> = diff["disagreements"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["factor"].as_str().unwrap())
        .collect();
    assert_eq!(disagreeing, ["a", "c"]);
    assert_eq!(diff["first"]["ranked"].as_array().unwrap().len(), 2);

    let inline = json!({
        "graph": serde_json::from_str::<Value>(&fixture("star.json")).unwrap(),
        "p1": "cautious",
        "p2": "optimistic"
    });
    let r = send(&app, "POST", "/compare/perspectives", Some(&inline.to_string()), &[]).await;
    assert_eq!(r.status, StatusCode::OK);
}

#[tokio::test]
async fn scenario_comparison_accepts_jobs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&dir);
    let a = post_graph(&app, &fixture("humber_nonlocal.json")).await;
    let (job_a, _) = analyze_via_api(&app, &a, "").await;
    let local = parse_graph(&fixture("humber_local.json")).unwrap();
    let report_b = analyze(&local, &Budget::default(), None, &ControllabilityScale::default()).unwrap();
    let body = json!({ "analysisA": job_a, "analysisB": report_b });
    let r = send(&app, "POST", "/compare/scenarios", Some(&body.to_string()), &[]).await;
    assert_eq!(r.status, StatusCode::OK, "{}", String::from_utf8_lossy(&r.bytes));
    let diff = r.json();
    assert_eq!(diff["first"]["configuration_size"], 6);
    assert_eq!(diff["second"]["configuration_size"], 5);
}

#[tokio::test]
async fn bearer_token_guards_every_route() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = Config::new(dir.path());
    config.token = Some("s3cret".into());
    let app = router(AppState::open(&config).unwrap());
    let denied = send(&app, "GET", "/graphs", None, &[]).await;
    assert_eq!(denied.status, StatusCode::UNAUTHORIZED);
    assert_eq!(denied.headers["x-levers-schema-version"], "1");
    let wrong = send(&app, "GET", "/graphs", None, &[("authorization", "Bearer nope")]).await;
    assert_eq!(wrong.status, StatusCode::UNAUTHORIZED);
    let ok = send(&app, "GET", "/graphs", None, &[("authorization", "Bearer s3cret")]).await;
    assert_eq!(ok.status, StatusCode::OK);
}
