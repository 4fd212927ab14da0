use std::path::{Path, PathBuf};

use axum::body::{Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const FACILITATOR: &str = "facilitator-secret";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn open(dir: &Path) -> Router {
    dewat_service::app(dir, FACILITATOR).expect("store opens")
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    token: Option<&str>,
    body: impl Into<Body>,
) -> (StatusCode, Bytes) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let resp = app
        .clone()
        .oneshot(req.body(body.into()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, bytes)
}

async fn call_json(
    app: &Router,
    method: Method,
    uri: &str,
    token: Option<&str>,
    body: Value,
) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, token, body.to_string()).await;
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn create_study(app: &Router, csv: String) -> String {
    let (status, bytes) = call(app, Method::POST, "/studies", Some(FACILITATOR), csv).await;
    assert_eq!(
        status,
        StatusCode::CREATED,
        "{}",
        String::from_utf8_lossy(&bytes)
    );
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    v["id"].as_str().unwrap().to_string()
}

fn dataset() -> String {
    std::fs::read_to_string(fixture("paper_tables.csv")).unwrap()
}

fn injection() -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture("table41_qual_cols.json")).unwrap())
        .unwrap()
}

fn ranking(report: &Value) -> Vec<String> {
    report["ranking"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["technology"].as_str().unwrap().to_string())
        .collect()
}

struct Panel {
    session: String,
    tokens: Vec<(String, String)>,
    items: Vec<Value>,
}

async fn create_session(app: &Router, study: &str, body: Value) -> Panel {
    let (status, v) = call_json(
        app,
        Method::POST,
        &format!("/studies/{study}/sessions"),
        Some(FACILITATOR),
        body,
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    Panel {
        session: v["session_id"].as_str().unwrap().to_string(),
        tokens: v["tokens"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| {
                (
                    t["expert"].as_str().unwrap().to_string(),
                    t["token"].as_str().unwrap().to_string(),
                )
            })
            .collect(),
        items: v["items"].as_array().unwrap().clone(),
    }
}

fn rating(item: &Value, value: i64, worse: &str) -> Value {
    json!({
        "criterion_id": item["criterion_id"],
        "tech_a": item["tech_a"],
        "tech_b": item["tech_b"],
        "value": value,
        "worse": worse,
    })
}

async fn submit(
    app: &Router,
    session: &str,
    token: &str,
    ratings: Vec<Value>,
) -> (StatusCode, Value) {
    call_json(
        app,
        Method::POST,
        &format!("/sessions/{session}/ratings"),
        Some(token),
        json!({ "ratings": ratings }),
    )
    .await
}

async fn facilitator_post(app: &Router, uri: &str) -> (StatusCode, Value) {
    call_json(app, Method::POST, uri, Some(FACILITATOR), json!({})).await
}

#[tokio::test]
async fn requests_without_valid_tokens_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let (status, _) = call(&app, Method::POST, "/studies", None, dataset()).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&app, Method::POST, "/studies", Some("guess"), dataset()).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);

    let (status, _) = call(&app, Method::GET, "/studies/nope", Some(FACILITATOR), "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(
        &app,
        Method::GET,
        "/sessions/nope/summary",
        Some(FACILITATOR),
        "",
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let study = create_study(&app, dataset()).await;
    let panel = create_session(
        &app,
        &study,
        json!({ "experts": ["e1", "e2"], "criteria": [1] }),
    )
    .await;
    let item = panel.items[0].clone();
    let (status, _) = submit(
        &app,
        &panel.session,
        "not-a-token",
        vec![rating(&item, 1, "a")],
    )
    .await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = facilitator_post(&app, &format!("/sessions/{}/advance", panel.session)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call_json(
        &app,
        Method::POST,
        &format!("/sessions/{}/close-round", panel.session),
        Some(&panel.tokens[0].1),
        json!({}),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::UNAUTHORIZED,
        "experts cannot close rounds"
    );
}

#[tokio::test]
async fn malformed_datasets_and_bodies_are_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let (status, v) = call_json(
        &app,
        Method::POST,
        "/studies",
        Some(FACILITATOR),
        json!("x"),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());

    let study = create_study(&app, dataset()).await;
    let uri = format!("/studies/{study}/sessions");
    let (status, _) = call(&app, Method::POST, &uri, Some(FACILITATOR), "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call_json(
        &app,
        Method::POST,
        &uri,
        Some(FACILITATOR),
        json!({ "experts": ["solo"] }),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::BAD_REQUEST,
        "a one-person panel is refused"
    );
    let (status, _) = call_json(
        &app,
        Method::POST,
        &uri,
        Some(FACILITATOR),
        json!({ "experts": ["a", "b"], "criteria": [5] }),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::BAD_REQUEST,
        "quantitative criteria are not rated"
    );

    let (status, _) = call_json(
        &app,
        Method::POST,
        &format!("/studies/{study}/run"),
        Some(FACILITATOR),
        json!({ "policy": "sometimes" }),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn injected_priorities_reproduce_case_study() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let study = create_study(&app, dataset()).await;

    let (status, _) = call(
        &app,
        Method::GET,
        &format!("/studies/{study}/report"),
        Some(FACILITATOR),
        "",
    )
    .await;
    assert_eq!(
        status,
        StatusCode::CONFLICT,
        "no report before the first run"
    );

    let body = json!({ "policy": "inject", "inject": injection() });
    let (status, bytes) = call(
        &app,
        Method::POST,
        &format!("/studies/{study}/run"),
        Some(FACILITATOR),
        body.to_string(),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::OK,
        "{}",
        String::from_utf8_lossy(&bytes)
    );
    let report: Value = serde_json::from_slice(&bytes).unwrap();
    let mut top = ranking(&report)[..3].to_vec();
    top.sort();
    assert_eq!(top, ["DHS", "MBBR", "MSL"]);
    assert_eq!(report["decision"]["reject_rows"], true);

    let (status, v) = call_json(
        &app,
        Method::POST,
        &format!("/studies/{study}/run"),
        Some(FACILITATOR),
        json!({ "inject": injection() }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(
        v["warnings"].as_array().unwrap().len(),
        3,
        "the default policy excludes the three missing cells"
    );
    assert_eq!(v["criteria"][4]["cells"][1]["flag"], "excluded");

    let (status, v) = call_json(
        &app,
        Method::POST,
        &format!("/studies/{study}/run"),
        Some(FACILITATOR),
        json!({ "policy": "exclude" }),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "no qualitative input: {v}");
}

#[tokio::test]
async fn delphi_session_through_report_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let study = create_study(&app, dataset()).await;
    let panel = create_session(
        &app,
        &study,
        json!({ "experts": ["alice", "bob"], "criteria": [1] }),
    )
    .await;
    assert_eq!(panel.items.len(), 21);
    let alice = panel.tokens[0].1.clone();
    let bob = panel.tokens[1].1.clone();
    let sid = panel.session.clone();

    let (status, _) = create_session_status(
        &app,
        &study,
        json!({ "experts": ["x", "y"], "criteria": [1, 2] }),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::CONFLICT,
        "criterion 1 is already covered"
    );

    let (status, v) = submit(&app, &sid, &alice, vec![rating(&panel.items[0], 6, "a")]).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("1..5"), "{v}");
    let (status, v) = submit(
        &app,
        &sid,
        &alice,
        vec![
            rating(&panel.items[0], 2, "a"),
            rating(&panel.items[1], 0, "a"),
        ],
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
    let (_, summary) = call_json(
        &app,
        Method::GET,
        &format!("/sessions/{sid}/summary"),
        Some(&alice),
        json!(null),
    )
    .await;
    assert!(
        summary["mine"]
            .as_array()
            .unwrap()
            .iter()
            .all(Value::is_null),
        "a rejected batch leaves nothing behind"
    );

    let all_equal: Vec<Value> = panel.items.iter().map(|i| rating(i, 1, "a")).collect();
    let (status, v) = submit(&app, &sid, &alice, all_equal.clone()).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["remaining"], 0);

    let (status, _) = facilitator_post(&app, &format!("/sessions/{sid}/close-round")).await;
    assert_eq!(status, StatusCode::CONFLICT, "bob has not rated yet");

    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/studies/{study}/run"),
        Some(FACILITATOR),
        "",
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "session has not converged");

    let mut bobs = all_equal.clone();
    bobs[0] = rating(&panel.items[0], 3, "a");
    let (status, _) = submit(&app, &sid, &bob, bobs).await;
    assert_eq!(status, StatusCode::OK);

    let (status, round) = facilitator_post(&app, &format!("/sessions/{sid}/close-round")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(round["round"], 1);
    assert_eq!(round["items"][0]["iqr"], 1.0);
    assert_eq!(round["items"][0]["unanimous"], false);
    let (_, adv) = facilitator_post(&app, &format!("/sessions/{sid}/advance")).await;
    assert_eq!(adv["state"], "collecting");
    assert_eq!(adv["round"], 2);

    // Carried-forward ratings complete the second round with no revisions.
    let (_, round) = facilitator_post(&app, &format!("/sessions/{sid}/close-round")).await;
    assert_eq!(round["round"], 2);
    let (_, adv) = facilitator_post(&app, &format!("/sessions/{sid}/advance")).await;
    assert_eq!(adv["state"], "converged");

    let (status, _) = submit(&app, &sid, &alice, vec![rating(&panel.items[0], 2, "a")]).await;
    assert_eq!(
        status,
        StatusCode::CONFLICT,
        "closed sessions take no ratings"
    );

    let mut inject = injection();
    let (status, _) = call_json(
        &app,
        Method::POST,
        &format!("/studies/{study}/run"),
        Some(FACILITATOR),
        json!({ "policy": "inject", "inject": inject.clone() }),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::BAD_REQUEST,
        "criterion 1 from two sources"
    );

    inject["qualitative"].as_object_mut().unwrap().remove("1");
    let run_body = json!({ "policy": "inject", "inject": inject }).to_string();
    let run_uri = format!("/studies/{study}/run");
    let (status, first) = call(
        &app,
        Method::POST,
        &run_uri,
        Some(FACILITATOR),
        run_body.clone(),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::OK,
        "{}",
        String::from_utf8_lossy(&first)
    );
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(ranking(&report).len(), 7);
    let consistency = report["consistency"].as_array().unwrap();
    assert_eq!(consistency.len(), 1);
    assert_eq!(consistency[0]["criterion_id"], 1);
    assert_eq!(consistency[0]["report"]["acceptable"], true);
    let sources = report["inputs"]["sources"].as_array().unwrap();
    assert_eq!(sources[1]["role"], "session");
    assert_eq!(sources[1]["path"], sid.as_str());

    let (_, second) = call(&app, Method::POST, &run_uri, Some(FACILITATOR), run_body).await;
    assert_eq!(first, second, "re-running is byte-identical");

    // Anonymity: no response names a panel member.
    let (_, fac_summary) = call(
        &app,
        Method::GET,
        &format!("/sessions/{sid}/summary"),
        Some(FACILITATOR),
        "",
    )
    .await;
    let (_, own_summary) = call(
        &app,
        Method::GET,
        &format!("/sessions/{sid}/summary"),
        Some(&bob),
        "",
    )
    .await;
    let (_, study_view) = call(
        &app,
        Method::GET,
        &format!("/studies/{study}"),
        Some(FACILITATOR),
        "",
    )
    .await;
    for body in [&first, &fac_summary, &own_summary, &study_view] {
        let text = String::from_utf8_lossy(body);
        assert!(!text.contains("alice") && !text.contains("bob"), "{text}");
    }
    let fac: Value = serde_json::from_slice(&fac_summary).unwrap();
    assert!(fac.get("mine").is_none());
    assert_eq!(fac["history"].as_array().unwrap().len(), 2);
    let own: Value = serde_json::from_slice(&own_summary).unwrap();
    assert_eq!(own["mine"][0]["value"], 3);

    // A fresh process over the same directory serves the same state.
    drop(app);
    let app = open(dir.path());
    let (status, stored) = call(
        &app,
        Method::GET,
        &format!("/studies/{study}/report"),
        Some(FACILITATOR),
        "",
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stored, first);
    let (_, summary) = call_json(
        &app,
        Method::GET,
        &format!("/sessions/{sid}/summary"),
        Some(&alice),
        json!(null),
    )
    .await;
    assert_eq!(summary["state"], "converged");
    assert_eq!(summary["mine"][0]["value"], 1);
}

async fn create_session_status(app: &Router, study: &str, body: Value) -> (StatusCode, Value) {
    call_json(
        app,
        Method::POST,
        &format!("/studies/{study}/sessions"),
        Some(FACILITATOR),
        body,
    )
    .await
}

#[tokio::test]
async fn inconsistent_consensus_is_gated() {
    let dir = tempfile::tempdir().unwrap();
    let app = open(dir.path());
    let mut csv = String::from("technology,parameter,min,max\n");
    for t in ["A", "B", "C"] {
        for p in ["COD_t", "BOD5", "TSS", "NH4N", "TP", "HRT"] {
            csv.push_str(&format!("{t},{p},1,2\n"));
        }
    }
    let study = create_study(&app, csv).await;
    let panel = create_session(&app, &study, json!({ "experts": ["p", "q", "r"] })).await;
    assert_eq!(panel.items.len(), 12);
    let ratings: Vec<Value> = panel
        .items
        .iter()
        .map(|item| {
            let pair = (
                item["tech_a"].as_str().unwrap(),
                item["tech_b"].as_str().unwrap(),
            );
            match (item["criterion_id"].as_u64().unwrap(), pair) {
                (2, ("A", "B")) => rating(item, 2, "a"),
                (2, ("A", "C")) => rating(item, 5, "a"),
                (2, ("B", "C")) => rating(item, 2, "b"),
                _ => rating(item, 1, "a"),
            }
        })
        .collect();
    for (_, token) in &panel.tokens {
        let (status, _) = submit(&app, &panel.session, token, ratings.clone()).await;
        assert_eq!(status, StatusCode::OK);
    }
    facilitator_post(&app, &format!("/sessions/{}/close-round", panel.session)).await;
    let (_, adv) = facilitator_post(&app, &format!("/sessions/{}/advance", panel.session)).await;
    assert_eq!(adv["state"], "converged", "unanimous first round");

    let uri = format!("/studies/{study}/run");
    let (status, v) = call_json(&app, Method::POST, &uri, Some(FACILITATOR), json!({})).await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");
    let failures = v["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["criterion_id"], 2);
    assert!(failures[0]["cr"].as_f64().unwrap() >= 0.1);

    let (status, v) = call_json(
        &app,
        Method::POST,
        &uri,
        Some(FACILITATOR),
        json!({ "allow_inconsistent": true }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["consistency"][1]["report"]["acceptable"], false);
    assert!(v["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w.as_str().unwrap().contains("overrid")));
}
