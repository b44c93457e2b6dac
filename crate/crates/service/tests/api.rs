use std::collections::BTreeSet;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use poachlab_core::analysis::stickiness;
use poachlab_core::io::read_log_jsonl;
use poachlab_core::{GameLog, Role, RoundOutcome};
use poachlab_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    router(AppState::open(dir.to_path_buf()).unwrap(), None).unwrap()
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn send_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, text) = send(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = send_json(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn play(app: &Router, id: &str, round: usize, site: usize) -> (StatusCode, Value) {
    send_json(app, Method::POST, &format!("/sessions/{id}/moves"), Some(json!({"round": round, "site": site}))).await
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn presets_and_descriptor() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, presets) = send_json(&app, Method::GET, "/presets", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(presets.as_array().unwrap().len(), 4);
    assert_eq!(presets[2], json!({"id": "c", "distribution": [0.8, 0.3, 0.8, 0.3]}));

    let (status, desc) = send_json(&app, Method::POST, "/sessions", Some(json!({"preset": "b"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(desc["distribution"], json!([0.9, 0.6, 0.4, 0.9, 0.1]));
    assert_eq!(desc["n"], 5);
    assert_eq!(desc["horizon"], 100);
    assert_eq!(desc["ranger"], "pfa:M=100,s=0");
    assert!(desc["seed"].is_u64());
    assert!(desc["rules"].as_str().unwrap().contains("lose 1 point"));

    let (_, fresh) = send_json(&app, Method::GET, &format!("/sessions/{}", desc["id"].as_str().unwrap()), None).await;
    assert_eq!(fresh["round"], 0);
    assert_eq!(fresh["score"], 0);
    assert_eq!(fresh["history"], json!([]));
}

#[tokio::test]
async fn full_session_round_trips_through_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, json!({"preset": "c", "seed": 2024})).await;

    let mut rounds = Vec::new();
    let mut running = 0i64;
    for round in 1..=100 {
        // a scripted player: stay after scoring, move on otherwise
        let site = match rounds.last() {
            Some(RoundOutcome { poacher_site, poacher_utility: 1, .. }) => *poacher_site,
            Some(last) => (last.poacher_site + 1) % 4,
            None => 0,
        };
        let (status, result) = play(&app, &id, round, site).await;
        assert_eq!(status, StatusCode::OK, "{result}");
        assert_eq!(result["round"], round);
        assert_eq!(result["completed"], round == 100);
        let outcome: RoundOutcome = serde_json::from_value(result.clone()).unwrap();
        running += outcome.poacher_utility as i64;
        assert_eq!(result["score"], running);
        rounds.push(outcome);
        if round == 3 {
            let (_, view) = send_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
            assert_eq!(view["history"].as_array().unwrap().len(), 3);
        }
    }

    let (status, err) = play(&app, &id, 101, 0).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&err), "session_complete");

    let (_, view) = send_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(view["completed"], true);
    assert_eq!(view["round"], 100);
    let total: i64 = rounds.iter().map(|r| r.poacher_utility as i64).sum();
    assert_eq!(view["score"], total);

    let (status, text) = send(&app, Method::GET, &format!("/sessions/{id}/log"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(text.lines().count(), 101);
    let log = read_log_jsonl(text.as_bytes()).unwrap();
    log.check_invariants().unwrap();
    assert_eq!(log.rounds, rounds);
    assert_eq!(log.total_utility(Role::Poacher), total);
    assert_eq!(log.config.seed, 2024);

    let live = GameLog { rounds, ..log.clone() };
    assert_eq!(stickiness(&[log], Role::Poacher).unwrap(), stickiness(&[live], Role::Poacher).unwrap());
}

fn keys(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let path = format!("{prefix}.{k}");
                out.insert(path.clone());
                keys(child, &path, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|c| keys(c, &format!("{prefix}[]"), out)),
        _ => {}
    }
}

#[tokio::test]
async fn session_view_never_reveals_pending_ranger_action() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, json!({"preset": "a", "seed": 5, "horizon": 30})).await;
    let top: BTreeSet<String> =
        ["id", "distribution", "horizon", "ranger", "round", "score", "completed", "history"].map(|k| format!(".{k}")).into();
    let record: BTreeSet<String> = ["round", "poacher_site", "ranger_site", "rhino_present", "u_p", "u_r"]
        .map(|k| format!(".history[].{k}"))
        .into();
    for round in 1..=30 {
        let (_, view) = send_json(&app, Method::GET, &format!("/sessions/{id}"), None).await;
        let mut seen = BTreeSet::new();
        keys(&view, "", &mut seen);
        let allowed: BTreeSet<String> = top.union(&record).cloned().collect();
        assert!(seen.is_subset(&allowed), "unexpected fields {:?}", seen.difference(&allowed).collect::<Vec<_>>());
        assert!(!view.to_string().contains("seed"));
        let history = view["history"].as_array().unwrap();
        assert_eq!(history.len(), round - 1);
        assert!(history.iter().enumerate().all(|(i, r)| r["round"] == i + 1));
        play(&app, &id, round, round % 3).await;
    }
}

#[tokio::test]
async fn same_seed_same_moves_same_log() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut logs = Vec::new();
    for _ in 0..2 {
        let id = create(&app, json!({"distribution": [0.2, 0.4, 0.6, 0.8], "seed": 77, "ranger": "fp", "horizon": 20})).await;
        for round in 1..=20 {
            play(&app, &id, round, (round * 7) % 4).await;
        }
        logs.push(send(&app, Method::GET, &format!("/sessions/{id}/log"), None).await.1);
    }
    assert_eq!(logs[0], logs[1]);
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app, json!({"preset": "a", "horizon": 5})).await;

    let (status, err) = play(&app, &id, 1, 3).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&err), "invalid");

    assert_eq!(play(&app, &id, 1, 0).await.0, StatusCode::OK);
    let (status, err) = play(&app, &id, 1, 1).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(error_code(&err), "duplicate_round");
    let (status, err) = play(&app, &id, 5, 1).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&err), "unexpected_round");

    let (status, err) = play(&app, "nope", 1, 0).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&err), "unknown_session");

    let cases = [
        json!({"preset": "z"}),
        json!({"distribution": [1.5, 0.2]}),
        json!({"preset": "a", "distribution": [0.5, 0.5]}),
        json!({"preset": "a", "ranger": "pfa:M=0"}),
        json!({"preset": "a", "ranger": "human"}),
        json!({"preset": "a", "horizon": 0}),
        json!({"preset": "a", "colour": "red"}),
    ];
    for body in cases {
        let (status, err) = send_json(&app, Method::POST, "/sessions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert!(err["error"]["message"].is_string(), "{body}");
    }
    let (status, err) = send_json(&app, Method::POST, &format!("/sessions/{id}/moves"), Some(json!({"site": 0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(error_code(&err), "bad_request");
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(dir.path());
    let id = create(&first, json!({"preset": "d", "seed": 3, "horizon": 10})).await;
    for round in 1..=4 {
        play(&first, &id, round, 1).await;
    }
    let (_, before) = send_json(&first, Method::GET, &format!("/sessions/{id}"), None).await;

    let other_dir = tempfile::tempdir().unwrap();
    let reference = app(other_dir.path());
    let twin = create(&reference, json!({"preset": "d", "seed": 3, "horizon": 10})).await;
    for round in 1..=5 {
        play(&reference, &twin, round, 1).await;
    }

    let second = app(dir.path());
    let (_, after) = send_json(&second, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(before, after);
    let (status, resumed) = play(&second, &id, 5, 1).await;
    assert_eq!(status, StatusCode::OK);
    let (_, expected) = send_json(&reference, Method::GET, &format!("/sessions/{twin}"), None).await;
    assert_eq!(resumed["ranger_site"], expected["history"][4]["ranger_site"]);
}

#[tokio::test]
async fn cors_allows_configured_origin() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::open(dir.path().to_path_buf()).unwrap(), Some("http://localhost:5173")).unwrap();
    let req = Request::builder()
        .uri("/presets")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
}
