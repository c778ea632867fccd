mod common;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use biomotion_arena::App;
use biomotion_core::arena::{read_vote_log, replay, EloConfig, Vote};
use biomotion_core::motion::{Action, MotionSpec};
use common::{options, seed_store, MODELS};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(router: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn battle(router: &Router) -> Value {
    let (status, body) = call(router, "GET", "/api/battle", None).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    json_of(&body)
}

async fn vote(router: &Router, id: &Value, vote: &str) -> (StatusCode, Value) {
    let (status, body) =
        call(router, "POST", "/api/vote", Some(json!({"battle_id": id, "vote": vote, "rater_id": "r1"}))).await;
    (status, json_of(&body))
}

fn specs() -> Vec<MotionSpec> {
    vec![MotionSpec::basic(Action::Walking), MotionSpec::basic(Action::Bowing)]
}

#[tokio::test]
async fn empty_arena() {
    let dir = tempfile::tempdir().unwrap();
    let app = App::open(&options(dir.path())).await.unwrap();
    let r = app.router();
    let (status, body) = call(&r, "GET", "/api/leaderboard", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"[]\n");
    let (status, body) = call(&r, "GET", "/api/battle", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(json_of(&body)["error"], "insufficient_pool");
}

#[tokio::test]
async fn one_model_is_not_a_battle() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS[..1], &specs());
    let app = App::open(&options(dir.path())).await.unwrap();
    let (status, _) = call(&app.router(), "GET", "/api/battle", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn battles_are_anonymous_until_voted() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS, &specs());
    let app = App::open(&options(dir.path())).await.unwrap();
    let r = app.router();
    for _ in 0..25 {
        let (status, body) = call(&r, "GET", "/api/battle", None).await;
        assert_eq!(status, StatusCode::OK);
        let text = String::from_utf8(body.clone()).unwrap();
        for m in MODELS {
            assert!(!text.contains(m), "{m} leaked in {text}");
        }
        let view = json_of(&body);
        assert_eq!(view["vote_options"], json!(["A", "B", "tie", "both_bad"]));
        let urls: Vec<&str> = view["animations"].as_array().unwrap().iter().map(|a| a["media_url"].as_str().unwrap()).collect();
        assert_ne!(urls[0], urls[1]);
        for url in urls {
            let (status, gif) = call(&r, "GET", url, None).await;
            assert_eq!(status, StatusCode::OK);
            assert!(gif.starts_with(b"GIF8"));
            for m in MODELS {
                assert!(!gif.windows(m.len()).any(|w| w == m.as_bytes()));
            }
        }
    }
}

#[tokio::test]
async fn vote_reveals_and_updates() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS[..2], &specs());
    let app = App::open(&options(dir.path())).await.unwrap();
    let r = app.router();
    let b = battle(&r).await;
    let (status, ack) = vote(&r, &b["battle_id"], "A").await;
    assert_eq!(status, StatusCode::OK);
    let sides = ack["sides"].as_array().unwrap();
    assert_eq!(sides[0]["rating_before"], 1500.0);
    assert_eq!(sides[0]["rating_after"], 1516.0);
    assert_eq!(sides[1]["rating_after"], 1484.0);
    let winner = sides[0]["model_id"].as_str().unwrap().to_string();
    assert!(MODELS.contains(&winner.as_str()));

    let (status, body) = call(&r, "GET", "/api/leaderboard", None).await;
    assert_eq!(status, StatusCode::OK);
    let rows = json_of(&body);
    assert_eq!(rows[0]["model_id"], winner.as_str());
    assert_eq!(rows[0]["rank"], 1);
    assert_eq!(rows[0]["wins"], 1);
    assert_eq!(rows[1]["losses"], 1);

    let (status, again) = vote(&r, &b["battle_id"], "B").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(again["error"], "already_voted");
    assert_eq!(again["models"]["A"], winner.as_str());
    assert_eq!(app.votes().len(), 1);
}

#[tokio::test]
async fn bad_votes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS, &specs());
    let app = App::open(&options(dir.path())).await.unwrap();
    let r = app.router();
    let b = battle(&r).await;
    let (status, body) = vote(&r, &json!("no-such-battle"), "A").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_battle");
    for bad in ["C", "", "left wins!"] {
        let (status, _) = vote(&r, &b["battle_id"], bad).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad:?}");
    }
    let (status, _) = call(&r, "POST", "/api/vote", Some(json!({"vote": "A"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    // Rejections leave the battle open.
    let (status, _) = vote(&r, &b["battle_id"], "tie").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn both_bad_counts_but_does_not_move_ratings() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS[..2], &specs());
    let app = App::open(&options(dir.path())).await.unwrap();
    let r = app.router();
    let (_, ack) = vote(&r, &battle(&r).await["battle_id"], "both_bad").await;
    for side in ack["sides"].as_array().unwrap() {
        assert_eq!(side["rating_before"], side["rating_after"]);
    }
    let rows = json_of(&call(&r, "GET", "/api/leaderboard", None).await.1);
    for row in rows.as_array().unwrap() {
        assert_eq!(row["rating"], 1500.0);
        assert_eq!(row["both_bad"], 1);
        assert_eq!(row["battles_played"], 1);
    }
    let bb = json_of(&call(&r, "GET", "/api/analytics/bothbad", None).await.1);
    assert_eq!(bb["overall"]["num"], 1);
    assert_eq!(bb["overall"]["den"], 1);
    assert_eq!(bb["per_model"][MODELS[0]]["value"], 1.0);
}

#[tokio::test]
async fn analytics_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS[..2], &specs());
    let app = App::open(&options(dir.path())).await.unwrap();
    let r = app.router();
    let mut a_wins = 0;
    for v in ["A", "A", "B", "tie", "A"] {
        let (_, ack) = vote(&r, &battle(&r).await["battle_id"], v).await;
        if ack["sides"][0]["model_id"] == MODELS[0] && v == "A" || ack["sides"][1]["model_id"] == MODELS[0] && v == "B" {
            a_wins += 1;
        }
    }
    let m = json_of(&call(&r, "GET", "/api/analytics/winrate", None).await.1);
    assert_eq!(m["models"], json!([MODELS[1], MODELS[0]]));
    assert_eq!(m["cells"][1][0]["num"], a_wins);
    assert_eq!(m["cells"][1][0]["den"], 4);
    assert_eq!(m["cells"][0][0], Value::Null);
    let half = json_of(&call(&r, "GET", "/api/analytics/winrate?ties=half", None).await.1);
    assert_eq!(half["support"][0][1], 5);
    let (status, csv) = call(&r, "GET", "/api/analytics/winrate?format=csv", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(csv).unwrap().starts_with("model,"));
    let (status, _) = call(&r, "GET", "/api/analytics/winrate?kind=nonsense", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&r, "GET", "/api/analytics/actions?a=model-zeta", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let uri = format!("/api/analytics/actions?a={}&b={}", MODELS[0], MODELS[1]);
    let rows = json_of(&call(&r, "GET", &uri, None).await.1);
    let total: u64 = rows["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| ["wins", "losses", "ties", "both_bad"].iter().map(|k| r[k].as_u64().unwrap()).sum::<u64>())
        .sum();
    assert_eq!(total, 5);
}

#[tokio::test]
async fn unknown_media_is_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = App::open(&options(dir.path())).await.unwrap();
    let r = app.router();
    for uri in ["/api/media/0123abcd", "/api/media/..%2Fvotes.jsonl"] {
        let (status, _) = call(&r, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
}

#[tokio::test]
async fn restart_keeps_votes_and_open_battles() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS, &specs());
    let opts = options(dir.path());
    let (before, open) = {
        let app = App::open(&opts).await.unwrap();
        let r = app.router();
        for v in ["A", "B", "tie", "A", "both_bad", "B"] {
            vote(&r, &battle(&r).await["battle_id"], v).await;
        }
        let open = battle(&r).await;
        let before = call(&r, "GET", "/api/leaderboard", None).await.1;
        drop(r);
        app.shutdown().await;
        (before, open)
    };
    let app = App::open(&opts).await.unwrap();
    let r = app.router();
    assert_eq!(call(&r, "GET", "/api/leaderboard", None).await.1, before);
    let (status, _) = vote(&r, &open["battle_id"], "A").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(app.votes().len(), 7);

    let log = read_vote_log(&opts.vote_log).unwrap();
    assert_eq!(log.len(), 7);
    assert_eq!(replay(&log, &EloConfig::default()).unwrap(), *app.leaderboard());
}

#[tokio::test]
async fn identical_logs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS, &specs());
    let app = App::open(&options(dir.path())).await.unwrap();
    let r = app.router();
    for v in ["A", "B", "tie", "A", "A", "both_bad", "B", "A"] {
        vote(&r, &battle(&r).await["battle_id"], v).await;
    }
    let live = call(&r, "GET", "/api/leaderboard", None).await.1;

    let copy = tempfile::tempdir().unwrap();
    std::fs::copy(dir.path().join("votes.jsonl"), copy.path().join("votes.jsonl")).unwrap();
    for _ in 0..2 {
        let other = App::open(&options(copy.path())).await.unwrap();
        assert_eq!(call(&other.router(), "GET", "/api/leaderboard", None).await.1, live);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_votes_serialize() {
    let dir = tempfile::tempdir().unwrap();
    seed_store(&dir.path().join("store"), &MODELS, &specs());
    let opts = options(dir.path());
    let app = App::open(&opts).await.unwrap();
    let r = app.router();
    let mut ids = Vec::new();
    for _ in 0..40 {
        ids.push(battle(&r).await["battle_id"].clone());
    }
    let mut tasks = tokio::task::JoinSet::new();
    for (i, id) in ids.into_iter().enumerate() {
        let r = r.clone();
        tasks.spawn(async move {
            let v = ["A", "B", "tie", "both_bad"][i % 4];
            vote(&r, &id, v).await.0
        });
    }
    while let Some(status) = tasks.join_next().await {
        assert_eq!(status.unwrap(), StatusCode::OK);
    }
    let log = read_vote_log(&opts.vote_log).unwrap();
    assert_eq!(log.len(), 40);
    assert!(log.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    assert_eq!(log.iter().filter(|r| r.vote == Some(Vote::BothBad)).count(), 10);
    assert_eq!(replay(&log, &EloConfig::default()).unwrap(), *app.leaderboard());
}
