use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use quadba::constants::{ConstOptions, GeomConstants};
use quadba::game::{replay, BallSpec, GameConfig, GameSession, PlayerB, Rules, Transcript};
use quadba::rational::int;
use quadba::QuadraticForm;
use quadba_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn cone_config(seed: u64) -> Value {
    json!({"form": "1,1,-1", "m": 0, "variant": "classic", "beta": 0.5, "seed": seed, "rounds": 30})
}

async fn create(app: &Router, cfg: Value) -> Value {
    let (s, v) = call(app, "POST", "/sessions", Some(cfg)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v
}

fn rule(v: &Value) -> &str {
    v["error"]["rule"].as_str().unwrap()
}

#[tokio::test]
async fn create_reports_r0_and_a_legal_first_move() {
    let app = router(AppState::default());
    let v = create(&app, cone_config(3)).await;
    let q = QuadraticForm::parse("1,1,-1").unwrap();
    let k = GeomConstants::get(&q, &int(0), ConstOptions::default()).unwrap();
    assert_eq!(v["r0"].as_f64().unwrap(), k.r0);
    assert_eq!(v["alpha"].as_f64().unwrap(), k.alpha);
    let id = v["id"].as_str().unwrap();
    let (s, mv) = call(&app, "POST", &format!("/sessions/{id}/move"), Some(v["suggested_b1"].clone())).await;
    assert_eq!(s, StatusCode::OK, "{mv}");
    let b: f64 = v["suggested_b1"]["radius"].as_f64().unwrap();
    let a = mv["a_reply"]["radius"].as_f64().unwrap();
    assert!((a - k.alpha * b).abs() <= 1e-12 * a);
    assert_eq!(mv["round"], 1);
    assert!(mv["danger_points"].is_array());
    assert!(mv["chart_frame"]["tangent"].is_array());
}

#[tokio::test]
async fn invalid_configs_are_rejected() {
    let app = router(AppState::default());
    let mut bad_beta = cone_config(1);
    bad_beta["beta"] = json!(1.5);
    let (s, v) = call(&app, "POST", "/sessions", Some(bad_beta)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(rule(&v), "validation");
    assert!(v["error"]["detail"].as_str().unwrap().contains("beta"));

    let mut d1 = cone_config(1);
    d1["form"] = json!("1,-1");
    let (s, v) = call(&app, "POST", "/sessions", Some(d1)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"]["detail"].as_str().unwrap().contains("d >= 2"));

    let mut bad_form = cone_config(1);
    bad_form["form"] = json!("1,x,-1");
    let (s, v) = call(&app, "POST", "/sessions", Some(bad_form)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"]["detail"].as_str().unwrap().starts_with("form"));

    let (s, v) = call(&app, "POST", "/sessions", Some(json!({"form": "1,1,-1"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
}

#[tokio::test]
async fn matrix_forms_are_accepted() {
    let app = router(AppState::default());
    let cfg = json!({"form": [[0, 1, 0], [1, 0, 0], [0, 0, 1]], "m": "0", "beta": 0.5});
    let v = create(&app, cfg).await;
    assert!(v["r0"].as_f64().unwrap() > 0.0);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = router(AppState::default());
    for (m, uri) in [("GET", "/sessions/nope"), ("GET", "/sessions/nope/transcript")] {
        let (s, v) = call(&app, m, uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND);
        assert_eq!(rule(&v), "not-found");
    }
    let b = json!({"center": [1.0, 0.0, 1.0], "radius": 1e-9});
    let (s, _) = call(&app, "POST", "/sessions/nope/move", Some(b)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn rule_violations_name_the_rule() {
    let app = router(AppState::default());
    let v = create(&app, cone_config(5)).await;
    let id = v["id"].as_str().unwrap();
    let uri = format!("/sessions/{id}/move");
    let r0 = v["r0"].as_f64().unwrap();

    let too_big = json!({"center": [1.0, 0.0, 1.0], "radius": 2.0 * r0});
    let (s, e) = call(&app, "POST", &uri, Some(too_big)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(rule(&e), "R0");
    assert_eq!(e["error"]["legal_bounds"]["radius_max"].as_f64().unwrap(), r0);

    let off = json!({"center": [1.0, 1.0, 0.5], "radius": 0.5 * r0});
    let (s, e) = call(&app, "POST", &uri, Some(off)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(rule(&e), "center-off-variety");

    let (s, mv) = call(&app, "POST", &uri, Some(v["suggested_b1"].clone())).await;
    assert_eq!(s, StatusCode::OK);
    let a = &mv["a_reply"];
    let a_radius = a["radius"].as_f64().unwrap();
    let c: Vec<f64> = serde_json::from_value(a["center"].clone()).unwrap();

    // same center, too far out for the radius
    let far = json!({"center": [-c[0], -c[1], -c[2]], "radius": 0.5 * a_radius});
    let (s, e) = call(&app, "POST", &uri, Some(far)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(rule(&e), "nesting");
    let max_offset = e["error"]["legal_bounds"]["max_offset"].as_f64().unwrap();
    assert!((max_offset - 0.5 * a_radius).abs() <= 1e-12 * a_radius);

    let wrong_radius = json!({"center": c, "radius": 0.3 * a_radius});
    let (s, e) = call(&app, "POST", &uri, Some(wrong_radius)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(rule(&e), "radius-law");

    let stale = json!({"center": c, "radius": 0.5 * a_radius, "round": 1});
    let (s, e) = call(&app, "POST", &uri, Some(stale)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(rule(&e), "turn");

    let (s, _) = call(&app, "POST", &uri, Some(json!({"center": "nope"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn held_session_lock_gives_409() {
    let state = AppState::default();
    let app = router(state.clone());
    let v = create(&app, cone_config(2)).await;
    let id = v["id"].as_str().unwrap();
    let handle = state.session(id).unwrap();
    let guard = handle.lock().await;
    let (s, e) = call(&app, "POST", &format!("/sessions/{id}/move"), Some(v["suggested_b1"].clone())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(rule(&e), "busy");
    drop(guard);
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/move"), Some(v["suggested_b1"].clone())).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_moves_have_one_winner() {
    let app = router(AppState::default());
    let v = create(&app, cone_config(4)).await;
    let id = v["id"].as_str().unwrap();
    let uri = format!("/sessions/{id}/move");
    let b1 = v["suggested_b1"].clone();
    let (x, y) = tokio::join!(call(&app, "POST", &uri, Some(b1.clone())), call(&app, "POST", &uri, Some(b1)));
    let mut codes = [x.0, y.0];
    codes.sort();
    assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(state["round"], 1);
}

#[tokio::test]
async fn full_game_matches_the_engine_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(Some(dir.path().to_path_buf())));
    let v = create(&app, cone_config(11)).await;
    let id = v["id"].as_str().unwrap().to_string();
    let q = QuadraticForm::parse("1,1,-1").unwrap();
    let mut mirror = GameSession::new(GameConfig::new(q, int(0), Rules::Classic, 0.5, 11, 30)).unwrap();
    let mut player = PlayerB::random(11);
    let mut last = Value::Null;
    while !mirror.is_finished() {
        let spec: BallSpec = player.propose(&mirror).unwrap();
        let a = mirror.play_b(&spec).unwrap().clone();
        let (s, mv) =
            call(&app, "POST", &format!("/sessions/{id}/move"), Some(serde_json::to_value(&spec).unwrap())).await;
        assert_eq!(s, StatusCode::OK, "{mv}");
        assert_eq!(serde_json::from_value::<quadba::game::Ball>(mv["a_reply"].clone()).unwrap(), a);
        if mirror.rounds() >= 2 {
            let m = &mv["margin_so_far"];
            let c = m["certificate"]["c"].as_f64().unwrap();
            assert!(m["margin"].as_f64().is_none_or(|g| g >= c), "{m}");
        }
        last = mv;
    }
    assert_eq!(last["status"], "finished");
    assert!(last["margin_so_far"]["certificate"]["c"].as_f64().unwrap() > 0.0);

    let (s, t) = call(&app, "GET", &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(s, StatusCode::OK);
    let t: Transcript = serde_json::from_value(t).unwrap();
    assert_eq!(t, mirror.transcript());
    assert_eq!(replay(&t).unwrap().to_json(), t.to_json());
    let saved = std::fs::read_to_string(dir.path().join(format!("{id}.json"))).unwrap();
    assert_eq!(Transcript::from_json(&saved).unwrap(), t);

    let (s, e) =
        call(&app, "POST", &format!("/sessions/{id}/move"), Some(json!({"center": [1.0, 0.0, 1.0], "radius": 1e-30})))
            .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(rule(&e), "finished");

    let (_, view) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(view["status"], "finished");
    assert_eq!(view["round"], 30);
}
