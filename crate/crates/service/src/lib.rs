//! HTTP/JSON sessions in which a human plays B against the strategy for A.
//!
//! Routes:
//! - `POST /sessions` creates a game and returns `R0`, `alpha` and a legal first move.
//! - `GET /sessions/{id}` returns the full state.
//! - `POST /sessions/{id}/move` submits B's ball and returns A's reply.
//! - `GET /sessions/{id}/transcript` returns a replayable transcript.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use quadba::badness::badness_margin;
use quadba::game::{
    Ball, BallSpec, Certificate, ChartFrame, DangerPoint, GameConfig, GameSession, Rules, Snapshot, Transcript,
};
use quadba::geometry::sample_surface_point;
use quadba::rational::parse_rational;
use quadba::QuadraticForm;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Mutex;

pub use error::ApiError;

/// Lattice points beyond this sup norm are not scanned for `margin_so_far`.
pub const MARGIN_SCAN_CAP: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    AwaitingB,
    Finished,
    Aborted,
}

pub struct Session {
    pub id: String,
    pub game: GameSession,
    pub status: Status,
    pub created: u64,
    pub updated: u64,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Session>>>>>,
    snapshot_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(snapshot_dir: Option<PathBuf>) -> Self {
        AppState { sessions: Arc::default(), snapshot_dir }
    }

    /// The lock guarding one session; holding it makes concurrent moves fail with 409.
    pub fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().expect("session map poisoned").get(id).cloned()
    }

    fn insert(&self, s: Session) {
        let id = s.id.clone();
        self.sessions.write().expect("session map poisoned").insert(id, Arc::new(Mutex::new(s)));
    }
}

/// Body of `POST /sessions`. `form` is a coefficient string, or a symmetric matrix.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub form: Value,
    #[serde(default = "zero")]
    pub m: Value,
    #[serde(default = "classic")]
    pub variant: Rules,
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    pub eps: Option<f64>,
}

fn zero() -> Value {
    Value::from(0)
}

fn classic() -> Rules {
    Rules::Classic
}

fn default_rounds() -> usize {
    30
}

impl CreateRequest {
    pub fn config(&self) -> Result<GameConfig, ApiError> {
        let bad =
            |field: &str, e: String| ApiError::new(StatusCode::BAD_REQUEST, "validation", format!("{field}: {e}"));
        let form_text = match &self.form {
            Value::String(s) => s.clone(),
            v @ Value::Array(_) => v.to_string(),
            v => return Err(bad("form", format!("expected a string or a matrix, got {v}"))),
        };
        let form = QuadraticForm::parse(&form_text).map_err(|e| bad("form", e.to_string()))?;
        let m_text = match &self.m {
            Value::String(s) => s.clone(),
            Value::Number(n) if n.is_i64() => n.to_string(),
            v => return Err(bad("m", format!("expected an integer or a rational string, got {v}"))),
        };
        let m = parse_rational(&m_text).map_err(|e| bad("m", e.to_string()))?;
        let mut cfg = GameConfig::new(form, m, self.variant, self.beta, self.seed, self.rounds);
        if let Some(eps) = self.eps {
            cfg.eps = eps;
        }
        cfg.validate().map_err(|e| bad("config", e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub status: Status,
    pub r0: f64,
    pub alpha: f64,
    pub suggested_b1: BallSpec,
    pub constants: Snapshot,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MarginSoFar {
    /// Certified lower bound for the current A center.
    pub certificate: Certificate,
    /// Least `||x|| * dist(p(x), v)` over lattice points up to `n`.
    pub margin: Option<f64>,
    pub argmin: Option<Vec<i64>>,
    pub n: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MoveResponse {
    pub round: usize,
    pub status: Status,
    pub a_reply: Ball,
    pub danger_points: Vec<DangerPoint>,
    pub margin_so_far: Option<MarginSoFar>,
    pub chart_frame: Option<ChartFrame>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub status: Status,
    pub created: u64,
    pub updated: u64,
    pub round: usize,
    pub r0: f64,
    pub alpha: f64,
    pub transcript: Transcript,
    pub danger_points: Vec<DangerPoint>,
    pub chart_frame: Option<ChartFrame>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/move", post(submit))
        .route("/sessions/{id}/transcript", get(transcript))
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, snapshot_dir: Option<PathBuf>) -> std::io::Result<()> {
    if let Some(dir) = &snapshot_dir {
        tokio::fs::create_dir_all(dir).await?;
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(snapshot_dir))).await
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    r.map(|Json(v)| v).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "validation", e.body_text()))
}

fn blocking_failed(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

async fn create(
    State(state): State<AppState>,
    req: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let cfg = body(req)?.config()?;
    let game = tokio::task::spawn_blocking(move || GameSession::new(cfg)).await.map_err(blocking_failed)??;
    let mut rng = ChaCha8Rng::seed_from_u64(game.config().seed);
    let p = sample_surface_point(&game.config().form, &mut rng);
    let resp = CreateResponse {
        id: uuid::Uuid::new_v4().simple().to_string(),
        status: Status::AwaitingB,
        r0: game.r0(),
        alpha: game.alpha(),
        suggested_b1: BallSpec { center: p.coords, radius: 0.5 * game.r0(), round: Some(1) },
        constants: game.snapshot(),
    };
    let t = now();
    state.insert(Session { id: resp.id.clone(), game, status: Status::AwaitingB, created: t, updated: t });
    Ok((StatusCode::CREATED, Json(resp)))
}

fn view(s: &Session) -> Result<SessionView, ApiError> {
    Ok(SessionView {
        id: s.id.clone(),
        status: s.status,
        created: s.created,
        updated: s.updated,
        round: s.game.rounds(),
        r0: s.game.r0(),
        alpha: s.game.alpha(),
        transcript: s.game.transcript(),
        danger_points: s.game.danger_points()?,
        chart_frame: s.game.chart_frame()?,
    })
}

async fn show(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let s = state.session(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let s = s.lock().await;
    Ok(Json(view(&s)?))
}

async fn transcript(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Transcript>, ApiError> {
    let s = state.session(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let s = s.lock().await;
    Ok(Json(s.game.transcript()))
}

fn margin_so_far(game: &GameSession) -> quadba::Result<Option<MarginSoFar>> {
    let Some(cert) = game.certificate() else { return Ok(None) };
    let n = (cert.sup_bound as u64).clamp(1, MARGIN_SCAN_CAP);
    let cfg = game.config();
    let m = badness_margin(&cfg.form, &cfg.m, &cert.v, 1.0, n)?;
    Ok(Some(MarginSoFar { certificate: cert, margin: m.margin, argmin: m.argmin, n }))
}

async fn submit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Result<Json<BallSpec>, JsonRejection>,
) -> Result<Json<MoveResponse>, ApiError> {
    let spec = body(req)?;
    let handle = state.session(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let mut guard = handle.try_lock_owned().map_err(|_| ApiError::busy())?;
    let snapshot_dir = state.snapshot_dir.clone();
    tokio::task::spawn_blocking(move || {
        let s = &mut *guard;
        if s.status == Status::Aborted {
            return Err(ApiError::new(StatusCode::CONFLICT, "aborted", "the session was aborted"));
        }
        let a_reply = match s.game.play_b(&spec) {
            Ok(a) => a.clone(),
            Err(e @ quadba::Error::Invariant(_)) => {
                s.status = Status::Aborted;
                return Err(e.into());
            }
            Err(e) => return Err(e.into()),
        };
        s.updated = now();
        if s.game.is_finished() {
            s.status = Status::Finished;
        }
        if let Some(dir) = snapshot_dir {
            let path = dir.join(format!("{}.json", s.id));
            std::fs::write(&path, s.game.transcript().to_json()).map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "snapshot", format!("{}: {e}", path.display()))
            })?;
        }
        Ok(Json(MoveResponse {
            round: s.game.rounds(),
            status: s.status,
            a_reply,
            danger_points: s.game.danger_points()?,
            margin_so_far: margin_so_far(&s.game)?,
            chart_frame: s.game.chart_frame()?,
        }))
    })
    .await
    .map_err(blocking_failed)?
}
