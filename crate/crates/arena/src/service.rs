//! HTTP API over the arena.
//!
//! All writes (pending battles and votes) go through one writer task that owns
//! the vote log; the leaderboard is published to readers through a watch
//! channel and the voted records through a shared read-mostly list.

use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use biomotion_core::analytics::{
    both_bad_rate, per_action_breakdown, win_rate_matrix, Rate, TieTreatment, VariantKind, VoteFilter,
};
use biomotion_core::arena::{
    read_vote_log, replay, sample_battle, Arena, ArenaError, BattleId, BattleRecord, EloConfig, JsonlVoteLog,
    LeaderboardState, PairingStrategy, Pool, PoolEntry, UniformPairs, Vote,
};
use biomotion_core::artifact::{ArtifactId, ArtifactStore};
use chrono::{DateTime, Duration, Utc};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot, watch};
use tracing::{info, warn};

/// Vote spellings offered to raters.
pub const VOTE_OPTIONS: [&str; 4] = ["A", "B", "tie", "both_bad"];

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub store: PathBuf,
    pub vote_log: PathBuf,
    pub battles: PathBuf,
    pub elo: EloConfig,
    pub seed: Option<u64>,
}

/// State rebuilt from disk at startup.
#[derive(Debug)]
pub struct Recovered {
    pub board: LeaderboardState,
    pub votes: Vec<BattleRecord>,
    pub pending: Vec<BattleRecord>,
}

fn read_pending(path: &Path) -> anyhow::Result<Vec<BattleRecord>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || !line.ends_with('\n') {
            break;
        }
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<BattleRecord>(&line) {
            Ok(r) => out.push(r),
            Err(e) => warn!(path = %path.display(), "skipping unreadable battle line: {e}"),
        }
    }
    Ok(out)
}

/// Replays the vote log and reloads battles that were served but never voted.
pub fn recover(vote_log: &Path, battles: &Path, elo: &EloConfig) -> anyhow::Result<Recovered> {
    let votes = read_vote_log(vote_log)?;
    let board = replay(&votes, elo)?;
    let pending = read_pending(battles)?
        .into_iter()
        .filter(|b| !board.contains_battle(&b.battle_id))
        .collect();
    Ok(Recovered { board, votes, pending })
}

/// The leaderboard export shared by the API and the `replay` command.
pub fn leaderboard_json(board: &LeaderboardState) -> String {
    let mut s = serde_json::to_string_pretty(&board.snapshot()).expect("leaderboard serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Animation {
    pub label: String,
    pub media_url: String,
}

/// What a rater sees before voting. Carries no model identity.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BattleView {
    pub battle_id: BattleId,
    pub prompt: String,
    pub animations: [Animation; 2],
    pub vote_options: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SideResult {
    pub label: String,
    pub model_id: String,
    pub rating_before: f64,
    pub rating_after: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VoteAck {
    pub battle_id: BattleId,
    pub vote: Vote,
    pub sides: [SideResult; 2],
}

enum VoteFailure {
    NotFound,
    Conflict(Box<BattleRecord>),
    Rejected(ArenaError),
}

enum Command {
    Register(BattleRecord, oneshot::Sender<std::io::Result<()>>),
    Vote {
        battle_id: BattleId,
        vote: Vote,
        rater_id: String,
        reply: oneshot::Sender<Result<VoteAck, VoteFailure>>,
    },
}

struct Writer {
    arena: Arena<JsonlVoteLog>,
    battles: File,
    pending: HashMap<BattleId, BattleRecord>,
    voted: HashMap<BattleId, usize>,
    votes: Arc<RwLock<Vec<BattleRecord>>>,
    board_tx: watch::Sender<Arc<LeaderboardState>>,
}

impl Writer {
    fn register(&mut self, record: BattleRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(&record).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.battles.write_all(&line)?;
        self.battles.sync_data()?;
        self.pending.insert(record.battle_id.clone(), record);
        Ok(())
    }

    fn next_timestamp(&self) -> DateTime<Utc> {
        let now = Utc::now();
        match self.arena.board().last_position() {
            Some((last, _)) if now <= *last => *last + Duration::microseconds(1),
            _ => now,
        }
    }

    fn vote(&mut self, battle_id: BattleId, vote: Vote, rater_id: String) -> Result<VoteAck, VoteFailure> {
        if let Some(&i) = self.voted.get(&battle_id) {
            let votes = self.votes.read().unwrap_or_else(|p| p.into_inner());
            return Err(VoteFailure::Conflict(Box::new(votes[i].clone())));
        }
        let Some(pending) = self.pending.get(&battle_id) else {
            return Err(VoteFailure::NotFound);
        };
        let mut record = pending.clone();
        record.vote = Some(vote);
        record.rater_id = rater_id;
        record.timestamp = self.next_timestamp();
        let (lm, rm) = (record.left_model.clone(), record.right_model.clone());
        let before = (self.arena.board().rating(&lm), self.arena.board().rating(&rm));
        let effect = self.arena.ingest(&record).map_err(VoteFailure::Rejected)?;
        self.pending.remove(&battle_id);
        {
            let mut votes = self.votes.write().unwrap_or_else(|p| p.into_inner());
            self.voted.insert(battle_id.clone(), votes.len());
            votes.push(record);
        }
        self.board_tx.send_replace(Arc::new(self.arena.board().clone()));
        Ok(VoteAck {
            battle_id,
            vote,
            sides: [
                SideResult { label: "A".into(), model_id: lm, rating_before: before.0, rating_after: effect.left.rating },
                SideResult { label: "B".into(), model_id: rm, rating_before: before.1, rating_after: effect.right.rating },
            ],
        })
    }

    async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        while let Some(cmd) = rx.recv().await {
            match cmd {
                Command::Register(record, reply) => {
                    let _ = reply.send(self.register(record));
                }
                Command::Vote { battle_id, vote, rater_id, reply } => {
                    let _ = reply.send(self.vote(battle_id, vote, rater_id));
                }
            }
        }
    }
}

#[derive(Clone)]
struct AppState {
    store: Arc<ArtifactStore>,
    commands: mpsc::Sender<Command>,
    board: watch::Receiver<Arc<LeaderboardState>>,
    votes: Arc<RwLock<Vec<BattleRecord>>>,
    rng: Arc<Mutex<StdRng>>,
    strategy: Arc<dyn PairingStrategy>,
}

/// A running arena: the router plus handles onto its state.
pub struct App {
    state: AppState,
    writer: tokio::task::JoinHandle<()>,
}

impl App {
    /// Recovers from disk and starts the writer task.
    pub async fn open(opts: &ServiceOptions) -> anyhow::Result<App> {
        App::with_strategy(opts, Arc::new(UniformPairs)).await
    }

    pub async fn with_strategy(opts: &ServiceOptions, strategy: Arc<dyn PairingStrategy>) -> anyhow::Result<App> {
        opts.elo.validate().map_err(anyhow::Error::msg)?;
        let recovered = recover(&opts.vote_log, &opts.battles, &opts.elo)?;
        info!(
            votes = recovered.votes.len(),
            pending = recovered.pending.len(),
            "recovered arena state"
        );
        let store = Arc::new(ArtifactStore::open(&opts.store)?);
        let log = JsonlVoteLog::open(&opts.vote_log)?;
        let battles = open_append(&opts.battles)?;
        let voted = recovered.votes.iter().enumerate().map(|(i, r)| (r.battle_id.clone(), i)).collect();
        let votes = Arc::new(RwLock::new(recovered.votes));
        let (board_tx, board_rx) = watch::channel(Arc::new(recovered.board.clone()));
        let writer = Writer {
            arena: Arena::new(recovered.board, log),
            battles,
            pending: recovered.pending.into_iter().map(|b| (b.battle_id.clone(), b)).collect(),
            voted,
            votes: votes.clone(),
            board_tx,
        };
        let (tx, rx) = mpsc::channel(256);
        let writer = tokio::spawn(writer.run(rx));
        let rng = match opts.seed {
            Some(s) => StdRng::seed_from_u64(s),
            None => StdRng::from_os_rng(),
        };
        Ok(App {
            state: AppState {
                store,
                commands: tx,
                board: board_rx,
                votes,
                rng: Arc::new(Mutex::new(rng)),
                strategy,
            },
            writer,
        })
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/api/battle", get(get_battle))
            .route("/api/vote", post(post_vote))
            .route("/api/leaderboard", get(get_leaderboard))
            .route("/api/analytics/winrate", get(get_winrate))
            .route("/api/analytics/bothbad", get(get_bothbad))
            .route("/api/analytics/actions", get(get_actions))
            .route("/api/media/{artifact_id}", get(get_media))
            .with_state(self.state.clone())
    }

    pub fn leaderboard(&self) -> Arc<LeaderboardState> {
        self.state.board.borrow().clone()
    }

    pub fn votes(&self) -> Vec<BattleRecord> {
        self.state.votes.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Stops the writer once queued commands are done. Routers still holding
    /// state keep it alive until they are dropped.
    pub async fn shutdown(self) {
        drop(self.state);
        let _ = self.writer.await;
    }
}

fn open_append(path: &Path) -> std::io::Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file = OpenOptions::new().create(true).append(true).read(true).open(path)?;
    // Cut a torn final line so the next append starts on a fresh line.
    let bytes = std::fs::read(path)?;
    if !bytes.is_empty() && !bytes.ends_with(b"\n") {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        file.set_len(keep as u64)?;
    }
    Ok(file)
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(json!({"error": code, "message": message.into()}))).into_response()
}

fn internal(e: impl std::fmt::Display) -> Response {
    error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

fn load_pool(store: &ArtifactStore) -> anyhow::Result<Pool> {
    Ok(Pool::new(store.rendered()?.into_iter().map(|a| PoolEntry {
        artifact_id: a.artifact_id,
        model_id: a.model_id,
        spec_id: a.spec_id,
    })))
}

fn prompt_for(record: &BattleRecord) -> String {
    match record.spec_id.parse() {
        Ok(spec) => spec.description(),
        Err(_) => record.spec_id.to_string(),
    }
}

async fn get_battle(State(s): State<AppState>) -> Response {
    let store = s.store.clone();
    let pool = match tokio::task::spawn_blocking(move || load_pool(&store)).await {
        Ok(Ok(p)) => p,
        Ok(Err(e)) => return internal(e),
        Err(e) => return internal(e),
    };
    let record = {
        let mut rng = s.rng.lock().unwrap_or_else(|p| p.into_inner());
        sample_battle(&pool, s.strategy.as_ref(), &mut *rng, Utc::now())
    };
    let record = match record {
        Ok(r) => r,
        Err(ArenaError::InsufficientPool) => {
            return error(
                StatusCode::SERVICE_UNAVAILABLE,
                "insufficient_pool",
                "no spec has rendered artifacts from two different models yet",
            )
        }
        Err(e) => return internal(e),
    };
    let (tx, rx) = oneshot::channel();
    if s.commands.send(Command::Register(record.clone(), tx)).await.is_err() {
        return internal("arena writer stopped");
    }
    match rx.await {
        Ok(Ok(())) => {}
        Ok(Err(e)) => return internal(e),
        Err(e) => return internal(e),
    }
    let media = |id: &ArtifactId| format!("/api/media/{id}");
    Json(BattleView {
        prompt: prompt_for(&record),
        battle_id: record.battle_id.clone(),
        animations: [
            Animation { label: "A".into(), media_url: media(&record.left_artifact) },
            Animation { label: "B".into(), media_url: media(&record.right_artifact) },
        ],
        vote_options: VOTE_OPTIONS.iter().map(|s| s.to_string()).collect(),
    })
    .into_response()
}

#[derive(Debug, Deserialize)]
struct VoteRequest {
    battle_id: String,
    vote: String,
    #[serde(default)]
    rater_id: Option<String>,
}

fn reveal(record: &BattleRecord) -> Value {
    json!({"A": record.left_model, "B": record.right_model})
}

async fn post_vote(State(s): State<AppState>, body: axum::body::Bytes) -> Response {
    let req: VoteRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "validation", format!("bad vote body: {e}")),
    };
    let vote = match req.vote.as_str() {
        "A" | "a" => Vote::LeftWins,
        "B" | "b" => Vote::RightWins,
        other => match other.parse::<Vote>() {
            Ok(v @ (Vote::Tie | Vote::BothBad)) => v,
            _ => {
                return error(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "validation",
                    format!("vote must be one of {VOTE_OPTIONS:?}, got {:?}", req.vote),
                )
            }
        },
    };
    let rater_id = req.rater_id.filter(|r| !r.trim().is_empty()).unwrap_or_else(|| "anonymous".into());
    let (tx, rx) = oneshot::channel();
    let cmd = Command::Vote { battle_id: BattleId(req.battle_id), vote, rater_id, reply: tx };
    if s.commands.send(cmd).await.is_err() {
        return internal("arena writer stopped");
    }
    match rx.await {
        Ok(Ok(ack)) => Json(ack).into_response(),
        Ok(Err(VoteFailure::NotFound)) => error(StatusCode::NOT_FOUND, "unknown_battle", "no pending battle with that id"),
        Ok(Err(VoteFailure::Conflict(record))) => (
            StatusCode::CONFLICT,
            Json(json!({
                "error": "already_voted",
                "message": "this battle already has a vote",
                "battle_id": record.battle_id,
                "vote": record.vote,
                "models": reveal(&record),
            })),
        )
            .into_response(),
        Ok(Err(VoteFailure::Rejected(e))) => error(StatusCode::UNPROCESSABLE_ENTITY, "rejected", e.to_string()),
        Err(e) => internal(e),
    }
}

async fn get_leaderboard(State(s): State<AppState>) -> Response {
    let board = s.board.borrow().clone();
    ([(header::CONTENT_TYPE, "application/json")], leaderboard_json(&board)).into_response()
}

#[derive(Debug, Default, Deserialize)]
struct SegmentQuery {
    /// `exclude` (default) or `half`.
    ties: Option<String>,
    /// `basic` or `fine-grained`.
    kind: Option<String>,
    /// Comma-separated: keep battles between these models only.
    models: Option<String>,
    /// Comma-separated: keep battles involving any of these models.
    involving: Option<String>,
    format: Option<String>,
    a: Option<String>,
    b: Option<String>,
}

fn id_set(s: &Option<String>) -> Option<BTreeSet<String>> {
    s.as_ref().map(|v| v.split(',').map(str::trim).filter(|m| !m.is_empty()).map(String::from).collect())
}

#[allow(clippy::result_large_err)]
impl SegmentQuery {
    fn filter(&self) -> Result<VoteFilter, Response> {
        let kind = match self.kind.as_deref() {
            None | Some("") | Some("all") => None,
            Some("basic") => Some(VariantKind::Basic),
            Some("fine-grained") | Some("fine_grained") => Some(VariantKind::FineGrained),
            Some(other) => {
                return Err(error(StatusCode::BAD_REQUEST, "validation", format!("unknown kind {other:?}")))
            }
        };
        Ok(VoteFilter { kind, within: id_set(&self.models), involving: id_set(&self.involving), ..VoteFilter::default() })
    }

    fn ties(&self) -> Result<TieTreatment, Response> {
        match self.ties.as_deref() {
            None | Some("exclude") => Ok(TieTreatment::Exclude),
            Some("half") => Ok(TieTreatment::Half),
            Some(other) => Err(error(StatusCode::BAD_REQUEST, "validation", format!("unknown tie treatment {other:?}"))),
        }
    }
}

fn rate_json(r: Option<Rate>) -> Value {
    match r {
        Some(r) => json!({"num": r.num, "den": r.den, "value": r.value(), "percent": r.percent()}),
        None => Value::Null,
    }
}

async fn get_winrate(State(s): State<AppState>, Query(q): Query<SegmentQuery>) -> Response {
    let (filter, ties) = match (q.filter(), q.ties()) {
        (Ok(f), Ok(t)) => (f, t),
        (Err(e), _) | (_, Err(e)) => return e,
    };
    let m = {
        let votes = s.votes.read().unwrap_or_else(|p| p.into_inner());
        win_rate_matrix(&votes, &filter, ties)
    };
    if q.format.as_deref() == Some("csv") {
        return ([(header::CONTENT_TYPE, "text/csv")], m.to_csv()).into_response();
    }
    let n = m.models.len();
    let cells: Vec<Vec<Value>> = (0..n).map(|i| (0..n).map(|j| rate_json(m.cell(i, j))).collect()).collect();
    let support: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 0 } else { m.support(i, j) }).collect()).collect();
    Json(json!({"models": m.models, "tie_treatment": m.tie_treatment, "cells": cells, "support": support})).into_response()
}

async fn get_bothbad(State(s): State<AppState>, Query(q): Query<SegmentQuery>) -> Response {
    let filter = match q.filter() {
        Ok(f) => f,
        Err(e) => return e,
    };
    let votes = s.votes.read().unwrap_or_else(|p| p.into_inner());
    let overall = both_bad_rate(&votes, &filter).ok();
    let mut models: BTreeSet<&str> = BTreeSet::new();
    for r in votes.iter().filter(|r| filter.matches(r)) {
        models.insert(&r.left_model);
        models.insert(&r.right_model);
    }
    let per_model: serde_json::Map<String, Value> = models
        .into_iter()
        .map(|m| {
            let f = VoteFilter { involving: Some([m.to_string()].into()), ..filter.clone() };
            (m.to_string(), rate_json(both_bad_rate(&votes, &f).ok()))
        })
        .collect();
    Json(json!({"overall": rate_json(overall), "per_model": per_model})).into_response()
}

async fn get_actions(State(s): State<AppState>, Query(q): Query<SegmentQuery>) -> Response {
    let (Some(a), Some(b)) = (q.a.as_deref(), q.b.as_deref()) else {
        return error(StatusCode::BAD_REQUEST, "validation", "query parameters a and b are required");
    };
    let rows = {
        let votes = s.votes.read().unwrap_or_else(|p| p.into_inner());
        per_action_breakdown(&votes, a, b)
    };
    let rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "action": r.action,
                "wins": r.wins,
                "losses": r.losses,
                "ties": r.ties,
                "both_bad": r.both_bad,
                "win_rate": rate_json(r.win_rate),
                "both_bad_rate": rate_json(r.both_bad_rate),
                "formatted": r.formatted(),
            })
        })
        .collect();
    Json(json!({"a": a, "b": b, "rows": rows})).into_response()
}

async fn get_media(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(path) = s.store.media_path(&ArtifactId(id)) else {
        return error(StatusCode::NOT_FOUND, "unknown_media", "no animation for that artifact");
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "image/gif"), (header::CACHE_CONTROL, "max-age=3600")], bytes).into_response(),
        Err(e) => internal(e),
    }
}
