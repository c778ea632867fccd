use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::battle::{BattleId, BattleRecord, Vote};
use super::elo::{update_ratings, EloConfig};
use super::ArenaError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingState {
    pub model_id: String,
    pub rating: f64,
    pub battles_played: u64,
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub both_bad: u64,
}

impl RatingState {
    pub fn new(model_id: &str, rating: f64) -> Self {
        RatingState {
            model_id: model_id.to_string(),
            rating,
            battles_played: 0,
            wins: 0,
            losses: 0,
            ties: 0,
            both_bad: 0,
        }
    }

    fn count(&mut self, vote_for_self: Vote) {
        self.battles_played += 1;
        match vote_for_self {
            Vote::LeftWins => self.wins += 1,
            Vote::RightWins => self.losses += 1,
            Vote::Tie => self.ties += 1,
            Vote::BothBad => self.both_bad += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    #[serde(flatten)]
    pub state: RatingState,
}

/// Rating state for every model seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardState {
    cfg: EloConfig,
    ratings: BTreeMap<String, RatingState>,
    seen: BTreeSet<BattleId>,
    last: Option<(DateTime<Utc>, BattleId)>,
}

/// Rating change produced by one vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteEffect {
    pub battle_id: BattleId,
    pub vote: Vote,
    pub left: RatingState,
    pub right: RatingState,
    pub left_delta: f64,
    pub right_delta: f64,
}

impl LeaderboardState {
    pub fn new(cfg: EloConfig) -> Self {
        LeaderboardState {
            cfg,
            ratings: BTreeMap::new(),
            seen: BTreeSet::new(),
            last: None,
        }
    }

    pub fn config(&self) -> &EloConfig {
        &self.cfg
    }

    pub fn get(&self, model_id: &str) -> Option<&RatingState> {
        self.ratings.get(model_id)
    }

    /// Rating of `model_id`, or the initial rating for unseen models.
    pub fn rating(&self, model_id: &str) -> f64 {
        self.ratings
            .get(model_id)
            .map_or(self.cfg.initial_rating, |r| r.rating)
    }

    pub fn register(&mut self, model_id: &str) -> &RatingState {
        let initial = self.cfg.initial_rating;
        self.ratings
            .entry(model_id.to_string())
            .or_insert_with(|| RatingState::new(model_id, initial))
    }

    pub fn models(&self) -> impl Iterator<Item = &RatingState> {
        self.ratings.values()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn vote_count(&self) -> usize {
        self.seen.len()
    }

    pub fn contains_battle(&self, id: &BattleId) -> bool {
        self.seen.contains(id)
    }

    pub fn last_position(&self) -> Option<&(DateTime<Utc>, BattleId)> {
        self.last.as_ref()
    }

    /// Checks whether `record` could be applied, without changing anything.
    pub fn check(&self, record: &BattleRecord) -> Result<Vote, ArenaError> {
        record.check().map_err(ArenaError::Malformed)?;
        let vote = record
            .vote
            .ok_or_else(|| ArenaError::Malformed("record has no vote".into()))?;
        if self.seen.contains(&record.battle_id) {
            return Err(ArenaError::DuplicateVote(record.battle_id.clone()));
        }
        Ok(vote)
    }

    /// Applies a voted record. On error the board is unchanged.
    pub fn apply(&mut self, record: &BattleRecord) -> Result<VoteEffect, ArenaError> {
        let vote = self.check(record)?;
        let (lm, rm) = record.models();
        let ra = self.register(lm).rating;
        let rb = self.register(rm).rating;
        let (na, nb) = update_ratings(ra, rb, vote, &self.cfg);
        let left = self.ratings.get_mut(lm).expect("registered");
        left.rating = na;
        left.count(vote);
        let left = left.clone();
        let right = self.ratings.get_mut(rm).expect("registered");
        right.rating = nb;
        right.count(vote.mirrored());
        let right = right.clone();
        self.seen.insert(record.battle_id.clone());
        let pos = (record.timestamp, record.battle_id.clone());
        if self.last.as_ref().is_none_or(|l| pos > *l) {
            self.last = Some(pos);
        }
        Ok(VoteEffect {
            battle_id: record.battle_id.clone(),
            vote,
            left_delta: na - ra,
            right_delta: nb - rb,
            left,
            right,
        })
    }

    /// Functional form of [`apply`](Self::apply).
    pub fn ingest_vote(mut self, record: &BattleRecord) -> Result<Self, ArenaError> {
        self.apply(record)?;
        Ok(self)
    }

    /// Ordered by rating (descending), then battles played (descending), then model id.
    pub fn snapshot(&self) -> Vec<LeaderboardRow> {
        let mut rows: Vec<&RatingState> = self.ratings.values().collect();
        rows.sort_by(|a, b| {
            b.rating
                .total_cmp(&a.rating)
                .then(b.battles_played.cmp(&a.battles_played))
                .then_with(|| a.model_id.cmp(&b.model_id))
        });
        rows.into_iter()
            .enumerate()
            .map(|(i, s)| LeaderboardRow {
                rank: i + 1,
                state: s.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("vote log record {index} ({battle_id}): {reason}")]
pub struct ReplayError {
    pub index: usize,
    pub battle_id: String,
    pub reason: String,
}

/// Folds the log from an empty board. The log must be strictly ordered by
/// `(timestamp, battle_id)`.
pub fn replay(log: &[BattleRecord], cfg: &EloConfig) -> Result<LeaderboardState, ReplayError> {
    let mut board = LeaderboardState::new(*cfg);
    for (index, record) in log.iter().enumerate() {
        let err = |reason: String| ReplayError {
            index,
            battle_id: record.battle_id.0.clone(),
            reason,
        };
        if let Some((ts, id)) = board.last_position() {
            if (record.timestamp, &record.battle_id) <= (*ts, id) {
                return Err(err("out of order".into()));
            }
        }
        board.apply(record).map_err(|e| err(e.to_string()))?;
    }
    Ok(board)
}

/// Destination for accepted votes. `append` must be durable when it returns.
pub trait VoteLog {
    fn append(&mut self, record: &BattleRecord) -> std::io::Result<()>;
}

impl VoteLog for Vec<BattleRecord> {
    fn append(&mut self, record: &BattleRecord) -> std::io::Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Newline-delimited JSON, one voted battle per line.
#[derive(Debug)]
pub struct JsonlVoteLog {
    path: PathBuf,
    file: File,
}

impl JsonlVoteLog {
    /// Opens for appending. A torn final line (no trailing newline) left by a
    /// crash mid-append is truncated away.
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<JsonlVoteLog> {
        let path = path.into();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let bytes = std::fs::read(&path)?;
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            tracing::warn!(path = %path.display(), dropped = bytes.len() - keep, "truncating torn vote log tail");
            file.set_len(keep as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok(JsonlVoteLog { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl VoteLog for JsonlVoteLog {
    fn append(&mut self, record: &BattleRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

/// Reads a vote log. A torn final line is ignored; any other undecodable
/// line is an error naming its position.
pub fn read_vote_log(path: &Path) -> Result<Vec<BattleRecord>, ReplayError> {
    let io = |reason: String| ReplayError {
        index: 0,
        battle_id: String::new(),
        reason,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(format!("{}: {e}", path.display()))),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader
            .read_line(&mut buf)
            .map_err(|e| io(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        if !buf.ends_with('\n') {
            tracing::warn!(path = %path.display(), "ignoring torn final vote log line");
            break;
        }
        if buf.trim().is_empty() {
            continue;
        }
        let record: BattleRecord = serde_json::from_str(&buf).map_err(|e| ReplayError {
            index: out.len(),
            battle_id: String::new(),
            reason: format!("undecodable line: {e}"),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// The single writer: validates, appends to the log, then updates the board.
#[derive(Debug)]
pub struct Arena<L: VoteLog> {
    board: LeaderboardState,
    log: L,
}

impl<L: VoteLog> Arena<L> {
    pub fn new(board: LeaderboardState, log: L) -> Self {
        Arena { board, log }
    }

    pub fn board(&self) -> &LeaderboardState {
        &self.board
    }

    pub fn log(&self) -> &L {
        &self.log
    }

    pub fn into_parts(self) -> (LeaderboardState, L) {
        (self.board, self.log)
    }

    /// Ingests a voted record. Records must arrive in strictly increasing
    /// `(timestamp, battle_id)` order so the log stays replayable.
    pub fn ingest(&mut self, record: &BattleRecord) -> Result<VoteEffect, ArenaError> {
        self.board.check(record)?;
        if let Some((ts, id)) = self.board.last_position() {
            if (record.timestamp, &record.battle_id) <= (*ts, id) {
                return Err(ArenaError::OutOfOrder(record.battle_id.clone()));
            }
        }
        self.log.append(record).map_err(ArenaError::Log)?;
        Ok(self.board.apply(record).expect("record was checked"))
    }
}

#[cfg(test)]
mod tests {
    use chrono::TimeZone;

    use super::*;
    use crate::artifact::ArtifactId;
    use crate::motion::SpecId;

    pub(crate) fn record(i: i64, left: &str, right: &str, vote: Vote) -> BattleRecord {
        BattleRecord {
            battle_id: BattleId(format!("b{i:06}")),
            spec_id: SpecId::from("walking/base"),
            left_artifact: ArtifactId(format!("{left}-art")),
            right_artifact: ArtifactId(format!("{right}-art")),
            left_model: left.into(),
            right_model: right.into(),
            rater_id: "r1".into(),
            vote: Some(vote),
            timestamp: Utc.timestamp_opt(1_700_000_000 + i, 0).unwrap(),
        }
    }

    #[test]
    fn single_win() {
        let board = LeaderboardState::new(EloConfig::default())
            .ingest_vote(&record(0, "a", "b", Vote::LeftWins))
            .unwrap();
        assert_eq!(board.rating("a"), 1516.0);
        assert_eq!(board.rating("b"), 1484.0);
        let snap = board.snapshot();
        assert_eq!(snap[0].state.model_id, "a");
        assert_eq!(snap[0].rank, 1);
        assert_eq!(snap[1].state.losses, 1);
    }

    #[test]
    fn both_bad_counts_without_rating_change() {
        let board = LeaderboardState::new(EloConfig::default())
            .ingest_vote(&record(0, "a", "b", Vote::BothBad))
            .unwrap();
        for m in ["a", "b"] {
            let s = board.get(m).unwrap();
            assert_eq!((s.rating, s.both_bad, s.battles_played), (1500.0, 1, 1));
        }
    }

    #[test]
    fn duplicate_vote_leaves_board_unchanged() {
        let mut board = LeaderboardState::new(EloConfig::default());
        board.apply(&record(0, "a", "b", Vote::LeftWins)).unwrap();
        let before = board.clone();
        let again = record(0, "b", "a", Vote::LeftWins);
        assert!(matches!(board.apply(&again), Err(ArenaError::DuplicateVote(_))));
        assert_eq!(board, before);
    }

    #[test]
    fn empty_replay_and_defaults() {
        let board = replay(&[], &EloConfig::default()).unwrap();
        assert!(board.snapshot().is_empty());
        assert_eq!(board.rating("anyone"), 1500.0);
    }

    #[test]
    fn replay_names_offending_record() {
        let mut log = vec![record(0, "a", "b", Vote::LeftWins), record(1, "a", "a", Vote::Tie)];
        let err = replay(&log, &EloConfig::default()).unwrap_err();
        assert_eq!((err.index, err.battle_id.as_str()), (1, "b000001"));
        log[1] = record(1, "a", "b", Vote::Tie);
        log[1].vote = None;
        assert_eq!(replay(&log, &EloConfig::default()).unwrap_err().index, 1);
        log.swap(0, 1);
        log[0].vote = Some(Vote::Tie);
        assert!(replay(&log, &EloConfig::default()).unwrap_err().reason.contains("order"));
    }

    #[test]
    fn counters_add_up() {
        let votes = [Vote::LeftWins, Vote::RightWins, Vote::Tie, Vote::BothBad, Vote::LeftWins];
        let log: Vec<_> = votes
            .iter()
            .enumerate()
            .map(|(i, v)| record(i as i64, "a", "b", *v))
            .collect();
        let board = replay(&log, &EloConfig::default()).unwrap();
        for s in board.models() {
            assert_eq!(s.battles_played, s.wins + s.losses + s.ties + s.both_bad);
        }
        let a = board.get("a").unwrap();
        assert_eq!((a.wins, a.losses, a.ties, a.both_bad), (2, 1, 1, 1));
    }

    #[test]
    fn jsonl_log_round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("votes.jsonl");
        let mut arena = Arena::new(
            LeaderboardState::new(EloConfig::default()),
            JsonlVoteLog::open(&path).unwrap(),
        );
        for i in 0..5 {
            arena.ingest(&record(i, "a", "b", Vote::LeftWins)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"battle_id\":\"torn").unwrap();
        drop(f);
        let log = read_vote_log(&path).unwrap();
        assert_eq!(log.len(), 5);
        assert_eq!(replay(&log, &EloConfig::default()).unwrap(), *arena.board());

        let mut reopened = JsonlVoteLog::open(&path).unwrap();
        reopened.append(&record(5, "a", "b", Vote::Tie)).unwrap();
        assert_eq!(read_vote_log(&path).unwrap().len(), 6);
    }

    #[test]
    fn arena_rejects_out_of_order() {
        let mut arena = Arena::new(LeaderboardState::new(EloConfig::default()), Vec::new());
        arena.ingest(&record(5, "a", "b", Vote::LeftWins)).unwrap();
        assert!(matches!(
            arena.ingest(&record(4, "a", "b", Vote::LeftWins)),
            Err(ArenaError::OutOfOrder(_))
        ));
        assert_eq!(arena.log().len(), 1);
    }
}
