//! Battles, votes and Elo ratings.

mod battle;
mod board;
mod elo;
mod likert;
mod sim;

use thiserror::Error;

pub use battle::{
    sample_battle, BattleId, BattleRecord, Matchup, PairingStrategy, Pool, PoolEntry, UniformPairs,
    Vote,
};
pub use board::{
    read_vote_log, replay, Arena, JsonlVoteLog, LeaderboardRow, LeaderboardState, RatingState,
    ReplayError, VoteEffect, VoteLog,
};
pub use elo::{expected_score, left_score, update_ratings, EloConfig};
pub use likert::{LikertRecord, LikertStore, LIKERT_RANGE};
pub use sim::SimulatedVoters;

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("no shared spec has rendered artifacts from two different models")]
    InsufficientPool,
    #[error("battle {0} already has a vote")]
    DuplicateVote(BattleId),
    #[error("battle {0} is older than the last logged vote")]
    OutOfOrder(BattleId),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("{0}")]
    Validation(String),
    #[error("vote log: {0}")]
    Log(#[source] std::io::Error),
}
