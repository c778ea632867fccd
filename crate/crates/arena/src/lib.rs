//! Arena service: battle serving, vote ingestion and the analytics API, plus
//! the configuration shared with the `biomotion` command-line tool.

pub mod config;
pub mod service;

pub use config::ArenaConfig;
pub use service::{leaderboard_json, recover, App, BattleView, Recovered, ServiceOptions, VoteAck};

impl ArenaConfig {
    pub fn service_options(&self) -> ServiceOptions {
        ServiceOptions {
            store: self.paths.store.clone(),
            vote_log: self.paths.vote_log.clone(),
            battles: self.paths.battles.clone(),
            elo: self.elo(),
            seed: self.server.seed,
        }
    }
}
