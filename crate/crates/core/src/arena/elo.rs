use serde::{Deserialize, Serialize};

use super::battle::Vote;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloConfig {
    pub initial_rating: f64,
    pub k: f64,
    pub scale: f64,
}

impl Default for EloConfig {
    fn default() -> Self {
        EloConfig {
            initial_rating: 1500.0,
            k: 32.0,
            scale: 400.0,
        }
    }
}

impl EloConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(format!("K must be positive, got {}", self.k));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(format!("scale must be positive, got {}", self.scale));
        }
        if !self.initial_rating.is_finite() {
            return Err("initial rating must be finite".into());
        }
        Ok(())
    }
}

/// Probability that A beats B.
pub fn expected_score(ra: f64, rb: f64, scale: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / scale))
}

/// Actual score of the left side, or `None` when the vote carries no rating signal.
pub fn left_score(vote: Vote) -> Option<f64> {
    match vote {
        Vote::LeftWins => Some(1.0),
        Vote::RightWins => Some(0.0),
        Vote::Tie => Some(0.5),
        Vote::BothBad => None,
    }
}

/// New `(left, right)` ratings after `vote`.
///
/// The same delta is added to one side and removed from the other.
pub fn update_ratings(ra: f64, rb: f64, vote: Vote, cfg: &EloConfig) -> (f64, f64) {
    match left_score(vote) {
        None => (ra, rb),
        Some(sa) => {
            let delta = cfg.k * (sa - expected_score(ra, rb, cfg.scale));
            (ra + delta, rb - delta)
        }
    }
}
