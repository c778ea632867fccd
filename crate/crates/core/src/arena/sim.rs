//! Simulated raters whose preferences follow a Bradley-Terry model.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::battle::{sample_battle, BattleRecord, Pool, PoolEntry, UniformPairs, Vote};
use crate::artifact::ArtifactId;
use crate::motion::SpecId;

#[derive(Debug, Clone)]
pub struct SimulatedVoters {
    /// `(model_id, strength)`; strengths must be positive.
    pub models: Vec<(String, f64)>,
    /// Probability a battle is judged a tie regardless of strengths.
    pub tie_rate: f64,
    /// Probability a battle is judged both-bad regardless of strengths.
    pub both_bad_rate: f64,
    pub specs: Vec<SpecId>,
}

impl SimulatedVoters {
    pub fn new(models: Vec<(String, f64)>) -> Self {
        assert!(models.iter().all(|(_, s)| *s > 0.0 && s.is_finite()));
        SimulatedVoters {
            models,
            tie_rate: 0.0,
            both_bad_rate: 0.0,
            specs: vec![SpecId::from("walking/base")],
        }
    }

    /// `n` models with log-strengths spaced `step` apart; `m0` is the weakest.
    pub fn ladder(n: usize, step: f64) -> Self {
        SimulatedVoters::new(
            (0..n)
                .map(|i| (format!("m{i}"), (step * i as f64).exp()))
                .collect(),
        )
    }

    fn strength(&self, model: &str) -> f64 {
        self.models
            .iter()
            .find(|(m, _)| m == model)
            .map(|(_, s)| *s)
            .expect("model in roster")
    }

    pub fn pool(&self) -> Pool {
        Pool::new(self.specs.iter().flat_map(|spec| {
            self.models.iter().map(move |(m, _)| PoolEntry {
                artifact_id: ArtifactId(format!("{m}-{}", spec.as_str().replace(['/', '@', '+'], "_"))),
                model_id: m.clone(),
                spec_id: spec.clone(),
            })
        }))
    }

    pub fn judge<R: Rng + ?Sized>(&self, left: &str, right: &str, rng: &mut R) -> Vote {
        let u: f64 = rng.random();
        if u < self.both_bad_rate {
            return Vote::BothBad;
        }
        if u < self.both_bad_rate + self.tie_rate {
            return Vote::Tie;
        }
        let (sl, sr) = (self.strength(left), self.strength(right));
        if rng.random_bool(sl / (sl + sr)) {
            Vote::LeftWins
        } else {
            Vote::RightWins
        }
    }

    /// A voted log of `votes` battles with strictly increasing timestamps.
    pub fn simulate(&self, votes: usize, seed: u64) -> Vec<BattleRecord> {
        let mut rng = StdRng::seed_from_u64(seed);
        let pool = self.pool();
        let start: DateTime<Utc> = Utc.timestamp_opt(1_750_000_000, 0).unwrap();
        (0..votes)
            .map(|i| {
                let now = start + Duration::milliseconds(i as i64);
                let mut b = sample_battle(&pool, &UniformPairs, &mut rng, now)
                    .expect("simulated pool has at least two models");
                b.vote = Some(self.judge(&b.left_model, &b.right_model, &mut rng));
                b.rater_id = format!("sim-{}", rng.random_range(0..50));
                b
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let sim = SimulatedVoters::ladder(4, 0.5);
        let a = sim.simulate(200, 9);
        assert_eq!(a, sim.simulate(200, 9));
        assert!(a.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        assert!(a.iter().all(|b| b.vote.is_some() && b.check().is_ok()));
    }

    #[test]
    fn stronger_model_wins_more() {
        let sim = SimulatedVoters::new(vec![("weak".into(), 1.0), ("strong".into(), 4.0)]);
        let log = sim.simulate(4000, 1);
        let strong_wins = log
            .iter()
            .filter(|b| {
                matches!((b.vote, b.left_model.as_str()), (Some(Vote::LeftWins), "strong") | (Some(Vote::RightWins), "weak"))
            })
            .count();
        let p = strong_wins as f64 / log.len() as f64;
        // Expected 0.8; binomial sigma is about 0.0063.
        assert!((p - 0.8).abs() < 0.03, "{p}");
    }
}
