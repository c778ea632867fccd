use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ArenaError;
use crate::artifact::ArtifactId;
use crate::motion::SpecId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    LeftWins,
    RightWins,
    Tie,
    BothBad,
}

impl Vote {
    pub const ALL: [Vote; 4] = [Vote::LeftWins, Vote::RightWins, Vote::Tie, Vote::BothBad];

    pub fn as_str(self) -> &'static str {
        match self {
            Vote::LeftWins => "left_wins",
            Vote::RightWins => "right_wins",
            Vote::Tie => "tie",
            Vote::BothBad => "both_bad",
        }
    }

    pub fn is_decisive(self) -> bool {
        matches!(self, Vote::LeftWins | Vote::RightWins)
    }

    /// The same judgement with the sides swapped.
    pub fn mirrored(self) -> Vote {
        match self {
            Vote::LeftWins => Vote::RightWins,
            Vote::RightWins => Vote::LeftWins,
            v => v,
        }
    }
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts the log spelling plus the rater-facing `A` / `B` / `tie` / `both_bad`.
impl FromStr for Vote {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "a" | "left" | "left_wins" => Ok(Vote::LeftWins),
            "b" | "right" | "right_wins" => Ok(Vote::RightWins),
            "tie" => Ok(Vote::Tie),
            "bothbad" | "both_bad" => Ok(Vote::BothBad),
            other => Err(format!("unknown vote {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BattleId(pub String);

impl BattleId {
    /// Random 128-bit id drawn from `rng`, so seeded runs are reproducible.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> BattleId {
        BattleId(format!("{:032x}", rng.random::<u128>()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BattleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BattleId {
    fn from(s: &str) -> Self {
        BattleId(s.to_string())
    }
}

/// One pairwise comparison. Pending battles have no vote; logged battles
/// carry the vote and the time it was accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattleRecord {
    pub battle_id: BattleId,
    pub spec_id: SpecId,
    pub left_artifact: ArtifactId,
    pub right_artifact: ArtifactId,
    pub left_model: String,
    pub right_model: String,
    #[serde(default)]
    pub rater_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote: Option<Vote>,
    pub timestamp: DateTime<Utc>,
}

impl BattleRecord {
    pub fn models(&self) -> (&str, &str) {
        (&self.left_model, &self.right_model)
    }

    /// Checks the static invariants of a record.
    pub fn check(&self) -> Result<(), String> {
        if self.battle_id.0.is_empty() {
            return Err("empty battle id".into());
        }
        if self.left_model.is_empty() || self.right_model.is_empty() {
            return Err("empty model id".into());
        }
        if self.left_model == self.right_model {
            return Err(format!("both sides are {}", self.left_model));
        }
        if self.left_artifact == self.right_artifact {
            return Err("both sides show the same artifact".into());
        }
        Ok(())
    }
}

/// A rendered artifact eligible for battles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoolEntry {
    pub artifact_id: ArtifactId,
    pub model_id: String,
    pub spec_id: SpecId,
}

/// Artifacts grouped by spec and model.
#[derive(Debug, Clone, Default)]
pub struct Pool {
    by_spec: BTreeMap<SpecId, BTreeMap<String, Vec<ArtifactId>>>,
}

impl Pool {
    pub fn new(entries: impl IntoIterator<Item = PoolEntry>) -> Pool {
        let mut pool = Pool::default();
        for e in entries {
            pool.insert(e);
        }
        pool
    }

    pub fn insert(&mut self, e: PoolEntry) {
        let ids = self
            .by_spec
            .entry(e.spec_id)
            .or_default()
            .entry(e.model_id)
            .or_default();
        if !ids.contains(&e.artifact_id) {
            ids.push(e.artifact_id);
            ids.sort();
        }
    }

    /// Specs with at least two models, each with their model list.
    pub fn eligible(&self) -> impl Iterator<Item = (&SpecId, Vec<&str>)> {
        self.by_spec
            .iter()
            .filter(|(_, models)| models.len() >= 2)
            .map(|(spec, models)| (spec, models.keys().map(String::as_str).collect()))
    }

    pub fn artifacts(&self, spec: &SpecId, model: &str) -> &[ArtifactId] {
        self.by_spec
            .get(spec)
            .and_then(|m| m.get(model))
            .map_or(&[], Vec::as_slice)
    }

    pub fn model_count(&self) -> usize {
        let mut models: Vec<&String> = self.by_spec.values().flat_map(|m| m.keys()).collect();
        models.sort();
        models.dedup();
        models.len()
    }
}

/// A matchup chosen by a strategy: spec and an unordered model pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matchup {
    pub spec_id: SpecId,
    pub models: (String, String),
}

pub trait PairingStrategy: Send + Sync {
    fn choose(&self, pool: &Pool, rng: &mut dyn rand::RngCore) -> Option<Matchup>;
}

/// Uniform over every eligible (spec, unordered model pair).
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPairs;

impl PairingStrategy for UniformPairs {
    fn choose(&self, pool: &Pool, rng: &mut dyn rand::RngCore) -> Option<Matchup> {
        let eligible: Vec<(&SpecId, Vec<&str>)> = pool.eligible().collect();
        let total: usize = eligible.iter().map(|(_, m)| m.len() * (m.len() - 1) / 2).sum();
        if total == 0 {
            return None;
        }
        let mut pick = rng.random_range(0..total);
        for (spec, models) in eligible {
            let n = models.len();
            let pairs = n * (n - 1) / 2;
            if pick >= pairs {
                pick -= pairs;
                continue;
            }
            for i in 0..n {
                let row = n - 1 - i;
                if pick < row {
                    return Some(Matchup {
                        spec_id: spec.clone(),
                        models: (models[i].to_string(), models[i + 1 + pick].to_string()),
                    });
                }
                pick -= row;
            }
        }
        unreachable!("pick is below the pair total")
    }
}

/// Draws an unvoted battle: strategy picks the matchup, each side gets a
/// uniformly chosen artifact, and a fair coin assigns left and right.
pub fn sample_battle(
    pool: &Pool,
    strategy: &dyn PairingStrategy,
    rng: &mut dyn rand::RngCore,
    now: DateTime<Utc>,
) -> Result<BattleRecord, ArenaError> {
    let m = strategy.choose(pool, rng).ok_or(ArenaError::InsufficientPool)?;
    let (mut a, mut b) = m.models;
    let pick = |model: &str, rng: &mut dyn rand::RngCore| {
        let ids = pool.artifacts(&m.spec_id, model);
        ids[rng.random_range(0..ids.len())].clone()
    };
    let mut aa = pick(&a, rng);
    let mut ba = pick(&b, rng);
    if rng.random_bool(0.5) {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut aa, &mut ba);
    }
    Ok(BattleRecord {
        battle_id: BattleId::random(rng),
        spec_id: m.spec_id,
        left_artifact: aa,
        right_artifact: ba,
        left_model: a,
        right_model: b,
        rater_id: String::new(),
        vote: None,
        timestamp: now,
    })
}

#[cfg(test)]
mod tests {
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    use super::*;

    fn entry(model: &str, spec: &str, n: usize) -> PoolEntry {
        PoolEntry {
            artifact_id: ArtifactId(format!("{model}-{spec}-{n}").replace('/', "_")),
            model_id: model.into(),
            spec_id: SpecId::from(spec),
        }
    }

    #[test]
    fn two_models_always_meet() {
        let pool = Pool::new([entry("a", "walking/base", 0), entry("b", "walking/base", 0)]);
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..50 {
            let b = sample_battle(&pool, &UniformPairs, &mut rng, Utc::now()).unwrap();
            let mut pair = [b.left_model.as_str(), b.right_model.as_str()];
            pair.sort();
            assert_eq!(pair, ["a", "b"]);
            assert_eq!(b.spec_id.as_str(), "walking/base");
            b.check().unwrap();
        }
    }

    #[test]
    fn one_model_is_insufficient() {
        let pool = Pool::new([entry("a", "walking/base", 0), entry("a", "walking/base", 1)]);
        let mut rng = StdRng::seed_from_u64(1);
        assert!(matches!(
            sample_battle(&pool, &UniformPairs, &mut rng, Utc::now()),
            Err(ArenaError::InsufficientPool)
        ));
        let disjoint = Pool::new([entry("a", "walking/base", 0), entry("b", "running/base", 0)]);
        assert!(sample_battle(&disjoint, &UniformPairs, &mut rng, Utc::now()).is_err());
    }

    #[test]
    fn uniform_over_pairs_and_sides() {
        let pool = Pool::new(["a", "b", "c"].map(|m| entry(m, "walking/base", 0)));
        let mut rng = StdRng::seed_from_u64(7);
        let n = 10_000;
        let mut pairs: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut a_left = 0;
        let mut a_seen = 0;
        for _ in 0..n {
            let b = sample_battle(&pool, &UniformPairs, &mut rng, Utc::now()).unwrap();
            let mut key = [b.left_model.clone(), b.right_model.clone()];
            if key.contains(&"a".to_string()) {
                a_seen += 1;
                if b.left_model == "a" {
                    a_left += 1;
                }
            }
            key.sort();
            let [x, y] = key;
            *pairs.entry((x, y)).or_default() += 1;
        }
        assert_eq!(pairs.len(), 3);
        // Chi-square with 2 degrees of freedom; 13.8 is the 0.999 quantile.
        let expected = n as f64 / 3.0;
        let chi2: f64 = pairs.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 13.8, "chi2 = {chi2}");
        let p = a_left as f64 / a_seen as f64;
        let sigma = (0.25 / a_seen as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * sigma, "left share {p}");
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let pool = Pool::new(["a", "b", "c"].map(|m| entry(m, "walking/base", 0)));
        let now = Utc::now();
        let run = |seed| {
            let mut rng = StdRng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_battle(&pool, &UniformPairs, &mut rng, now).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn vote_spellings() {
        assert_eq!("A".parse::<Vote>().unwrap(), Vote::LeftWins);
        assert_eq!("b".parse::<Vote>().unwrap(), Vote::RightWins);
        assert_eq!("BothBad".parse::<Vote>().unwrap(), Vote::BothBad);
        assert_eq!("both-bad".parse::<Vote>().unwrap(), Vote::BothBad);
        assert!("C".parse::<Vote>().is_err());
        for v in Vote::ALL {
            assert_eq!(v.as_str().parse::<Vote>().unwrap(), v);
            assert_eq!(v.mirrored().mirrored(), v);
        }
    }
}
