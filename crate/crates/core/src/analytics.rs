//! Aggregates over vote logs: win rates, both-bad rates, per-action tables,
//! rater agreement, correlation with external scores and Likert summaries.
//!
//! Every rate is kept as an integer ratio so results can be compared exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{BattleId, BattleRecord, LeaderboardState, LikertStore, Vote};
use crate::motion::{Action, SpecId};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("no data in segment")]
    NoData,
    #[error("the two vote sets share no battles")]
    NoOverlap,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("score manifest: {0}")]
    Manifest(String),
}

/// `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Option<Rate> {
        (den > 0 && num <= den).then_some(Rate { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Percentage in tenths, rounded half up, computed on integers.
    pub fn permille(self) -> u64 {
        (self.num * 2000 + self.den) / (2 * self.den)
    }

    /// `"62.0%"`-style text with one decimal.
    pub fn percent(self) -> String {
        let t = self.permille();
        format!("{}.{}%", t / 10, t % 10)
    }
}

/// Equality of the rational values, not of the representation.
impl PartialEq for Rate {
    fn eq(&self, other: &Self) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

impl Eq for Rate {}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.percent())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieTreatment {
    /// Only wins and losses count.
    #[default]
    Exclude,
    /// A tie counts as half a win for each side.
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Basic,
    FineGrained,
}

/// Selects the battles an aggregate runs over. `None` fields do not filter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoteFilter {
    /// Keep battles in which at least one side is in this set.
    pub involving: Option<BTreeSet<String>>,
    /// Keep battles whose two models are both in this set.
    pub within: Option<BTreeSet<String>>,
    pub specs: Option<BTreeSet<SpecId>>,
    pub actions: Option<BTreeSet<Action>>,
    pub kind: Option<VariantKind>,
    /// Keep only battles voted by these raters.
    pub raters: Option<BTreeSet<String>>,
}

impl VoteFilter {
    pub fn all() -> Self {
        VoteFilter::default()
    }

    pub fn kind(kind: VariantKind) -> Self {
        VoteFilter {
            kind: Some(kind),
            ..VoteFilter::default()
        }
    }

    pub fn involving<I: IntoIterator<Item = S>, S: Into<String>>(models: I) -> Self {
        VoteFilter {
            involving: Some(models.into_iter().map(Into::into).collect()),
            ..VoteFilter::default()
        }
    }

    pub fn matches(&self, r: &BattleRecord) -> bool {
        let (l, rt) = r.models();
        if let Some(set) = &self.involving {
            if !set.contains(l) && !set.contains(rt) {
                return false;
            }
        }
        if let Some(set) = &self.within {
            if !set.contains(l) || !set.contains(rt) {
                return false;
            }
        }
        if let Some(set) = &self.specs {
            if !set.contains(&r.spec_id) {
                return false;
            }
        }
        if let Some(set) = &self.raters {
            if !set.contains(&r.rater_id) {
                return false;
            }
        }
        if self.actions.is_some() || self.kind.is_some() {
            let Ok(spec) = r.spec_id.parse() else {
                return false;
            };
            if let Some(set) = &self.actions {
                if !set.contains(&spec.action) {
                    return false;
                }
            }
            if let Some(kind) = self.kind {
                let ok = match kind {
                    VariantKind::Basic => spec.is_basic(),
                    VariantKind::FineGrained => spec.is_fine_grained(),
                };
                if !ok {
                    return false;
                }
            }
        }
        true
    }
}

fn voted<'a>(
    log: &'a [BattleRecord],
    filter: &'a VoteFilter,
) -> impl Iterator<Item = (&'a BattleRecord, Vote)> + 'a {
    log.iter()
        .filter(move |r| filter.matches(r))
        .filter_map(|r| r.vote.map(|v| (r, v)))
}

/// Pairwise outcome counts; `wins[i][j]` is how often row `i` beat column `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRateMatrix {
    pub models: Vec<String>,
    pub wins: Vec<Vec<u64>>,
    pub ties: Vec<Vec<u64>>,
    pub tie_treatment: TieTreatment,
}

impl WinRateMatrix {
    pub fn index(&self, model: &str) -> Option<usize> {
        self.models.binary_search_by(|m| m.as_str().cmp(model)).ok()
    }

    /// Battles counted in cell `(i, j)`.
    pub fn support(&self, i: usize, j: usize) -> u64 {
        let decisive = self.wins[i][j] + self.wins[j][i];
        match self.tie_treatment {
            TieTreatment::Exclude => decisive,
            TieTreatment::Half => decisive + self.ties[i][j],
        }
    }

    /// Row model's win rate against the column model; `None` without data.
    pub fn cell(&self, i: usize, j: usize) -> Option<Rate> {
        if i == j {
            return None;
        }
        match self.tie_treatment {
            TieTreatment::Exclude => Rate::new(self.wins[i][j], self.support(i, j)),
            TieTreatment::Half => Rate::new(
                2 * self.wins[i][j] + self.ties[i][j],
                2 * self.support(i, j),
            ),
        }
    }

    pub fn cell_by_id(&self, a: &str, b: &str) -> Option<Rate> {
        self.cell(self.index(a)?, self.index(b)?)
    }

    /// CSV with a header row; empty cells have no data.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model");
        for m in &self.models {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (i, m) in self.models.iter().enumerate() {
            out.push_str(m);
            for j in 0..self.models.len() {
                out.push(',');
                if let Some(r) = self.cell(i, j) {
                    out.push_str(&format!("{:.6}", r.value()));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn win_rate_matrix(
    log: &[BattleRecord],
    filter: &VoteFilter,
    ties: TieTreatment,
) -> WinRateMatrix {
    let models: Vec<String> = voted(log, filter)
        .flat_map(|(r, _)| [r.left_model.clone(), r.right_model.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let idx: HashMap<&str, usize> = models.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let n = models.len();
    let mut wins = vec![vec![0; n]; n];
    let mut tie_counts = vec![vec![0; n]; n];
    for (r, v) in voted(log, filter) {
        let (l, rt) = (idx[r.left_model.as_str()], idx[r.right_model.as_str()]);
        match v {
            Vote::LeftWins => wins[l][rt] += 1,
            Vote::RightWins => wins[rt][l] += 1,
            Vote::Tie => {
                tie_counts[l][rt] += 1;
                tie_counts[rt][l] += 1;
            }
            Vote::BothBad => {}
        }
    }
    WinRateMatrix {
        models,
        wins,
        ties: tie_counts,
        tie_treatment: ties,
    }
}

/// Share of both-bad votes among all votes in the segment.
pub fn both_bad_rate(log: &[BattleRecord], filter: &VoteFilter) -> Result<Rate, AnalyticsError> {
    let (mut bad, mut all) = (0, 0);
    for (_, v) in voted(log, filter) {
        all += 1;
        if v == Vote::BothBad {
            bad += 1;
        }
    }
    Rate::new(bad, all).ok_or(AnalyticsError::NoData)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRow {
    pub action: Action,
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub both_bad: u64,
    /// Model A's decisive win fraction.
    pub win_rate: Option<Rate>,
    pub both_bad_rate: Option<Rate>,
}

impl ActionRow {
    pub fn total(&self) -> u64 {
        self.wins + self.losses + self.ties + self.both_bad
    }

    /// `"x% (y%)"`, or `"no data"`.
    pub fn formatted(&self) -> String {
        match (self.win_rate, self.both_bad_rate) {
            (Some(w), Some(b)) => format!("{w} ({b})"),
            (None, Some(b)) => format!("n/a ({b})"),
            _ => "no data".into(),
        }
    }
}

/// Model A against model B, one row per action.
pub fn per_action_breakdown(log: &[BattleRecord], a: &str, b: &str) -> Vec<ActionRow> {
    let mut rows: BTreeMap<Action, ActionRow> = Action::ALL
        .into_iter()
        .map(|action| {
            (
                action,
                ActionRow {
                    action,
                    wins: 0,
                    losses: 0,
                    ties: 0,
                    both_bad: 0,
                    win_rate: None,
                    both_bad_rate: None,
                },
            )
        })
        .collect();
    for r in log {
        let (Some(v), Ok(spec)) = (r.vote, r.spec_id.parse()) else {
            continue;
        };
        let v = match r.models() {
            (l, rt) if l == a && rt == b => v,
            (l, rt) if l == b && rt == a => v.mirrored(),
            _ => continue,
        };
        let row = rows.get_mut(&spec.action).expect("all actions present");
        match v {
            Vote::LeftWins => row.wins += 1,
            Vote::RightWins => row.losses += 1,
            Vote::Tie => row.ties += 1,
            Vote::BothBad => row.both_bad += 1,
        }
    }
    let mut out: Vec<ActionRow> = rows.into_values().collect();
    out.sort_by_key(|r| Action::ALL.iter().position(|a| *a == r.action));
    for row in &mut out {
        row.win_rate = Rate::new(row.wins, row.wins + row.losses);
        row.both_bad_rate = Rate::new(row.both_bad, row.total());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub battle_id: BattleId,
    pub x: Vote,
    pub y: Vote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub groups: (String, String),
    pub common: Vec<BattleId>,
    pub agreement: Rate,
    pub disagreements: Vec<Disagreement>,
}

fn first_votes(log: &[BattleRecord]) -> BTreeMap<&BattleId, (Vote, (&str, &str))> {
    let mut out = BTreeMap::new();
    for r in log {
        if let Some(v) = r.vote {
            out.entry(&r.battle_id).or_insert((v, r.models()));
        }
    }
    out
}

/// Four-way vote equality over battles both groups voted on.
///
/// When one group saw the battle with sides swapped, its vote is mirrored first.
pub fn agreement_rate(
    x: &[BattleRecord],
    y: &[BattleRecord],
    groups: (&str, &str),
) -> Result<AgreementReport, AnalyticsError> {
    let xs = first_votes(x);
    let ys = first_votes(y);
    let mut common = Vec::new();
    let mut disagreements = Vec::new();
    let mut agree = 0;
    for (id, (vx, mx)) in &xs {
        let Some((vy, my)) = ys.get(id) else { continue };
        let vy = if mx == my { *vy } else { vy.mirrored() };
        common.push((*id).clone());
        if *vx == vy {
            agree += 1;
        } else {
            disagreements.push(Disagreement {
                battle_id: (*id).clone(),
                x: *vx,
                y: vy,
            });
        }
    }
    let agreement = Rate::new(agree, common.len() as u64).ok_or(AnalyticsError::NoOverlap)?;
    Ok(AgreementReport {
        groups: (groups.0.to_string(), groups.1.to_string()),
        common,
        agreement,
        disagreements,
    })
}

/// Product-moment correlation, accumulated in one pass with running co-moments.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::DegenerateInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(AnalyticsError::DegenerateInput("need at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalyticsError::DegenerateInput("non-finite value".into()));
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(AnalyticsError::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::DegenerateInput("length mismatch".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// External `(model_id, score)` pairs from a two-column CSV.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreManifest {
    pub name: String,
    pub scores: Vec<(String, f64)>,
}

impl ScoreManifest {
    /// A first row whose score column is not numeric is treated as a header.
    pub fn from_csv<R: Read>(name: &str, reader: R) -> Result<Self, AnalyticsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut scores = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| AnalyticsError::Manifest(e.to_string()))?;
            if row.len() != 2 {
                return Err(AnalyticsError::Manifest(format!(
                    "row {}: expected 2 columns, found {}",
                    i + 1,
                    row.len()
                )));
            }
            let score = match row[1].parse::<f64>() {
                Ok(s) if s.is_finite() => s,
                _ if i == 0 => continue,
                _ => {
                    return Err(AnalyticsError::Manifest(format!(
                        "row {}: score {:?} is not a number",
                        i + 1,
                        &row[1]
                    )))
                }
            };
            if !seen.insert(row[0].to_string()) {
                return Err(AnalyticsError::Manifest(format!("duplicate model {}", &row[0])));
            }
            scores.push((row[0].to_string(), score));
        }
        Ok(ScoreManifest {
            name: name.to_string(),
            scores,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub benchmark: String,
    pub models: Vec<String>,
    pub pearson: f64,
}

/// Pearson correlation between arena ratings and the manifest, over shared models.
pub fn correlate_with_ratings(
    board: &LeaderboardState,
    manifest: &ScoreManifest,
) -> Result<Correlation, AnalyticsError> {
    let mut models = Vec::new();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (m, s) in &manifest.scores {
        if let Some(r) = board.get(m) {
            models.push(m.clone());
            x.push(r.rating);
            y.push(*s);
        }
    }
    Ok(Correlation {
        benchmark: manifest.name.clone(),
        pearson: pearson(&x, &y)?,
        models,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertSummary {
    pub model_id: String,
    /// Counts for scores 1 through 5.
    pub histogram: [u64; 5],
    pub count: u64,
    pub mean: f64,
}

impl LikertSummary {
    pub fn max_score(&self) -> Option<u8> {
        (1..=5u8).rev().find(|&s| self.histogram[s as usize - 1] > 0)
    }
}

pub fn likert_distribution(store: &LikertStore, model_id: &str) -> Result<LikertSummary, AnalyticsError> {
    let mut histogram = [0u64; 5];
    let mut sum = 0u64;
    for r in store.for_model(model_id) {
        histogram[r.score as usize - 1] += 1;
        sum += r.score as u64;
    }
    let count: u64 = histogram.iter().sum();
    if count == 0 {
        return Err(AnalyticsError::NoData);
    }
    Ok(LikertSummary {
        model_id: model_id.to_string(),
        histogram,
        count,
        mean: sum as f64 / count as f64,
    })
}

/// Heatmap of the matrix: blue for low, red for high win rate, gray for no data.
pub fn win_rate_heatmap(m: &WinRateMatrix, cell: u32) -> RgbImage {
    let n = m.models.len().max(1) as u32;
    let cell = cell.max(1);
    RgbImage::from_fn(n * cell, n * cell, |x, y| {
        let (i, j) = ((y / cell) as usize, (x / cell) as usize);
        if i >= m.models.len() {
            return Rgb([128, 128, 128]);
        }
        match m.cell(i, j) {
            None => Rgb([128, 128, 128]),
            Some(r) => {
                let v = r.value();
                Rgb([(255.0 * v) as u8, 64, (255.0 * (1.0 - v)) as u8])
            }
        }
    })
}
