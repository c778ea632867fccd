use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MotionError;

/// The ten benchmark actions, in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Walking,
    Running,
    WavingAHand,
    JumpingUp,
    JumpingForward,
    Bowing,
    LyingDown,
    SittingDown,
    TurningAround,
    ForwardRolling,
}

impl Action {
    pub const ALL: [Action; 10] = [
        Action::Walking,
        Action::Running,
        Action::WavingAHand,
        Action::JumpingUp,
        Action::JumpingForward,
        Action::Bowing,
        Action::LyingDown,
        Action::SittingDown,
        Action::TurningAround,
        Action::ForwardRolling,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Action::Walking => "walking",
            Action::Running => "running",
            Action::WavingAHand => "waving-a-hand",
            Action::JumpingUp => "jumping-up",
            Action::JumpingForward => "jumping-forward",
            Action::Bowing => "bowing",
            Action::LyingDown => "lying-down",
            Action::SittingDown => "sitting-down",
            Action::TurningAround => "turning-around",
            Action::ForwardRolling => "forward-rolling",
        }
    }

    /// Phrase used inside prompts ("waving a hand").
    pub fn phrase(self) -> &'static str {
        match self {
            Action::Walking => "walking",
            Action::Running => "running",
            Action::WavingAHand => "waving a hand",
            Action::JumpingUp => "jumping up",
            Action::JumpingForward => "jumping forward",
            Action::Bowing => "bowing",
            Action::LyingDown => "lying down",
            Action::SittingDown => "sitting down",
            Action::TurningAround => "turning around",
            Action::ForwardRolling => "forward rolling",
        }
    }

    /// Cyclic actions are pure sinusoidal series; the rest are keyframed.
    pub fn is_cyclic(self) -> bool {
        matches!(
            self,
            Action::Walking | Action::Running | Action::WavingAHand | Action::TurningAround
        )
    }

    pub fn from_slug(slug: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.slug() == slug)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Man,
    Woman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mood {
    Happy,
    Sad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    Heavy,
    Light,
}

/// Facing direction. Free-form only; never part of the benchmark catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facing {
    Left,
    Right,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Man, Gender::Woman];
    pub fn word(self) -> &'static str {
        match self {
            Gender::Man => "man",
            Gender::Woman => "woman",
        }
    }
    fn coefficient(self) -> f64 {
        match self {
            Gender::Man => 1.0,
            Gender::Woman => -1.0,
        }
    }
}

impl Mood {
    pub const ALL: [Mood; 2] = [Mood::Happy, Mood::Sad];
    pub fn word(self) -> &'static str {
        match self {
            Mood::Happy => "happy",
            Mood::Sad => "sad",
        }
    }
    fn coefficient(self) -> f64 {
        match self {
            Mood::Happy => 1.0,
            Mood::Sad => -1.0,
        }
    }
}

impl Weight {
    pub const ALL: [Weight; 2] = [Weight::Heavy, Weight::Light];
    pub fn word(self) -> &'static str {
        match self {
            Weight::Heavy => "heavy",
            Weight::Light => "light",
        }
    }
    fn coefficient(self) -> f64 {
        match self {
            Weight::Heavy => 1.0,
            Weight::Light => -1.0,
        }
    }
}

pub const DEFAULT_MARKER_COUNT: u32 = 15;

/// One requested motion: an action plus optional attribute axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MotionSpec {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mood: Option<Mood>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Weight>,
    #[serde(default = "default_marker_count")]
    pub marker_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facing: Option<Facing>,
}

fn default_marker_count() -> u32 {
    DEFAULT_MARKER_COUNT
}

impl MotionSpec {
    pub fn basic(action: Action) -> Self {
        MotionSpec {
            action,
            gender: None,
            mood: None,
            weight: None,
            marker_count: DEFAULT_MARKER_COUNT,
            facing: None,
        }
    }

    pub fn fine_grained(action: Action, gender: Gender, mood: Mood, weight: Weight) -> Self {
        MotionSpec {
            gender: Some(gender),
            mood: Some(mood),
            weight: Some(weight),
            ..MotionSpec::basic(action)
        }
    }

    pub fn with_marker_count(mut self, marker_count: u32) -> Self {
        self.marker_count = marker_count;
        self
    }

    pub fn with_facing(mut self, facing: Facing) -> Self {
        self.facing = Some(facing);
        self
    }

    pub fn is_basic(&self) -> bool {
        self.gender.is_none() && self.mood.is_none() && self.weight.is_none()
    }

    pub fn is_fine_grained(&self) -> bool {
        self.gender.is_some() && self.mood.is_some() && self.weight.is_some()
    }

    /// Checks this motion spec is usable in free-form mode.
    pub fn validate(&self) -> Result<(), MotionError> {
        if !super::layout::SUPPORTED_MARKER_COUNTS.contains(&self.marker_count) {
            return Err(MotionError::UnsupportedLayout(self.marker_count));
        }
        Ok(())
    }

    /// Benchmark variants must be either basic or fully fine-grained, with no facing override.
    pub fn validate_for_benchmark(&self) -> Result<(), MotionError> {
        self.validate()?;
        if !(self.is_basic() || self.is_fine_grained()) {
            return Err(MotionError::Spec(format!(
                "{}: partial attribute settings are only allowed in free-form mode",
                self.id()
            )));
        }
        if self.facing.is_some() {
            return Err(MotionError::Spec(format!(
                "{}: facing direction is a free-form parameter",
                self.id()
            )));
        }
        Ok(())
    }

    /// Signed attribute coefficients in (gender, mood, weight) order; absent axes are 0.
    pub fn attribute_coefficients(&self) -> [f64; 3] {
        [
            self.gender.map_or(0.0, Gender::coefficient),
            self.mood.map_or(0.0, Mood::coefficient),
            self.weight.map_or(0.0, Weight::coefficient),
        ]
    }

    /// Stable identifier, e.g. `walking/base` or `walking/man-happy-heavy@8`.
    pub fn id(&self) -> SpecId {
        let mut words = Vec::new();
        if let Some(g) = self.gender {
            words.push(g.word());
        }
        if let Some(m) = self.mood {
            words.push(m.word());
        }
        if let Some(w) = self.weight {
            words.push(w.word());
        }
        let attrs = if words.is_empty() {
            "base".to_string()
        } else {
            words.join("-")
        };
        let mut id = format!("{}/{}", self.action.slug(), attrs);
        if self.marker_count != DEFAULT_MARKER_COUNT {
            id.push_str(&format!("@{}", self.marker_count));
        }
        if let Some(f) = self.facing {
            id.push_str(match f {
                Facing::Left => "+left",
                Facing::Right => "+right",
            });
        }
        SpecId(id)
    }

    /// The noun phrase describing the subject ("man", "happy man with heavy weight").
    pub fn subject_phrase(&self) -> String {
        let mut s = String::new();
        if let Some(m) = self.mood {
            s.push_str(m.word());
            s.push(' ');
        }
        s.push_str(self.gender.unwrap_or(Gender::Man).word());
        if let Some(w) = self.weight {
            s.push_str(" with ");
            s.push_str(w.word());
            s.push_str(" weight");
        }
        s
    }

    /// Human-readable target description shown to raters.
    pub fn description(&self) -> String {
        format!("A {} is {}", self.subject_phrase(), self.action.phrase())
    }
}

impl fmt::Display for MotionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Canonical variant identifier string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpecId(pub String);

impl SpecId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parse(&self) -> Result<MotionSpec, MotionError> {
        self.0.parse()
    }
}

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SpecId {
    fn from(s: &str) -> Self {
        SpecId(s.to_string())
    }
}

impl FromStr for MotionSpec {
    type Err = MotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| MotionError::Spec(format!("invalid spec id {s:?}: {why}"));
        let (rest, facing) = if let Some(r) = s.strip_suffix("+left") {
            (r, Some(Facing::Left))
        } else if let Some(r) = s.strip_suffix("+right") {
            (r, Some(Facing::Right))
        } else {
            (s, None)
        };
        let (rest, marker_count) = match rest.split_once('@') {
            Some((r, n)) => (r, n.parse::<u32>().map_err(|_| bad("marker count"))?),
            None => (rest, DEFAULT_MARKER_COUNT),
        };
        let (action, attrs) = rest.split_once('/').ok_or_else(|| bad("missing '/'"))?;
        let action = Action::from_slug(action).ok_or_else(|| bad("unknown action"))?;
        let mut spec = MotionSpec {
            marker_count,
            facing,
            ..MotionSpec::basic(action)
        };
        if attrs != "base" {
            for word in attrs.split('-') {
                match word {
                    "man" if spec.gender.is_none() => spec.gender = Some(Gender::Man),
                    "woman" if spec.gender.is_none() => spec.gender = Some(Gender::Woman),
                    "happy" if spec.mood.is_none() => spec.mood = Some(Mood::Happy),
                    "sad" if spec.mood.is_none() => spec.mood = Some(Mood::Sad),
                    "heavy" if spec.weight.is_none() => spec.weight = Some(Weight::Heavy),
                    "light" if spec.weight.is_none() => spec.weight = Some(Weight::Light),
                    _ => return Err(bad("unknown or repeated attribute")),
                }
            }
        }
        // Only the canonical spelling is accepted so ids stay unique.
        if spec.id().0 != s {
            return Err(bad("non-canonical form"));
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        let specs = [
            MotionSpec::basic(Action::Walking),
            MotionSpec::fine_grained(Action::Bowing, Gender::Woman, Mood::Sad, Weight::Light),
            MotionSpec::basic(Action::Running).with_marker_count(8),
            MotionSpec {
                weight: Some(Weight::Heavy),
                ..MotionSpec::basic(Action::ForwardRolling)
            }
            .with_facing(Facing::Left),
        ];
        for spec in specs {
            assert_eq!(spec.id().parse().unwrap(), spec);
        }
        assert_eq!(
            MotionSpec::fine_grained(Action::Walking, Gender::Man, Mood::Happy, Weight::Heavy)
                .id()
                .as_str(),
            "walking/man-happy-heavy"
        );
    }

    #[test]
    fn rejects_non_canonical_ids() {
        for bad in ["walking", "walking/happy-man", "flying/base", "walking/base@15", "walking/man-man"] {
            assert!(bad.parse::<MotionSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn partial_specs_are_free_form_only() {
        let partial = MotionSpec {
            mood: Some(Mood::Happy),
            ..MotionSpec::basic(Action::Walking)
        };
        assert!(partial.validate().is_ok());
        assert!(partial.validate_for_benchmark().is_err());
        assert!(MotionSpec::basic(Action::Walking)
            .with_facing(Facing::Left)
            .validate_for_benchmark()
            .is_err());
    }

    #[test]
    fn subject_phrases() {
        assert_eq!(MotionSpec::basic(Action::Walking).subject_phrase(), "man");
        let fine = MotionSpec::fine_grained(Action::Walking, Gender::Man, Mood::Happy, Weight::Heavy);
        assert_eq!(fine.subject_phrase(), "happy man with heavy weight");
        assert_eq!(fine.description(), "A happy man with heavy weight is walking");
    }
}
