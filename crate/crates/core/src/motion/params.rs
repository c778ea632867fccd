//! Kinematic parameters and their data-file format.
//!
//! Cyclic actions are Fourier series per marker:
//! `position(t) = mean + sum_k amp_k * sin(k * omega * t + phase_k)` with
//! `omega = 2 pi / period`, evaluated per axis. Non-cyclic actions are
//! keyframe sequences blended with a raised-cosine ease.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::LazyLock;

use serde::Deserialize;

use super::layout::{BaseRole, BASE_MARKER_COUNT};
use super::spec::Action;
use super::{MotionError, Vec2};

pub const GAIT_FORMAT: &str = "biomotion-gait/1";

/// A phase angle stored in units of pi.
///
/// Data uses dyadic multiples of pi so that bilateral antiphase can be
/// asserted exactly on the stored values.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Phase(f64);

impl Phase {
    pub const ZERO: Phase = Phase(0.0);

    pub fn from_pi_units(units: f64) -> Self {
        Phase(units)
    }

    pub fn pi_units(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0 * PI
    }

    /// True when `self - other` is an odd multiple of pi.
    pub fn is_antiphase_to(self, other: Phase) -> bool {
        (self.0 - other.0).rem_euclid(2.0) == 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub amp: Vec2,
    /// Per-axis phase.
    pub phase: [Phase; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSeries {
    pub role: BaseRole,
    pub mean: Vec2,
    /// Harmonic `k` (1-based) sits at index `k - 1`.
    pub harmonics: Vec<Harmonic>,
}

/// Additive offset for one marker along one attribute axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkerDelta {
    pub mean: Vec2,
    pub amp: Vec<Vec2>,
}

/// Offsets for the gender, mood and weight axes, indexed like the markers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeDeltas {
    pub gender: Vec<MarkerDelta>,
    pub mood: Vec<MarkerDelta>,
    pub weight: Vec<MarkerDelta>,
}

impl AttributeDeltas {
    pub fn zeros(markers: usize, harmonics: usize) -> Self {
        let empty = MarkerDelta {
            mean: [0.0, 0.0],
            amp: vec![[0.0, 0.0]; harmonics],
        };
        AttributeDeltas {
            gender: vec![empty.clone(); markers],
            mood: vec![empty.clone(); markers],
            weight: vec![empty; markers],
        }
    }

    fn axes(&self) -> [&[MarkerDelta]; 3] {
        [&self.gender, &self.mood, &self.weight]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitParams {
    pub period: f64,
    pub markers: Vec<MarkerSeries>,
    pub attributes: AttributeDeltas,
}

impl GaitParams {
    pub fn harmonic_count(&self) -> usize {
        self.markers.first().map_or(0, |m| m.harmonics.len())
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        let invalid = |msg: String| Err(MotionError::InvalidParams(msg));
        if !(self.period.is_finite() && self.period > 0.0) {
            return invalid(format!("period must be positive, got {}", self.period));
        }
        let h = self.harmonic_count();
        if h == 0 {
            return invalid("at least one harmonic is required".into());
        }
        if self.markers.iter().any(|m| m.harmonics.len() != h) {
            return invalid("harmonic count differs between markers".into());
        }
        for m in &self.markers {
            let Some(partner) = m.role.partner() else { continue };
            let Some(p) = self.markers.iter().find(|o| o.role == partner) else {
                continue;
            };
            for axis in 0..2 {
                if !m.harmonics[0].phase[axis].is_antiphase_to(p.harmonics[0].phase[axis]) {
                    return invalid(format!(
                        "{} and {} are not in antiphase on the fundamental",
                        m.role, partner
                    ));
                }
            }
        }
        for axis in self.attributes.axes() {
            if axis.len() != self.markers.len() || axis.iter().any(|d| d.amp.len() != h) {
                return invalid("attribute deltas do not match the marker set".into());
            }
        }
        Ok(())
    }

    /// Applies signed attribute coefficients (gender, mood, weight).
    ///
    /// A zero coefficient leaves the parameters bit-identical.
    pub fn with_attributes(&self, coefficients: [f64; 3]) -> GaitParams {
        let mut out = self.clone();
        for (deltas, c) in self.attributes.axes().into_iter().zip(coefficients) {
            if c == 0.0 {
                continue;
            }
            for (marker, d) in out.markers.iter_mut().zip(deltas) {
                marker.mean[0] += c * d.mean[0];
                marker.mean[1] += c * d.mean[1];
                for (h, a) in marker.harmonics.iter_mut().zip(&d.amp) {
                    h.amp[0] += c * a[0];
                    h.amp[1] += c * a[1];
                }
            }
        }
        out
    }

    /// Evaluates every marker at time `t` (seconds).
    pub fn evaluate(&self, t: f64) -> Vec<Vec2> {
        let tau = t.rem_euclid(self.period);
        let omega = 2.0 * PI / self.period;
        self.markers
            .iter()
            .map(|m| {
                let mut p = m.mean;
                for (k, h) in m.harmonics.iter().enumerate() {
                    let arg = (k + 1) as f64 * omega * tau;
                    p[0] += h.amp[0] * (arg + h.phase[0].radians()).sin();
                    p[1] += h.amp[1] * (arg + h.phase[1].radians()).sin();
                }
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub time: f64,
    pub positions: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeParams {
    pub duration: f64,
    pub keyframes: Vec<Keyframe>,
    /// Only the `mean` part of each delta is used.
    pub attributes: AttributeDeltas,
}

impl KeyframeParams {
    pub fn validate(&self) -> Result<(), MotionError> {
        let invalid = |msg: &str| Err(MotionError::InvalidParams(msg.to_string()));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return invalid("duration must be positive");
        }
        let Some(first) = self.keyframes.first() else {
            return invalid("at least one keyframe is required");
        };
        if first.time != 0.0 {
            return invalid("the first keyframe must be at t = 0");
        }
        if self.keyframes.windows(2).any(|w| w[1].time <= w[0].time) {
            return invalid("keyframe times must increase strictly");
        }
        if self.keyframes.last().is_some_and(|k| k.time > self.duration) {
            return invalid("keyframe past the sequence duration");
        }
        let n = first.positions.len();
        if self.keyframes.iter().any(|k| k.positions.len() != n) {
            return invalid("keyframes disagree on marker count");
        }
        for axis in self.attributes.axes() {
            if axis.len() != n {
                return invalid("attribute deltas do not match the marker set");
            }
        }
        Ok(())
    }

    pub fn with_attributes(&self, coefficients: [f64; 3]) -> KeyframeParams {
        let mut out = self.clone();
        for (deltas, c) in self.attributes.axes().into_iter().zip(coefficients) {
            if c == 0.0 {
                continue;
            }
            for kf in &mut out.keyframes {
                for (p, d) in kf.positions.iter_mut().zip(deltas) {
                    p[0] += c * d.mean[0];
                    p[1] += c * d.mean[1];
                }
            }
        }
        out
    }

    /// Eased keyframe blend; the sequence loops with period `duration`.
    pub fn evaluate(&self, t: f64) -> Vec<Vec2> {
        let tau = t.rem_euclid(self.duration);
        let next = self.keyframes.partition_point(|k| k.time <= tau);
        let a = &self.keyframes[next - 1];
        let Some(b) = self.keyframes.get(next) else {
            return a.positions.clone();
        };
        let s = (tau - a.time) / (b.time - a.time);
        let w = 0.5 * (1.0 - (PI * s).cos());
        a.positions
            .iter()
            .zip(&b.positions)
            .map(|(pa, pb)| [pa[0] + w * (pb[0] - pa[0]), pa[1] + w * (pb[1] - pa[1])])
            .collect()
    }
}

/// Kinematics of one action.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionParams {
    Cyclic(GaitParams),
    Keyframed(KeyframeParams),
}

impl MotionParams {
    pub fn marker_count(&self) -> usize {
        match self {
            MotionParams::Cyclic(g) => g.markers.len(),
            MotionParams::Keyframed(k) => k.keyframes.first().map_or(0, |f| f.positions.len()),
        }
    }

    /// Period for cyclic actions, sequence length for keyframed ones.
    pub fn cycle_length(&self) -> f64 {
        match self {
            MotionParams::Cyclic(g) => g.period,
            MotionParams::Keyframed(k) => k.duration,
        }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        match self {
            MotionParams::Cyclic(g) => g.validate(),
            MotionParams::Keyframed(k) => k.validate(),
        }
    }

    pub fn with_attributes(&self, coefficients: [f64; 3]) -> MotionParams {
        match self {
            MotionParams::Cyclic(g) => MotionParams::Cyclic(g.with_attributes(coefficients)),
            MotionParams::Keyframed(k) => MotionParams::Keyframed(k.with_attributes(coefficients)),
        }
    }

    pub fn evaluate(&self, t: f64) -> Vec<Vec2> {
        match self {
            MotionParams::Cyclic(g) => g.evaluate(t),
            MotionParams::Keyframed(k) => k.evaluate(t),
        }
    }
}

// ---------------------------------------------------------------------------
// Data files

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaitFile {
    format: String,
    action: Action,
    kind: String,
    period: Option<f64>,
    duration: Option<f64>,
    harmonics: Option<usize>,
    #[serde(default)]
    marker: Vec<MarkerEntry>,
    #[serde(default)]
    keyframe: Vec<KeyframeEntry>,
    #[serde(default)]
    attributes: AttributeEntries,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkerEntry {
    role: String,
    mean: Vec2,
    amp: Vec<Vec2>,
    phase_pi: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyframeEntry {
    time: f64,
    positions: BTreeMap<String, Vec2>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct AttributeEntries {
    #[serde(default)]
    gender: BTreeMap<String, DeltaEntry>,
    #[serde(default)]
    mood: BTreeMap<String, DeltaEntry>,
    #[serde(default)]
    weight: BTreeMap<String, DeltaEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeltaEntry {
    #[serde(default)]
    mean: Option<Vec2>,
    #[serde(default)]
    amp: Option<Vec<Vec2>>,
}

fn role(label: &str, origin: &str) -> Result<BaseRole, MotionError> {
    BaseRole::from_label(label).ok_or_else(|| MotionError::Data {
        origin: origin.to_string(),
        message: format!("unknown marker role {label:?}"),
    })
}

fn deltas(
    entries: &BTreeMap<String, DeltaEntry>,
    harmonics: usize,
    origin: &str,
) -> Result<Vec<MarkerDelta>, MotionError> {
    let mut out = AttributeDeltas::zeros(BASE_MARKER_COUNT, harmonics).gender;
    for (label, entry) in entries {
        let d = &mut out[role(label, origin)?.index()];
        if let Some(mean) = entry.mean {
            d.mean = mean;
        }
        if let Some(amp) = &entry.amp {
            if amp.len() != harmonics {
                return Err(MotionError::Data {
                    origin: origin.to_string(),
                    message: format!("{label}: amplitude delta needs {harmonics} harmonics"),
                });
            }
            d.amp = amp.clone();
        }
    }
    Ok(out)
}

/// Parses one gait data file.
pub fn parse_gait_file(text: &str, origin: &str) -> Result<(Action, MotionParams), MotionError> {
    let data_err = |message: String| MotionError::Data {
        origin: origin.to_string(),
        message,
    };
    let file: GaitFile = toml::from_str(text).map_err(|e| data_err(e.to_string()))?;
    if file.format != GAIT_FORMAT {
        return Err(data_err(format!("unsupported format {:?}", file.format)));
    }
    let params = match file.kind.as_str() {
        "cyclic" => {
            let harmonics = file.harmonics.ok_or_else(|| data_err("missing `harmonics`".into()))?;
            let period = file.period.ok_or_else(|| data_err("missing `period`".into()))?;
            let mut slots: Vec<Option<MarkerSeries>> = vec![None; BASE_MARKER_COUNT];
            for m in &file.marker {
                let r = role(&m.role, origin)?;
                if m.amp.len() != harmonics || m.phase_pi.len() != harmonics {
                    return Err(data_err(format!("{}: expected {harmonics} harmonics", m.role)));
                }
                let series = MarkerSeries {
                    role: r,
                    mean: m.mean,
                    harmonics: m
                        .amp
                        .iter()
                        .zip(&m.phase_pi)
                        .map(|(amp, ph)| Harmonic {
                            amp: *amp,
                            phase: [Phase::from_pi_units(ph[0]), Phase::from_pi_units(ph[1])],
                        })
                        .collect(),
                };
                if slots[r.index()].replace(series).is_some() {
                    return Err(data_err(format!("duplicate marker {}", m.role)));
                }
            }
            let markers = slots
                .into_iter()
                .zip(BaseRole::ALL)
                .map(|(s, r)| s.ok_or_else(|| data_err(format!("missing marker {r}"))))
                .collect::<Result<Vec<_>, _>>()?;
            MotionParams::Cyclic(GaitParams {
                period,
                markers,
                attributes: AttributeDeltas {
                    gender: deltas(&file.attributes.gender, harmonics, origin)?,
                    mood: deltas(&file.attributes.mood, harmonics, origin)?,
                    weight: deltas(&file.attributes.weight, harmonics, origin)?,
                },
            })
        }
        "keyframed" => {
            let duration = file.duration.ok_or_else(|| data_err("missing `duration`".into()))?;
            let keyframes = file
                .keyframe
                .iter()
                .map(|k| {
                    let mut positions = vec![None; BASE_MARKER_COUNT];
                    for (label, p) in &k.positions {
                        positions[role(label, origin)?.index()] = Some(*p);
                    }
                    let positions = positions
                        .into_iter()
                        .zip(BaseRole::ALL)
                        .map(|(p, r)| {
                            p.ok_or_else(|| data_err(format!("keyframe t={} lacks {r}", k.time)))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(Keyframe {
                        time: k.time,
                        positions,
                    })
                })
                .collect::<Result<Vec<_>, MotionError>>()?;
            MotionParams::Keyframed(KeyframeParams {
                duration,
                keyframes,
                attributes: AttributeDeltas {
                    gender: deltas(&file.attributes.gender, 0, origin)?,
                    mood: deltas(&file.attributes.mood, 0, origin)?,
                    weight: deltas(&file.attributes.weight, 0, origin)?,
                },
            })
        }
        other => return Err(data_err(format!("unknown kind {other:?}"))),
    };
    if params.is_cyclic() != file.action.is_cyclic() {
        return Err(data_err(format!(
            "{} must be modeled as a {} motion",
            file.action,
            if file.action.is_cyclic() { "cyclic" } else { "keyframed" }
        )));
    }
    params.validate().map_err(|e| data_err(e.to_string()))?;
    Ok((file.action, params))
}

impl MotionParams {
    pub fn is_cyclic(&self) -> bool {
        matches!(self, MotionParams::Cyclic(_))
    }
}

const BUILTIN_GAIT: [(&str, &str); 10] = [
    ("walking.toml", include_str!("../../data/gait/walking.toml")),
    ("running.toml", include_str!("../../data/gait/running.toml")),
    ("waving-a-hand.toml", include_str!("../../data/gait/waving-a-hand.toml")),
    ("jumping-up.toml", include_str!("../../data/gait/jumping-up.toml")),
    ("jumping-forward.toml", include_str!("../../data/gait/jumping-forward.toml")),
    ("bowing.toml", include_str!("../../data/gait/bowing.toml")),
    ("lying-down.toml", include_str!("../../data/gait/lying-down.toml")),
    ("sitting-down.toml", include_str!("../../data/gait/sitting-down.toml")),
    ("turning-around.toml", include_str!("../../data/gait/turning-around.toml")),
    ("forward-rolling.toml", include_str!("../../data/gait/forward-rolling.toml")),
];

/// Kinematics for all ten actions.
#[derive(Debug, Clone)]
pub struct GaitLibrary {
    actions: BTreeMap<Action, MotionParams>,
}

static BUILTIN: LazyLock<GaitLibrary> = LazyLock::new(|| {
    GaitLibrary::from_sources(BUILTIN_GAIT.iter().map(|(n, t)| (n.to_string(), t.to_string())))
        .expect("bundled gait data is valid")
});

impl GaitLibrary {
    /// The bundled hand-tuned defaults.
    pub fn builtin() -> &'static GaitLibrary {
        &BUILTIN
    }

    /// Loads `<action-slug>.toml` files from a directory; every action must be present.
    pub fn from_dir(dir: &Path) -> Result<GaitLibrary, MotionError> {
        let mut sources = Vec::new();
        for action in Action::ALL {
            let path = dir.join(format!("{}.toml", action.slug()));
            let text = std::fs::read_to_string(&path).map_err(|e| MotionError::Data {
                origin: path.display().to_string(),
                message: e.to_string(),
            })?;
            sources.push((path.display().to_string(), text));
        }
        GaitLibrary::from_sources(sources)
    }

    fn from_sources(
        sources: impl IntoIterator<Item = (String, String)>,
    ) -> Result<GaitLibrary, MotionError> {
        let mut actions = BTreeMap::new();
        for (origin, text) in sources {
            let (action, params) = parse_gait_file(&text, &origin)?;
            if actions.insert(action, params).is_some() {
                return Err(MotionError::Data {
                    origin,
                    message: format!("duplicate data for {action}"),
                });
            }
        }
        if let Some(missing) = Action::ALL.into_iter().find(|a| !actions.contains_key(a)) {
            return Err(MotionError::Data {
                origin: "gait library".into(),
                message: format!("no data for {missing}"),
            });
        }
        Ok(GaitLibrary { actions })
    }

    pub fn get(&self, action: Action) -> &MotionParams {
        &self.actions[&action]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> GaitParams {
        GaitParams {
            period: 1.0,
            markers: vec![MarkerSeries {
                role: BaseRole::Head,
                mean: [0.5, 0.5],
                harmonics: vec![Harmonic {
                    amp: [0.1, 0.0],
                    phase: [Phase::ZERO; 2],
                }],
            }],
            attributes: AttributeDeltas::zeros(1, 1),
        }
    }

    /// Direct scalar evaluation of `mean + amp * sin(2 pi t / period + phase)`.
    fn scalar_oracle(mean: f64, amp: f64, phase: f64, period: f64, t: f64) -> f64 {
        let turns = t / period;
        mean + amp * (std::f64::consts::TAU * turns + phase).sin()
    }

    #[test]
    fn toy_series_at_quarter_period() {
        let p = toy().evaluate(0.25);
        let expected = [
            scalar_oracle(0.5, 0.1, 0.0, 1.0, 0.25),
            scalar_oracle(0.5, 0.0, 0.0, 1.0, 0.25),
        ];
        assert!((expected[0] - 0.6).abs() < 1e-15 && expected[1] == 0.5);
        assert!((p[0][0] - expected[0]).abs() < 1e-15);
        assert!((p[0][1] - expected[1]).abs() < 1e-15);
    }

    #[test]
    fn builtin_library_loads() {
        let lib = GaitLibrary::builtin();
        for action in Action::ALL {
            let params = lib.get(action);
            assert_eq!(params.marker_count(), BASE_MARKER_COUNT);
            assert_eq!(params.is_cyclic(), action.is_cyclic());
        }
    }

    #[test]
    fn builtin_walking_is_antiphase() {
        let MotionParams::Cyclic(walk) = GaitLibrary::builtin().get(Action::Walking) else {
            panic!("walking is cyclic");
        };
        let mut pairs = 0;
        for m in &walk.markers {
            if let Some(partner) = m.role.partner() {
                let p = walk.markers.iter().find(|o| o.role == partner).unwrap();
                for axis in 0..2 {
                    assert!(m.harmonics[0].phase[axis].is_antiphase_to(p.harmonics[0].phase[axis]));
                }
                pairs += 1;
            }
        }
        assert_eq!(pairs, 12);
    }

    #[test]
    fn zero_coefficients_reproduce_neutral_params() {
        for action in Action::ALL {
            let params = GaitLibrary::builtin().get(action);
            assert_eq!(&params.with_attributes([0.0; 3]), params);
        }
    }

    #[test]
    fn rejects_broken_antiphase() {
        let mut walk = match GaitLibrary::builtin().get(Action::Walking) {
            MotionParams::Cyclic(g) => g.clone(),
            _ => unreachable!(),
        };
        let idx = BaseRole::from_label("l_ankle").unwrap().index();
        walk.markers[idx].harmonics[0].phase[0] = Phase::from_pi_units(0.75);
        assert!(matches!(walk.validate(), Err(MotionError::InvalidParams(_))));
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse_gait_file("format = \"nope\"", "x").is_err());
        let walking = BUILTIN_GAIT[0].1;
        let truncated: String = walking.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(parse_gait_file(&truncated, "walking").is_err());
        let wrong_kind = BUILTIN_GAIT[5].1.replace("action = \"bowing\"", "action = \"walking\"");
        assert!(parse_gait_file(&wrong_kind, "bowing").is_err());
    }

    #[test]
    fn keyframes_hold_and_loop() {
        let MotionParams::Keyframed(bow) = GaitLibrary::builtin().get(Action::Bowing) else {
            panic!("bowing is keyframed");
        };
        let first = &bow.keyframes[0].positions;
        assert_eq!(&bow.evaluate(0.0), first);
        assert_eq!(&bow.evaluate(bow.duration), first);
        let k1 = &bow.keyframes[1];
        assert_eq!(bow.evaluate(k1.time), k1.positions);
    }
}
