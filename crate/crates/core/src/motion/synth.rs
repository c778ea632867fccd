use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::layout::{build_layout, MarkerLayout};
use super::params::{GaitLibrary, MotionParams};
use super::spec::{Facing, MotionSpec};
use super::{MotionError, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFrame {
    /// Position within the cycle, radians in `[0, 2 pi)`.
    pub phase: f64,
    pub positions: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: MotionSpec,
    pub fps: f64,
    pub frames: Vec<PoseFrame>,
}

impl Trajectory {
    pub fn marker_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.positions.len())
    }
}

/// Parameters with attribute deltas applied, paired with the target layout.
#[derive(Debug, Clone)]
pub struct PreparedMotion {
    spec: MotionSpec,
    params: MotionParams,
    layout: MarkerLayout,
}

impl PreparedMotion {
    pub fn new(library: &GaitLibrary, spec: &MotionSpec) -> Result<Self, MotionError> {
        spec.validate()?;
        let layout = build_layout(spec.marker_count)?;
        let params = library
            .get(spec.action)
            .with_attributes(spec.attribute_coefficients());
        Ok(PreparedMotion {
            spec: *spec,
            params,
            layout,
        })
    }

    pub fn params(&self) -> &MotionParams {
        &self.params
    }

    pub fn layout(&self) -> &MarkerLayout {
        &self.layout
    }

    pub fn cycle_length(&self) -> f64 {
        self.params.cycle_length()
    }

    pub fn pose(&self, t: f64) -> Result<PoseFrame, MotionError> {
        pose_at(&self.params, &self.layout, &self.spec, t)
    }
}

/// Evaluates `params` at time `t` and projects onto `layout`.
///
/// `params` are used as given; attribute deltas must already be applied
/// (see [`PreparedMotion`]). Outputs are clamped into the unit square.
pub fn pose_at(
    params: &MotionParams,
    layout: &MarkerLayout,
    spec: &MotionSpec,
    t: f64,
) -> Result<PoseFrame, MotionError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(MotionError::InvalidSampling(format!("time must be finite and >= 0, got {t}")));
    }
    let base = params.evaluate(t);
    let mut positions = layout.project(&base)?;
    for p in &mut positions {
        if spec.facing == Some(Facing::Left) {
            p[0] = 1.0 - p[0];
        }
        p[0] = p[0].clamp(0.0, 1.0);
        p[1] = p[1].clamp(0.0, 1.0);
    }
    let cycle = params.cycle_length();
    let phase = (TAU * t.rem_euclid(cycle) / cycle).min(TAU.next_down());
    Ok(PoseFrame { phase, positions })
}

/// Samples `duration` seconds at `fps`, frame `i` at `t = i / fps`.
pub fn synthesize(spec: &MotionSpec, duration: f64, fps: f64) -> Result<Trajectory, MotionError> {
    synthesize_with(GaitLibrary::builtin(), spec, duration, fps)
}

pub fn synthesize_with(
    library: &GaitLibrary,
    spec: &MotionSpec,
    duration: f64,
    fps: f64,
) -> Result<Trajectory, MotionError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(MotionError::InvalidSampling(format!("duration must be > 0, got {duration}")));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(MotionError::InvalidSampling(format!("fps must be > 0, got {fps}")));
    }
    let count = (duration * fps).round();
    if count < 1.0 {
        return Err(MotionError::InvalidSampling(format!(
            "{duration} s at {fps} fps yields no frames"
        )));
    }
    let motion = PreparedMotion::new(library, spec)?;
    let frames = (0..count as u64)
        .map(|i| motion.pose(i as f64 / fps))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory {
        spec: *spec,
        fps,
        frames,
    })
}

/// Single pose at `phase` radians into the cycle.
pub fn reference_frame(spec: &MotionSpec, phase: f64) -> Result<Trajectory, MotionError> {
    if !phase.is_finite() {
        return Err(MotionError::InvalidSampling("phase must be finite".into()));
    }
    let motion = PreparedMotion::new(GaitLibrary::builtin(), spec)?;
    let t = phase.rem_euclid(TAU) / TAU * motion.cycle_length();
    Ok(Trajectory {
        spec: *spec,
        fps: 1.0,
        frames: vec![motion.pose(t)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{Action, BaseRole, Gender, Mood, Weight};

    fn index(label: &str) -> usize {
        BaseRole::from_label(label).unwrap().index()
    }

    #[test]
    fn frame_count_is_rounded_product() {
        let traj = synthesize(&MotionSpec::basic(Action::Walking), 2.0, 30.0).unwrap();
        assert_eq!(traj.frames.len(), 60);
        assert!(traj.frames.iter().all(|f| f.positions.len() == 15));
        let eight = synthesize(&MotionSpec::basic(Action::Walking).with_marker_count(8), 1.0, 30.0)
            .unwrap();
        assert!(eight.frames.iter().all(|f| f.positions.len() == 8));
    }

    #[test]
    fn rejects_bad_sampling() {
        let spec = MotionSpec::basic(Action::Walking);
        assert!(synthesize(&spec, 0.0, 30.0).is_err());
        assert!(synthesize(&spec, 1.0, -1.0).is_err());
        assert!(synthesize(&spec, 0.01, 10.0).is_err());
        assert!(matches!(
            synthesize(&spec.with_marker_count(7), 1.0, 30.0),
            Err(MotionError::UnsupportedLayout(7))
        ));
    }

    #[test]
    fn ankles_move_in_antiphase() {
        let motion = PreparedMotion::new(GaitLibrary::builtin(), &MotionSpec::basic(Action::Walking))
            .unwrap();
        let MotionParams::Cyclic(g) = motion.params() else { unreachable!() };
        let (l, r) = (index("l_ankle"), index("r_ankle"));
        for i in 0..200 {
            let pose = motion.pose(i as f64 * 0.0137).unwrap();
            let dl = pose.positions[l][0] - g.markers[l].mean[0];
            let dr = pose.positions[r][0] - g.markers[r].mean[0];
            assert!((dl + dr).abs() < 1e-12, "t index {i}: {dl} vs {dr}");
        }
    }

    #[test]
    fn facing_left_mirrors_x() {
        let spec = MotionSpec::basic(Action::Walking);
        let right = reference_frame(&spec, 0.3).unwrap();
        let left = reference_frame(&spec.with_facing(Facing::Left), 0.3).unwrap();
        for (a, b) in right.frames[0].positions.iter().zip(&left.frames[0].positions) {
            assert!((a[0] + b[0] - 1.0).abs() < 1e-12);
            assert_eq!(a[1], b[1]);
        }
    }

    fn walking(gender: Gender, mood: Mood, weight: Weight) -> MotionParams {
        PreparedMotion::new(
            GaitLibrary::builtin(),
            &MotionSpec::fine_grained(Action::Walking, gender, mood, weight),
        )
        .unwrap()
        .params()
        .clone()
    }

    #[test]
    fn attribute_deltas_move_in_the_documented_direction() {
        let get = |p: &MotionParams| match p {
            MotionParams::Cyclic(g) => g.clone(),
            _ => unreachable!(),
        };
        let heavy = get(&walking(Gender::Man, Mood::Happy, Weight::Heavy));
        let light = get(&walking(Gender::Man, Mood::Happy, Weight::Light));
        let hip_gap = |g: &crate::motion::GaitParams| {
            let (l, r) = (g.markers[index("l_hip")].mean, g.markers[index("r_hip")].mean);
            ((l[0] - r[0]).powi(2) + (l[1] - r[1]).powi(2)).sqrt()
        };
        assert!(hip_gap(&heavy) > hip_gap(&light));

        let happy = get(&walking(Gender::Woman, Mood::Happy, Weight::Light));
        let sad = get(&walking(Gender::Woman, Mood::Sad, Weight::Light));
        for wrist in ["l_wrist", "r_wrist"] {
            let i = index(wrist);
            assert!(happy.markers[i].harmonics[0].amp[0] > sad.markers[i].harmonics[0].amp[0]);
        }
        for shoulder in ["l_shoulder", "r_shoulder"] {
            let i = index(shoulder);
            // y grows downward, so a lower shoulder has the larger y.
            assert!(sad.markers[i].mean[1] > happy.markers[i].mean[1]);
        }
    }

    #[test]
    fn positions_stay_on_canvas() {
        for action in Action::ALL {
            let traj = synthesize(&MotionSpec::basic(action), 4.0, 24.0).unwrap();
            for f in &traj.frames {
                assert!((0.0..2.0 * std::f64::consts::PI).contains(&f.phase));
                for p in &f.positions {
                    assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
                }
            }
        }
    }
}
