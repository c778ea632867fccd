//! Point-light motion: specs, layouts, kinematics, synthesis and rasterization.

mod golden;
mod layout;
mod params;
mod render;
mod spec;
mod synth;

use thiserror::Error;

pub use golden::golden_script;
pub use layout::{
    build_layout, BaseRole, Joint, MarkerLayout, MarkerRole, Side, BASE_MARKER_COUNT, SEGMENTS,
    SUPPORTED_MARKER_COUNTS,
};
pub use params::{
    parse_gait_file, AttributeDeltas, GaitLibrary, GaitParams, Harmonic, Keyframe, KeyframeParams,
    MarkerDelta, MarkerSeries, MotionParams, Phase, GAIT_FORMAT,
};
pub use render::{
    encode_gif, encode_png, normalize_frame, render_frames, to_rgb, write_png_sequence,
    FrameSequence, RenderOptions, RenderWarning, DEFAULT_CANVAS, DEFAULT_DOT_RADIUS,
    MAX_PLAYBACK_FPS,
};
pub use spec::{
    Action, Facing, Gender, Mood, MotionSpec, SpecId, Weight, DEFAULT_MARKER_COUNT,
};
pub use synth::{
    pose_at, reference_frame, synthesize, synthesize_with, PoseFrame, PreparedMotion, Trajectory,
};

/// A point in normalized canvas coordinates.
pub type Vec2 = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("unsupported marker count {0} (supported: 8, 10, 15, 30)")]
    UnsupportedLayout(u32),
    #[error("expected {expected} markers, found {found}")]
    ParamMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Spec(String),
    #[error("invalid kinematic parameters: {0}")]
    InvalidParams(String),
    #[error("{origin}: {message}")]
    Data { origin: String, message: String },
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
    #[error("invalid canvas: {0}")]
    InvalidCanvas(String),
}
