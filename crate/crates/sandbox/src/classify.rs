use biomotion_core::artifact::Outcome;
use image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitInfo {
    Exited(i32),
    /// Terminated by a signal the runner did not send.
    Signaled(i32),
    /// Killed by the runner after the wall-clock limit.
    TimedOut,
    /// The interpreter could not be started.
    SpawnFailed,
}

impl ExitInfo {
    pub fn success(&self) -> bool {
        matches!(self, ExitInfo::Exited(0))
    }
}

/// Outcome from captured (already normalized) frames and how the process ended.
///
/// Frames decide first: two or more frames with at least one pixel difference
/// are `rendered`; any other non-empty capture is `blank_output`. Without
/// frames the exit status picks between `timeout`, `runtime_error` and
/// `no_animation`.
pub fn classify(frames: &[GrayImage], exit: &ExitInfo) -> Outcome {
    if !frames.is_empty() {
        let moving = frames.len() >= 2 && frames.windows(2).any(|w| w[0] != w[1]);
        return if moving { Outcome::Rendered } else { Outcome::BlankOutput };
    }
    match exit {
        ExitInfo::TimedOut => Outcome::Timeout,
        ExitInfo::Exited(0) => Outcome::NoAnimation,
        _ => Outcome::RuntimeError,
    }
}
