//! Sandboxed execution of generated animation scripts.
//!
//! Each run gets a fresh working directory holding the script, the capture
//! harness, `frames/%06d.png` and `meta.json`. The child runs in its own
//! process group with rlimits, a cleared environment, a private network
//! namespace where the host allows one, and an interpreter-level audit hook
//! that refuses sockets, subprocesses and writes outside the directory.

mod classify;
mod runner;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{classify, ExitInfo};
pub use runner::{ExecReport, Sandbox, HARNESS_SOURCE};

/// Hard-kill delay after the wall-clock limit.
pub const KILL_GRACE: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("invalid limits: {0}")]
    Limits(String),
    #[error("invalid runtime command: {0}")]
    Runtime(String),
    #[error("sandbox setup: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecLimits {
    pub wall_clock_secs: f64,
    pub cpu_secs: u64,
    pub memory_bytes: u64,
    /// Largest file the child may write.
    pub file_bytes: u64,
    pub max_frames: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            wall_clock_secs: 60.0,
            cpu_secs: 60,
            memory_bytes: 2 << 30,
            file_bytes: 256 << 20,
            max_frames: 600,
        }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<(), SandboxError> {
        let bad = |m: &str| Err(SandboxError::Limits(m.to_string()));
        if !(self.wall_clock_secs.is_finite() && self.wall_clock_secs > 0.0) {
            return bad("wall_clock_secs must be positive");
        }
        if self.cpu_secs == 0 || self.memory_bytes == 0 || self.file_bytes == 0 || self.max_frames == 0 {
            return bad("cpu, memory, file and frame limits must be positive");
        }
        Ok(())
    }

    pub fn wall_clock(&self) -> Duration {
        Duration::from_secs_f64(self.wall_clock_secs)
    }
}

/// Interpreter invocation; `{harness}` and `{script}` are substituted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuntimeCommand(pub Vec<String>);

impl Default for RuntimeCommand {
    fn default() -> Self {
        RuntimeCommand(["python3", "-I", "-B", "{harness}", "{script}"].map(String::from).to_vec())
    }
}

impl RuntimeCommand {
    pub fn validate(&self) -> Result<(), SandboxError> {
        if self.0.is_empty() || self.0[0].trim().is_empty() {
            return Err(SandboxError::Runtime("empty command".into()));
        }
        if !self.0.iter().any(|a| a.contains("{script}")) {
            return Err(SandboxError::Runtime("command never mentions {script}".into()));
        }
        Ok(())
    }

    pub fn expand(&self, harness: &str, script: &str) -> Vec<String> {
        self.0
            .iter()
            .map(|a| a.replace("{harness}", harness).replace("{script}", script))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_must_be_positive() {
        assert!(ExecLimits::default().validate().is_ok());
        assert_eq!(ExecLimits::default().wall_clock(), Duration::from_secs(60));
        for l in [
            ExecLimits { wall_clock_secs: 0.0, ..Default::default() },
            ExecLimits { wall_clock_secs: f64::NAN, ..Default::default() },
            ExecLimits { cpu_secs: 0, ..Default::default() },
            ExecLimits { memory_bytes: 0, ..Default::default() },
        ] {
            assert!(l.validate().is_err(), "{l:?}");
        }
    }

    #[test]
    fn command_template() {
        let c = RuntimeCommand::default();
        assert_eq!(c.expand("h.py", "s.py"), vec!["python3", "-I", "-B", "h.py", "s.py"]);
        assert!(RuntimeCommand(vec![]).validate().is_err());
        assert!(RuntimeCommand(vec!["python3".into()]).validate().is_err());
    }
}
