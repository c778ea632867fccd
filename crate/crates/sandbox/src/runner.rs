use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use biomotion_core::artifact::{ArtifactStore, GenerationArtifact, Outcome, RenderRecord, RenderResult, StoreError};
use biomotion_core::motion::{normalize_frame, FrameSequence, DEFAULT_CANVAS};
use image::GrayImage;
use serde::Deserialize;
use tokio::process::Command;
use tokio::sync::Semaphore;
use tracing::{debug, warn};

use crate::classify::{classify, ExitInfo};
use crate::{ExecLimits, RuntimeCommand, SandboxError, KILL_GRACE};

pub const HARNESS_SOURCE: &str = include_str!("../data/harness.py");

const HARNESS_FILE: &str = "biomotion_harness.py";
const SCRIPT_FILE: &str = "script.py";
const STDERR_TAIL: u64 = 4096;
const DEFAULT_FPS: f64 = 30.0;

#[derive(Debug, Default, Deserialize)]
struct Meta {
    #[serde(default)]
    fps: Option<f64>,
    #[serde(default)]
    denied: Vec<String>,
    #[serde(default)]
    truncated: bool,
}

/// Everything learned from one run.
#[derive(Debug, Clone)]
pub struct ExecReport {
    pub result: RenderResult,
    pub exit: ExitInfo,
    /// Operations refused by the in-process guard, in attempt order.
    pub denied: Vec<String>,
    pub frames_captured: usize,
    /// Whether capture stopped at `max_frames`.
    pub truncated: bool,
}

struct Inner {
    base: PathBuf,
    runtime: RuntimeCommand,
    limits: ExecLimits,
    slots: Semaphore,
    keep_workdirs: AtomicBool,
}

/// Runs scripts; cheap to clone and safe to share between workers.
#[derive(Clone)]
pub struct Sandbox {
    inner: Arc<Inner>,
}

impl Sandbox {
    /// `base` holds per-run directories and the shared matplotlib cache.
    pub fn new(
        base: impl Into<PathBuf>,
        runtime: RuntimeCommand,
        limits: ExecLimits,
        max_parallel: usize,
    ) -> Result<Sandbox, SandboxError> {
        limits.validate()?;
        runtime.validate()?;
        if max_parallel == 0 {
            return Err(SandboxError::Limits("max_parallel must be positive".into()));
        }
        let base = base.into();
        std::fs::create_dir_all(base.join("mplconfig"))?;
        let base = base.canonicalize()?;
        Ok(Sandbox {
            inner: Arc::new(Inner {
                base,
                runtime,
                limits,
                slots: Semaphore::new(max_parallel),
                keep_workdirs: AtomicBool::new(false),
            }),
        })
    }

    /// Leaves run directories on disk for inspection.
    pub fn set_keep_workdirs(&self, keep: bool) {
        self.inner.keep_workdirs.store(keep, Ordering::Relaxed);
    }

    pub fn limits(&self) -> &ExecLimits {
        &self.inner.limits
    }

    pub async fn execute(&self, script: &str) -> RenderResult {
        self.execute_report(script).await.result
    }

    /// Runs `script` and reports the outcome. Failures of any kind become
    /// outcome classes; nothing here returns an error to the caller.
    pub async fn execute_report(&self, script: &str) -> ExecReport {
        let started = Instant::now();
        let _slot = self.inner.slots.acquire().await.expect("semaphore is never closed");
        let workdir = match tempfile::Builder::new().prefix("run-").tempdir_in(&self.inner.base) {
            Ok(d) => d,
            Err(e) => return spawn_failure(format!("cannot create working directory: {e}"), started),
        };
        let report = self.run_in(workdir.path(), script, started).await;
        if self.inner.keep_workdirs.load(Ordering::Relaxed) {
            let kept = workdir.keep();
            debug!(dir = %kept.display(), "kept sandbox directory");
        }
        report
    }

    async fn run_in(&self, dir: &Path, script: &str, started: Instant) -> ExecReport {
        if script.trim().is_empty() {
            return spawn_failure("empty script".into(), started);
        }
        let setup = (|| -> std::io::Result<(File, File)> {
            std::fs::write(dir.join(SCRIPT_FILE), script)?;
            std::fs::write(dir.join(HARNESS_FILE), HARNESS_SOURCE)?;
            std::fs::create_dir(dir.join("tmp"))?;
            Ok((File::create(dir.join("stdout.txt"))?, File::create(dir.join("stderr.txt"))?))
        })();
        let (stdout, stderr) = match setup {
            Ok(f) => f,
            Err(e) => return spawn_failure(format!("sandbox setup: {e}"), started),
        };

        let limits = self.inner.limits.clone();
        let argv = self.inner.runtime.expand(HARNESS_FILE, SCRIPT_FILE);
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .current_dir(dir)
            .env_clear()
            .env("PATH", "/usr/local/bin:/usr/bin:/bin")
            .env("HOME", dir)
            .env("TMPDIR", dir.join("tmp"))
            .env("LANG", "C.UTF-8")
            .env("MPLBACKEND", "Agg")
            .env("MPLCONFIGDIR", self.inner.base.join("mplconfig"))
            .env("OPENBLAS_NUM_THREADS", "1")
            .env("OMP_NUM_THREADS", "1")
            .env("SDL_VIDEODRIVER", "dummy")
            .env("BIOMOTION_MAX_FRAMES", limits.max_frames.to_string())
            .stdin(std::process::Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .kill_on_drop(true);
        let (cpu, mem, fsize) = (limits.cpu_secs, limits.memory_bytes, limits.file_bytes);
        // SAFETY: the closure runs between fork and exec and only makes
        // async-signal-safe system calls.
        unsafe {
            cmd.pre_exec(move || confine(cpu, mem, fsize));
        }

        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) => return spawn_failure(format!("cannot start {}: {e}", argv[0]), started),
        };
        let pgid = child.id().map(|p| p as libc::pid_t);
        let exit = match tokio::time::timeout(limits.wall_clock(), child.wait()).await {
            Ok(Ok(status)) => exit_info(status),
            Ok(Err(e)) => {
                warn!("waiting on sandbox child: {e}");
                ExitInfo::SpawnFailed
            }
            Err(_) => {
                signal_group(pgid, libc::SIGTERM);
                if tokio::time::timeout(KILL_GRACE, child.wait()).await.is_err() {
                    signal_group(pgid, libc::SIGKILL);
                    let _ = child.wait().await;
                }
                ExitInfo::TimedOut
            }
        };
        // Reap anything the script left behind in its group.
        signal_group(pgid, libc::SIGKILL);

        let dir = dir.to_path_buf();
        let max_frames = limits.max_frames;
        let collected = tokio::task::spawn_blocking(move || collect(&dir, max_frames)).await;
        let (frames, meta, stderr_text) = match collected {
            Ok(c) => c,
            Err(e) => (Vec::new(), Meta::default(), format!("frame collection failed: {e}")),
        };
        let mut excerpt = stderr_text;
        if !meta.denied.is_empty() {
            excerpt.push_str("\n[sandbox denied] ");
            excerpt.push_str(&meta.denied.join("; "));
        }
        if exit == ExitInfo::TimedOut {
            excerpt.push_str(&format!("\n[sandbox] killed after {:.1} s", limits.wall_clock_secs));
        }
        let outcome = classify(&frames, &exit);
        let duration = started.elapsed().as_secs_f64();
        let frames_captured = frames.len();
        let result = if outcome == Outcome::Rendered {
            let fps = meta.fps.filter(|f| f.is_finite() && *f > 0.0).unwrap_or(DEFAULT_FPS);
            let seq = FrameSequence {
                width: DEFAULT_CANVAS,
                height: DEFAULT_CANVAS,
                dot_radius: None,
                fps,
                frames,
                warnings: Vec::new(),
            };
            RenderResult::rendered(seq, excerpt, duration)
        } else {
            RenderResult::failed(outcome, excerpt, duration)
        };
        ExecReport { result, exit, denied: meta.denied, frames_captured, truncated: meta.truncated }
    }

    /// Executes an artifact's script (or records an extraction failure) and
    /// stores the result with its playback animation.
    pub async fn execute_artifact(
        &self,
        store: &ArtifactStore,
        artifact: &GenerationArtifact,
    ) -> Result<RenderRecord, StoreError> {
        let result = match artifact.script.as_deref() {
            Some(s) if !s.trim().is_empty() => self.execute(s).await,
            _ => RenderResult::failed(Outcome::ExtractionFailed, "no script in response".into(), 0.0),
        };
        store.put_render(&artifact.artifact_id, &result)
    }
}

fn spawn_failure(message: String, started: Instant) -> ExecReport {
    let outcome = classify(&[], &ExitInfo::SpawnFailed);
    ExecReport {
        result: RenderResult::failed(outcome, message, started.elapsed().as_secs_f64()),
        exit: ExitInfo::SpawnFailed,
        denied: Vec::new(),
        frames_captured: 0,
        truncated: false,
    }
}

fn exit_info(status: std::process::ExitStatus) -> ExitInfo {
    use std::os::unix::process::ExitStatusExt;
    match (status.code(), status.signal()) {
        (Some(c), _) => ExitInfo::Exited(c),
        (None, Some(s)) => ExitInfo::Signaled(s),
        (None, None) => ExitInfo::SpawnFailed,
    }
}

fn signal_group(pgid: Option<libc::pid_t>, sig: libc::c_int) {
    if let Some(p) = pgid.filter(|p| *p > 0) {
        // SAFETY: plain syscall; a stale group id only yields ESRCH.
        unsafe {
            libc::kill(-p, sig);
        }
    }
}

fn set_limit(resource: libc::__rlimit_resource_t, value: u64) -> std::io::Result<()> {
    let lim = libc::rlimit { rlim_cur: value as libc::rlim_t, rlim_max: value as libc::rlim_t };
    // SAFETY: `lim` is a valid rlimit for the duration of the call.
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(())
}

/// Child-side setup, run after fork.
fn confine(cpu: u64, mem: u64, fsize: u64) -> std::io::Result<()> {
    // SAFETY: all calls below are async-signal-safe syscalls on plain values.
    unsafe {
        if libc::setpgid(0, 0) != 0 {
            return Err(std::io::Error::last_os_error());
        }
        libc::prctl(libc::PR_SET_PDEATHSIG, libc::SIGKILL as libc::c_ulong, 0, 0, 0);
        libc::prctl(libc::PR_SET_NO_NEW_PRIVS, 1 as libc::c_ulong, 0, 0, 0);
        // Best effort: an empty network namespace when the host permits it.
        libc::unshare(libc::CLONE_NEWNET);
    }
    set_limit(libc::RLIMIT_CPU, cpu)?;
    set_limit(libc::RLIMIT_AS, mem)?;
    set_limit(libc::RLIMIT_FSIZE, fsize)?;
    set_limit(libc::RLIMIT_CORE, 0)?;
    set_limit(libc::RLIMIT_NOFILE, 256)?;
    Ok(())
}

fn stderr_tail(path: &Path) -> String {
    let mut f = match File::open(path) {
        Ok(f) => f,
        Err(_) => return String::new(),
    };
    let len = f.metadata().map(|m| m.len()).unwrap_or(0);
    if len > STDERR_TAIL {
        let _ = f.seek(SeekFrom::Start(len - STDERR_TAIL));
    }
    let mut buf = Vec::new();
    let _ = f.read_to_end(&mut buf);
    String::from_utf8_lossy(&buf).trim_end().to_string()
}

/// Reads `frames/%06d.png` in order, stopping at the first gap or unreadable
/// file (a run killed mid-write leaves a torn last frame).
fn collect(dir: &Path, max_frames: usize) -> (Vec<GrayImage>, Meta, String) {
    let meta = std::fs::read(dir.join("meta.json"))
        .ok()
        .and_then(|b| serde_json::from_slice::<Meta>(&b).ok())
        .unwrap_or_default();
    let mut frames = Vec::new();
    for i in 0..max_frames {
        let path = dir.join("frames").join(format!("{i:06}.png"));
        match image::open(&path) {
            Ok(img) => frames.push(normalize_frame(&img, DEFAULT_CANVAS, DEFAULT_CANVAS)),
            Err(_) => break,
        }
    }
    (frames, meta, stderr_tail(&dir.join("stderr.txt")))
}
