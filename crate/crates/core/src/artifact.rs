//! Generated programs, their execution results, and the on-disk store.
//!
//! Layout under the store root:
//!
//! ```text
//! artifacts/<id>.json   generation record (written once)
//! raw/<id>.txt          raw model response
//! renders/<id>.json     execution record (written once)
//! media/<id>.gif        playback animation for rendered artifacts
//! ```

use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{encode_gif, FrameSequence, SpecId};
use crate::prompt::Modality;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArtifactId(pub String);

impl ArtifactId {
    pub fn generate() -> ArtifactId {
        ArtifactId(uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Ids are used as file names, so only `[A-Za-z0-9_-]` is accepted.
    pub fn is_valid(&self) -> bool {
        !self.0.is_empty()
            && self.0.len() <= 128
            && self.0.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
    }
}

impl fmt::Display for ArtifactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ArtifactId {
    fn from(s: &str) -> Self {
        ArtifactId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Rendered,
    RuntimeError,
    Timeout,
    NoAnimation,
    BlankOutput,
    ExtractionFailed,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Rendered,
        Outcome::RuntimeError,
        Outcome::Timeout,
        Outcome::NoAnimation,
        Outcome::BlankOutput,
        Outcome::ExtractionFailed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Rendered => "rendered",
            Outcome::RuntimeError => "runtime_error",
            Outcome::Timeout => "timeout",
            Outcome::NoAnimation => "no_animation",
            Outcome::BlankOutput => "blank_output",
            Outcome::ExtractionFailed => "extraction_failed",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of executing one script. Frames are present exactly when rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderResult {
    outcome: Outcome,
    frames: Option<FrameSequence>,
    pub stderr_excerpt: String,
    pub duration_secs: f64,
}

impl RenderResult {
    pub fn rendered(frames: FrameSequence, stderr_excerpt: String, duration_secs: f64) -> Self {
        RenderResult {
            outcome: Outcome::Rendered,
            frames: Some(frames),
            stderr_excerpt,
            duration_secs,
        }
    }

    /// Panics if `outcome` is [`Outcome::Rendered`].
    pub fn failed(outcome: Outcome, stderr_excerpt: String, duration_secs: f64) -> Self {
        assert_ne!(outcome, Outcome::Rendered, "a rendered result needs frames");
        RenderResult {
            outcome,
            frames: None,
            stderr_excerpt,
            duration_secs,
        }
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn frames(&self) -> Option<&FrameSequence> {
        self.frames.as_ref()
    }

    pub fn into_frames(self) -> Option<FrameSequence> {
        self.frames
    }
}

/// Serializable summary of a [`RenderResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRecord {
    pub outcome: Outcome,
    pub stderr_excerpt: String,
    pub duration_secs: f64,
    #[serde(default)]
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    /// Path of the playback animation relative to the store root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<String>,
    pub executed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationArtifact {
    pub artifact_id: ArtifactId,
    pub model_id: String,
    pub spec_id: SpecId,
    pub modality: Modality,
    #[serde(default)]
    pub template_version: String,
    /// Kept in `raw/<id>.txt`, not in the record.
    #[serde(skip)]
    pub raw_response: String,
    /// Reasoning trace when the provider returns one separately; never parsed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    pub script: Option<String>,
    pub loc: u64,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(skip)]
    pub render: Option<RenderRecord>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("artifact {0} already exists")]
    Exists(ArtifactId),
    #[error("artifact {0} already has a render record")]
    AlreadyRendered(ArtifactId),
    #[error("artifact {0} not found")]
    NotFound(ArtifactId),
    #[error("invalid artifact id {0:?}")]
    InvalidId(String),
    #[error("encoding media for {id}: {message}")]
    Media { id: ArtifactId, message: String },
}

/// Append-only artifact directory. Safe for concurrent writers: every file is
/// created exclusively and named by a unique id.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

const DIRS: [&str; 4] = ["artifacts", "raw", "renders", "media"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<ArtifactStore, StoreError> {
        let root = root.into();
        for d in DIRS {
            let p = root.join(d);
            std::fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        Ok(ArtifactStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn check(id: &ArtifactId) -> Result<(), StoreError> {
        if id.is_valid() {
            Ok(())
        } else {
            Err(StoreError::InvalidId(id.0.clone()))
        }
    }

    fn record_path(&self, id: &ArtifactId) -> PathBuf {
        self.root.join("artifacts").join(format!("{id}.json"))
    }

    fn raw_path(&self, id: &ArtifactId) -> PathBuf {
        self.root.join("raw").join(format!("{id}.txt"))
    }

    fn render_path(&self, id: &ArtifactId) -> PathBuf {
        self.root.join("renders").join(format!("{id}.json"))
    }

    fn media_rel(id: &ArtifactId) -> String {
        format!("media/{id}.gif")
    }

    fn write_new(path: &Path, bytes: &[u8]) -> Result<bool, StoreError> {
        match OpenOptions::new().write(true).create_new(true).open(path) {
            Ok(mut f) => {
                f.write_all(bytes).map_err(io_err(path))?;
                f.sync_data().map_err(io_err(path))?;
                Ok(true)
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Ok(false),
            Err(e) => Err(io_err(path)(e)),
        }
    }

    /// Stores a new generation record and its raw response.
    pub fn put(&self, artifact: &GenerationArtifact) -> Result<(), StoreError> {
        let id = &artifact.artifact_id;
        Self::check(id)?;
        let raw = self.raw_path(id);
        if !Self::write_new(&raw, artifact.raw_response.as_bytes())? {
            return Err(StoreError::Exists(id.clone()));
        }
        let json = serde_json::to_vec_pretty(artifact).expect("artifact serializes");
        let path = self.record_path(id);
        if !Self::write_new(&path, &json)? {
            return Err(StoreError::Exists(id.clone()));
        }
        if let Some(render) = &artifact.render {
            self.put_render_record(id, render)?;
        }
        Ok(())
    }

    fn put_render_record(&self, id: &ArtifactId, record: &RenderRecord) -> Result<(), StoreError> {
        let json = serde_json::to_vec_pretty(record).expect("render record serializes");
        if !Self::write_new(&self.render_path(id), &json)? {
            return Err(StoreError::AlreadyRendered(id.clone()));
        }
        Ok(())
    }

    /// Records an execution result; rendered frames are encoded to the playback GIF.
    pub fn put_render(
        &self,
        id: &ArtifactId,
        result: &RenderResult,
    ) -> Result<RenderRecord, StoreError> {
        Self::check(id)?;
        if !self.record_path(id).exists() {
            return Err(StoreError::NotFound(id.clone()));
        }
        if self.render_path(id).exists() {
            return Err(StoreError::AlreadyRendered(id.clone()));
        }
        let mut record = RenderRecord {
            outcome: result.outcome(),
            stderr_excerpt: result.stderr_excerpt.clone(),
            duration_secs: result.duration_secs,
            frame_count: 0,
            fps: None,
            media: None,
            executed_at: Utc::now(),
        };
        if let Some(seq) = result.frames() {
            let rel = Self::media_rel(id);
            let path = self.root.join(&rel);
            let mut buf = Vec::new();
            encode_gif(seq, &mut buf).map_err(|e| StoreError::Media {
                id: id.clone(),
                message: e.to_string(),
            })?;
            if !Self::write_new(&path, &buf)? {
                return Err(StoreError::AlreadyRendered(id.clone()));
            }
            record.frame_count = seq.frames.len();
            record.fps = Some(seq.playback_fps());
            record.media = Some(rel);
        }
        self.put_render_record(id, &record)?;
        Ok(record)
    }

    pub fn get(&self, id: &ArtifactId) -> Result<GenerationArtifact, StoreError> {
        Self::check(id)?;
        let path = self.record_path(id);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.clone()))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut artifact: GenerationArtifact =
            serde_json::from_slice(&bytes).map_err(|source| StoreError::Decode {
                path: path.clone(),
                source,
            })?;
        let raw = self.raw_path(id);
        artifact.raw_response = std::fs::read_to_string(&raw).map_err(io_err(&raw))?;
        let render = self.render_path(id);
        artifact.render = match std::fs::read(&render) {
            Ok(b) => Some(serde_json::from_slice(&b).map_err(|source| StoreError::Decode {
                path: render.clone(),
                source,
            })?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(io_err(&render)(e)),
        };
        Ok(artifact)
    }

    /// All artifacts ordered by creation time, then id.
    pub fn list(&self) -> Result<Vec<GenerationArtifact>, StoreError> {
        let dir = self.root.join("artifacts");
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".json")) else {
                continue;
            };
            out.push(self.get(&ArtifactId::from(stem))?);
        }
        out.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.artifact_id.cmp(&b.artifact_id))
        });
        Ok(out)
    }

    /// Absolute path of an artifact's playback animation, if it has one.
    pub fn media_path(&self, id: &ArtifactId) -> Option<PathBuf> {
        if !id.is_valid() {
            return None;
        }
        let p = self.root.join(Self::media_rel(id));
        p.is_file().then_some(p)
    }

    /// Rendered artifacts, in [`list`](Self::list) order.
    pub fn rendered(&self) -> Result<Vec<GenerationArtifact>, StoreError> {
        Ok(self
            .list()?
            .into_iter()
            .filter(|a| a.render.as_ref().is_some_and(|r| r.outcome == Outcome::Rendered))
            .collect())
    }
}
