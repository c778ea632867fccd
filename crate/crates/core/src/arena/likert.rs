use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ArenaError;
use crate::motion::SpecId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertRecord {
    pub model_id: String,
    pub spec_id: SpecId,
    pub rater_id: String,
    pub score: u8,
    pub timestamp: DateTime<Utc>,
}

pub const LIKERT_RANGE: std::ops::RangeInclusive<u8> = 1..=5;

impl LikertRecord {
    pub fn check(&self) -> Result<(), ArenaError> {
        if !LIKERT_RANGE.contains(&self.score) {
            return Err(ArenaError::Validation(format!(
                "Likert score must be 1..=5, got {}",
                self.score
            )));
        }
        if self.model_id.is_empty() {
            return Err(ArenaError::Validation("empty model id".into()));
        }
        Ok(())
    }
}

/// Absolute five-point ratings, optionally mirrored to a JSONL file.
#[derive(Debug, Default)]
pub struct LikertStore {
    records: Vec<LikertRecord>,
    path: Option<PathBuf>,
}

impl LikertStore {
    pub fn in_memory() -> Self {
        LikertStore::default()
    }

    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ArenaError> {
        let path = path.into();
        let mut records = Vec::new();
        match std::fs::File::open(&path) {
            Ok(f) => {
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(ArenaError::Log)?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let r: LikertRecord = serde_json::from_str(&line).map_err(|e| {
                        ArenaError::Malformed(format!("{} line {}: {e}", path.display(), i + 1))
                    })?;
                    r.check()?;
                    records.push(r);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(ArenaError::Log(e)),
        }
        Ok(LikertStore {
            records,
            path: Some(path),
        })
    }

    pub fn ingest(&mut self, record: LikertRecord) -> Result<(), ArenaError> {
        record.check()?;
        if let Some(path) = &self.path {
            append_line(path, &record).map_err(ArenaError::Log)?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[LikertRecord] {
        &self.records
    }

    pub fn for_model<'a>(&'a self, model_id: &'a str) -> impl Iterator<Item = &'a LikertRecord> {
        self.records.iter().filter(move |r| r.model_id == model_id)
    }
}

fn append_line(path: &Path, record: &LikertRecord) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(record).map_err(std::io::Error::other)?;
    line.push(b'\n');
    f.write_all(&line)?;
    f.sync_data()
}
