//! The single arena configuration file. Relative paths resolve against the
//! directory containing the file.

use std::path::{Path, PathBuf};

use biomotion_core::arena::EloConfig;
use biomotion_sandbox::{ExecLimits, RuntimeCommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Artifact store root.
    pub store: PathBuf,
    /// Write-ahead vote log (JSON lines).
    pub vote_log: PathBuf,
    /// Battles served but not yet voted on.
    pub battles: PathBuf,
    pub likert: PathBuf,
    /// Model roster; the bundled benchmark roster when absent.
    pub roster: Option<PathBuf>,
    /// Prompt template directory; the bundled templates when absent.
    pub templates: Option<PathBuf>,
    /// Parent directory for sandbox runs.
    pub sandbox: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            store: "store".into(),
            vote_log: "votes.jsonl".into(),
            battles: "battles.jsonl".into(),
            likert: "likert.jsonl".into(),
            roster: None,
            templates: None,
            sandbox: "sandbox".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EloSection {
    pub initial_rating: f64,
    pub k: f64,
    pub scale: f64,
}

impl Default for EloSection {
    fn default() -> Self {
        let d = EloConfig::default();
        EloSection { initial_rating: d.initial_rating, k: d.k, scale: d.scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerSection {
    pub bind: String,
    /// Seeds battle sampling; entropy from the OS when absent.
    pub seed: Option<u64>,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection { bind: "127.0.0.1:8080".into(), seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandboxSection {
    pub runtime: RuntimeCommand,
    pub limits: ExecLimits,
    pub max_parallel: usize,
}

impl Default for SandboxSection {
    fn default() -> Self {
        SandboxSection { runtime: RuntimeCommand::default(), limits: ExecLimits::default(), max_parallel: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptSection {
    /// Name substituted for `{runtime}` in the templates.
    pub runtime: String,
}

impl Default for PromptSection {
    fn default() -> Self {
        PromptSection { runtime: "Python".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArenaConfig {
    pub paths: Paths,
    pub elo: EloSection,
    pub server: ServerSection,
    pub sandbox: SandboxSection,
    pub prompt: PromptSection,
}

impl ArenaConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<ArenaConfig> {
        let cfg: ArenaConfig = toml::from_str(text)?;
        cfg.elo().validate().map_err(anyhow::Error::msg)?;
        Ok(cfg)
    }

    /// Loads `path` and makes every relative path absolute.
    pub fn load(path: &Path) -> anyhow::Result<ArenaConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        let mut cfg = ArenaConfig::from_toml(&text)?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        fix(&mut paths.store);
        fix(&mut paths.vote_log);
        fix(&mut paths.battles);
        fix(&mut paths.likert);
        fix(&mut paths.sandbox);
        if let Some(p) = paths.roster.as_mut() {
            fix(p);
        }
        if let Some(p) = paths.templates.as_mut() {
            fix(p);
        }
    }

    pub fn elo(&self) -> EloConfig {
        EloConfig { initial_rating: self.elo.initial_rating, k: self.elo.k, scale: self.elo.scale }
    }
}
