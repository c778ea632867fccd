//! Benchmark variant catalog and prompt assembly.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{
    encode_png, reference_frame, render_frames, Action, Gender, MotionError, MotionSpec, Mood,
    RenderOptions, SpecId, Weight,
};

/// The 10 basic specs in catalog order, then the 80 fine-grained specs
/// (action-major, then gender, mood, weight; first-listed value first).
pub fn enumerate_variants() -> Vec<MotionSpec> {
    let mut out: Vec<MotionSpec> = Action::ALL.into_iter().map(MotionSpec::basic).collect();
    for action in Action::ALL {
        for gender in Gender::ALL {
            for mood in Mood::ALL {
                for weight in Weight::ALL {
                    out.push(MotionSpec::fine_grained(action, gender, mood, weight));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantEntry {
    pub index: usize,
    pub id: SpecId,
    pub kind: String,
    pub description: String,
    #[serde(flatten)]
    pub spec: MotionSpec,
}

/// Catalog rows suitable for export.
pub fn variant_manifest() -> Vec<VariantEntry> {
    enumerate_variants()
        .into_iter()
        .enumerate()
        .map(|(index, spec)| VariantEntry {
            index,
            id: spec.id(),
            kind: if spec.is_basic() { "basic" } else { "fine-grained" }.to_string(),
            description: spec.description(),
            spec,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    TextOnly,
    ImageText,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::TextOnly => "text_only",
            Modality::ImageText => "image_text",
        })
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {name}: {message}")]
    Template { name: String, message: String },
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub const SYSTEM_FILE: &str = "system.txt";
pub const TEXT_ONLY_FILE: &str = "user_text_only.txt";
pub const IMAGE_TEXT_FILE: &str = "user_image_text.txt";
pub const VERSION_FILE: &str = "VERSION";

/// Token substituted for `{image}`; adapters place the attached image there.
pub const IMAGE_TOKEN: &str = "<image>";

const PLACEHOLDERS: [&str; 5] = ["runtime", "subject", "action", "points", "image"];

/// A versioned set of prompt templates, kept byte-for-byte as loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    version_file: String,
    system: String,
    text_only: String,
    image_text: String,
}

impl TemplateSet {
    pub fn builtin() -> TemplateSet {
        TemplateSet::from_parts(
            include_str!("../data/templates/v1/VERSION"),
            include_str!("../data/templates/v1/system.txt"),
            include_str!("../data/templates/v1/user_text_only.txt"),
            include_str!("../data/templates/v1/user_image_text.txt"),
        )
        .expect("bundled templates are valid")
    }

    pub fn from_parts(
        version: &str,
        system: &str,
        text_only: &str,
        image_text: &str,
    ) -> Result<TemplateSet, PromptError> {
        for (name, text) in [
            (SYSTEM_FILE, system),
            (TEXT_ONLY_FILE, text_only),
            (IMAGE_TEXT_FILE, image_text),
        ] {
            check_placeholders(name, text)?;
        }
        if version.trim().is_empty() {
            return Err(PromptError::Template {
                name: VERSION_FILE.into(),
                message: "empty version".into(),
            });
        }
        if !image_text.contains("{image}") {
            return Err(PromptError::Template {
                name: IMAGE_TEXT_FILE.into(),
                message: "image template must reference {image}".into(),
            });
        }
        Ok(TemplateSet {
            version_file: version.to_string(),
            system: system.to_string(),
            text_only: text_only.to_string(),
            image_text: image_text.to_string(),
        })
    }

    pub fn load_dir(dir: &Path) -> Result<TemplateSet, PromptError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        TemplateSet::from_parts(
            &read(VERSION_FILE)?,
            &read(SYSTEM_FILE)?,
            &read(TEXT_ONLY_FILE)?,
            &read(IMAGE_TEXT_FILE)?,
        )
    }

    pub fn save_dir(&self, dir: &Path) -> Result<(), PromptError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| PromptError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, text) in [
            (VERSION_FILE, &self.version_file),
            (SYSTEM_FILE, &self.system),
            (TEXT_ONLY_FILE, &self.text_only),
            (IMAGE_TEXT_FILE, &self.image_text),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(io(&path))?;
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        self.version_file.trim()
    }
}

fn check_placeholders(name: &str, text: &str) -> Result<(), PromptError> {
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| PromptError::Template {
            name: name.to_string(),
            message: "unterminated placeholder".into(),
        })?;
        let key = &after[..close];
        if !PLACEHOLDERS.contains(&key) {
            return Err(PromptError::Template {
                name: name.to_string(),
                message: format!("unknown placeholder {{{key}}}"),
            });
        }
        rest = &after[close + 1..];
    }
    Ok(())
}

fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceImage {
    pub width: u32,
    pub height: u32,
    /// PNG-encoded RGB image.
    #[serde(skip)]
    pub png: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub spec: MotionSpec,
    pub modality: Modality,
    pub template_version: String,
    pub system_text: String,
    pub user_text: String,
    pub reference_image: Option<ReferenceImage>,
}

#[derive(Debug, Clone)]
pub struct PromptForge {
    templates: TemplateSet,
    runtime: String,
    render: RenderOptions,
}

impl Default for PromptForge {
    fn default() -> Self {
        PromptForge::new(TemplateSet::builtin(), "Python")
    }
}

impl PromptForge {
    pub fn new(templates: TemplateSet, runtime: impl Into<String>) -> Self {
        PromptForge {
            templates,
            runtime: runtime.into(),
            render: RenderOptions::default(),
        }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    /// The image attached to image-text prompts: neutral walking at phase 0,
    /// drawn with the requested marker count.
    pub fn reference_image(&self, spec: &MotionSpec) -> Result<ReferenceImage, PromptError> {
        let walking = MotionSpec::basic(Action::Walking).with_marker_count(spec.marker_count);
        let seq = render_frames(&reference_frame(&walking, 0.0)?, &self.render)?;
        Ok(ReferenceImage {
            width: seq.width,
            height: seq.height,
            png: encode_png(&seq.frames[0]),
        })
    }

    pub fn render_prompt(
        &self,
        spec: &MotionSpec,
        modality: Modality,
    ) -> Result<PromptBundle, PromptError> {
        spec.validate()?;
        let points = spec.marker_count.to_string();
        let subject = spec.subject_phrase();
        let values = [
            ("runtime", self.runtime.as_str()),
            ("subject", subject.as_str()),
            ("action", spec.action.phrase()),
            ("points", points.as_str()),
            ("image", IMAGE_TOKEN),
        ];
        let (template, reference_image) = match modality {
            Modality::TextOnly => (&self.templates.text_only, None),
            Modality::ImageText => (&self.templates.image_text, Some(self.reference_image(spec)?)),
        };
        Ok(PromptBundle {
            spec: *spec,
            modality,
            template_version: self.templates.version().to_string(),
            system_text: fill(&self.templates.system, &values),
            user_text: fill(template, &values),
            reference_image,
        })
    }
}

/// Renders with the bundled templates and a Python runtime.
pub fn render_prompt(spec: &MotionSpec, modality: Modality) -> Result<PromptBundle, PromptError> {
    PromptForge::default().render_prompt(spec, modality)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn ninety_unique_variants() {
        let all = enumerate_variants();
        assert_eq!(all.len(), 90);
        assert!(all[..10].iter().all(|s| s.is_basic()));
        assert!(all[10..].iter().all(|s| s.is_fine_grained()));
        let ids: HashSet<_> = all.iter().map(|s| s.id()).collect();
        assert_eq!(ids.len(), 90);
        let first: Vec<_> = all[..3].iter().map(|s| s.action.phrase()).collect();
        assert_eq!(first, ["walking", "running", "waving a hand"]);
        assert_eq!(all[10].id().as_str(), "walking/man-happy-heavy");
        assert_eq!(all[17].id().as_str(), "walking/woman-sad-light");
        assert_eq!(all[89].id().as_str(), "forward-rolling/woman-sad-light");
        for s in &all {
            s.validate_for_benchmark().unwrap();
        }
    }

    #[test]
    fn text_prompt_for_basic_walking() {
        let b = render_prompt(&MotionSpec::basic(Action::Walking), Modality::TextOnly).unwrap();
        assert!(b.user_text.contains("The animation depict a man is walking."));
        assert!(b.user_text.contains("exactly 15 white point-lights"));
        assert!(b.system_text.starts_with("You are an expert Python programmer."));
        assert!(b.reference_image.is_none());
        assert_eq!(b.template_version, "v1");
    }

    #[test]
    fn fine_grained_prompt_embeds_attributes() {
        let spec = MotionSpec::fine_grained(Action::Walking, Gender::Man, Mood::Happy, Weight::Heavy);
        let b = render_prompt(&spec, Modality::TextOnly).unwrap();
        assert!(b.user_text.contains("a happy man with heavy weight is walking"));
        for word in ["happy", "man", "heavy"] {
            assert!(b.user_text.contains(word));
        }
    }

    #[test]
    fn image_prompt_attaches_reference() {
        let b = render_prompt(&MotionSpec::basic(Action::Running), Modality::ImageText).unwrap();
        let img = b.reference_image.expect("image attached");
        assert!(!img.png.is_empty());
        assert_eq!((img.width, img.height), (512, 512));
        assert!(b.user_text.contains(IMAGE_TOKEN));
        assert!(b.user_text.contains("running"));
    }

    #[test]
    fn marker_count_flows_into_prompt() {
        let spec = MotionSpec::basic(Action::Bowing).with_marker_count(8);
        let b = render_prompt(&spec, Modality::TextOnly).unwrap();
        assert!(b.user_text.contains("exactly 8 white point-lights"));
    }

    #[test]
    fn deterministic() {
        let spec = MotionSpec::basic(Action::Walking);
        assert_eq!(
            render_prompt(&spec, Modality::ImageText).unwrap(),
            render_prompt(&spec, Modality::ImageText).unwrap()
        );
    }

    #[test]
    fn templates_round_trip_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/templates/v1");
        let loaded = TemplateSet::load_dir(&bundled).unwrap();
        loaded.save_dir(dir.path()).unwrap();
        for name in [VERSION_FILE, SYSTEM_FILE, TEXT_ONLY_FILE, IMAGE_TEXT_FILE] {
            assert_eq!(
                std::fs::read(bundled.join(name)).unwrap(),
                std::fs::read(dir.path().join(name)).unwrap(),
                "{name}"
            );
        }
        assert_eq!(loaded, TemplateSet::builtin());
    }

    #[test]
    fn rejects_unknown_placeholder() {
        let err = TemplateSet::from_parts("v1", "{nope}", "x", "{image}").unwrap_err();
        assert!(matches!(err, PromptError::Template { .. }));
    }
}
