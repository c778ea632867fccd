#![allow(dead_code)]

use std::path::Path;

use biomotion_arena::ServiceOptions;
use biomotion_core::arena::EloConfig;
use biomotion_core::artifact::{ArtifactId, ArtifactStore, GenerationArtifact, RenderResult};
use biomotion_core::motion::{render_frames, synthesize, MotionSpec, RenderOptions};
use biomotion_core::prompt::Modality;

pub const MODELS: [&str; 3] = ["model-zeta", "model-kappa", "model-omega"];

pub fn options(dir: &Path) -> ServiceOptions {
    ServiceOptions {
        store: dir.join("store"),
        vote_log: dir.join("votes.jsonl"),
        battles: dir.join("battles.jsonl"),
        elo: EloConfig::default(),
        seed: Some(7),
    }
}

/// Stores one small rendered artifact per (model, spec).
pub fn seed_store(store: &Path, models: &[&str], specs: &[MotionSpec]) -> Vec<GenerationArtifact> {
    let store = ArtifactStore::open(store).unwrap();
    let opts = RenderOptions { width: 48, height: 48, dot_radius: 1 };
    let mut out = Vec::new();
    for spec in specs {
        let frames = render_frames(&synthesize(spec, 0.25, 16.0).unwrap(), &opts).unwrap();
        for model in models {
            let artifact = GenerationArtifact {
                artifact_id: ArtifactId::generate(),
                model_id: model.to_string(),
                spec_id: spec.id(),
                modality: Modality::TextOnly,
                template_version: "test".into(),
                raw_response: "print('hi')".into(),
                reasoning: None,
                script: Some("print('hi')".into()),
                loc: 1,
                created_at: chrono::Utc::now(),
                latency_ms: None,
                render: None,
            };
            store.put(&artifact).unwrap();
            store
                .put_render(&artifact.artifact_id, &RenderResult::rendered(frames.clone(), String::new(), 0.1))
                .unwrap();
            out.push(artifact);
        }
    }
    out
}
