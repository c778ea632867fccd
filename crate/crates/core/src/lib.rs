//! Core library for the point-light motion arena.
//!
//! * [`motion`] synthesizes reference point-light animations.
//! * [`prompt`] enumerates benchmark variants and renders prompts.
//! * [`artifact`] stores generated programs and their render results.
//! * [`arena`] holds battles, votes and Elo state.
//! * [`analytics`] derives win rates and agreement statistics from vote logs.

pub mod analytics;
pub mod arena;
pub mod artifact;
pub mod motion;
pub mod prompt;
