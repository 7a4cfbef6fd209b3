//! Name disambiguation for patent inventors and assignees, blocked on
//! high-resolution geolocation.
//!
//! Mentions are geocoded, grouped by identical street-level points and matched
//! with role-specific name rules, then linked to exact-name occurrences nearby
//! and, for inventors, across cities when their patents corroborate it.

pub mod assignee;
pub mod blocking;
pub mod cluster;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod geocode;
pub mod inventor;
pub mod lexicon;
pub mod mobile;
pub mod nearby;
pub mod pipeline;
pub mod synth;
pub mod textnorm;

pub use corpus::{EntityId, GeoPoint, Mention, MentionId, Resolution, Role};
pub use error::{Error, Result};
pub use pipeline::{disambiguate, run, PipelineConfig};
